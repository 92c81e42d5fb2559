#include "featuredex/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>

#include "featuredex/errors.hpp"
#include "featuredex/io_util.hpp"
#include "featuredex/rng.hpp"

namespace featuredex {

namespace {

void check_shape(const NetShape& s) {
    if (s.in == 0 || s.h1 == 0 || s.h2 == 0 || s.pooled == 0 || s.classifier == 0 ||
        s.families == 0)
        throw Error(Err::ShapeMismatch, "net shape has a zero layer width");
}

// Row-major dense layer over a batch of rows: out = relu(x * w^T + b).
// w is (n_out x n_in). Skips the relu when `rectify` is false.
void dense_rows(const double* x, size_t rows, size_t n_in, const double* w,
                const double* b, size_t n_out, double* out, bool rectify) {
    for (size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * n_in;
        double* yr = out + r * n_out;
        for (size_t o = 0; o < n_out; ++o) {
            const double* wo = w + o * n_in;
            double acc = b[o];
            for (size_t i = 0; i < n_in; ++i) acc += wo[i] * xr[i];
            yr[o] = rectify && acc < 0 ? 0 : acc;
        }
    }
}

struct Workspace {
    std::vector<double> x;       // rows x in, widened input features
    std::vector<double> h1;      // rows x h1
    std::vector<double> h2;      // rows x h2
    std::vector<double> pooled;  // P
    std::vector<int32_t> owner;  // P, argmax row per slot (-1 = empty bin)
    std::vector<double> hidden;  // classifier width
    std::vector<double> probs;   // families
};

void forward_ws(const NetParams& params, const PointCloud& cloud, const FeatureMatrix& fm,
                const SppConfig& scfg, Workspace& ws) {
    const NetShape& s = params.shape;
    check_shape(s);
    if (params.values.size() != s.parameter_count())
        throw Error(Err::ShapeMismatch, "parameter vector length does not match shape");
    if (fm.cols != s.in)
        throw Error(Err::ShapeMismatch, "feature width " + std::to_string(fm.cols) +
                                            " does not match net input " +
                                            std::to_string(s.in));
    if (cloud.size() != fm.rows)
        throw Error(Err::ShapeMismatch, "cloud size does not match feature rows");
    if (scfg.output_dim(s.h2) != s.pooled)
        throw Error(Err::ShapeMismatch, "pooling config produces " +
                                            std::to_string(scfg.output_dim(s.h2)) +
                                            " values, net expects " +
                                            std::to_string(s.pooled));

    const size_t rows = fm.rows;
    const double* v = params.values.data();

    ws.x.resize(rows * s.in);
    for (size_t i = 0; i < ws.x.size(); ++i) ws.x[i] = fm.values[i];

    ws.h1.resize(rows * s.h1);
    dense_rows(ws.x.data(), rows, s.in, v + s.off_w1(), v + s.off_b1(), s.h1,
               ws.h1.data(), true);
    ws.h2.resize(rows * s.h2);
    dense_rows(ws.h1.data(), rows, s.h1, v + s.off_w2(), v + s.off_b2(), s.h2,
               ws.h2.data(), true);

    ws.pooled = spp_pool_core<double>(cloud, rows, s.h2, ws.h2.data(), scfg, &ws.owner);

    ws.hidden.resize(s.classifier);
    dense_rows(ws.pooled.data(), 1, s.pooled, v + s.off_w3(), v + s.off_b3(), s.classifier,
               ws.hidden.data(), true);

    std::vector<double> logits(s.families);
    dense_rows(ws.hidden.data(), 1, s.classifier, v + s.off_w4(), v + s.off_b4(),
               s.families, logits.data(), false);

    double peak = *std::max_element(logits.begin(), logits.end());
    double denom = 0;
    ws.probs.resize(s.families);
    for (size_t f = 0; f < s.families; ++f) {
        ws.probs[f] = std::exp(logits[f] - peak);
        denom += ws.probs[f];
    }
    for (double& p : ws.probs) p /= denom;
}

// Gradient of cross_entropy(forward(params, sample)) w.r.t. every
// parameter, accumulated into grad (+=). Returns the sample loss.
double backward_ws(const NetParams& params, const TrainSample& sample,
                   const SppConfig& scfg, Workspace& ws, std::vector<double>& grad) {
    const NetShape& s = params.shape;
    forward_ws(params, sample.cloud, sample.fm, scfg, ws);
    if (sample.family >= s.families)
        throw Error(Err::ShapeMismatch, "family id out of range");

    double loss = cross_entropy(ws.probs, sample.family);
    if (ws.probs[sample.family] <= 1e-12) return loss;  // clamp active: zero gradient

    const size_t rows = sample.fm.rows;
    const double* v = params.values.data();
    double* g = grad.data();

    // softmax + cross entropy
    std::vector<double> dlogits = ws.probs;
    dlogits[sample.family] -= 1.0;

    // classifier output layer
    for (size_t f = 0; f < s.families; ++f) {
        double d = dlogits[f];
        double* gw = g + s.off_w4() + f * s.classifier;
        for (size_t c = 0; c < s.classifier; ++c) gw[c] += d * ws.hidden[c];
        g[s.off_b4() + f] += d;
    }
    std::vector<double> dhidden(s.classifier, 0.0);
    for (size_t f = 0; f < s.families; ++f) {
        double d = dlogits[f];
        const double* w = v + s.off_w4() + f * s.classifier;
        for (size_t c = 0; c < s.classifier; ++c) dhidden[c] += d * w[c];
    }
    for (size_t c = 0; c < s.classifier; ++c)
        if (ws.hidden[c] <= 0) dhidden[c] = 0;

    // classifier hidden layer
    for (size_t c = 0; c < s.classifier; ++c) {
        double d = dhidden[c];
        if (d == 0) continue;
        double* gw = g + s.off_w3() + c * s.pooled;
        for (size_t p = 0; p < s.pooled; ++p) gw[p] += d * ws.pooled[p];
        g[s.off_b3() + c] += d;
    }
    std::vector<double> dpooled(s.pooled, 0.0);
    for (size_t c = 0; c < s.classifier; ++c) {
        double d = dhidden[c];
        if (d == 0) continue;
        const double* w = v + s.off_w3() + c * s.pooled;
        for (size_t p = 0; p < s.pooled; ++p) dpooled[p] += d * w[p];
    }

    // max pooling routes each slot's gradient to its argmax point
    std::vector<double> dh2(rows * s.h2, 0.0);
    std::vector<uint8_t> touched(rows, 0);
    for (size_t p = 0; p < s.pooled; ++p) {
        int32_t o = ws.owner[p];
        if (o < 0 || dpooled[p] == 0) continue;
        dh2[size_t(o) * s.h2 + p % s.h2] += dpooled[p];
        touched[size_t(o)] = 1;
    }
    for (size_t r = 0; r < rows; ++r) {
        if (!touched[r]) continue;
        double* d = dh2.data() + r * s.h2;
        const double* h = ws.h2.data() + r * s.h2;
        for (size_t c = 0; c < s.h2; ++c)
            if (h[c] <= 0) d[c] = 0;
    }

    // per-point layers; untouched rows carry zero gradient and are skipped
    std::vector<double> dh1(rows * s.h1, 0.0);
    for (size_t r = 0; r < rows; ++r) {
        if (!touched[r]) continue;
        const double* d2 = dh2.data() + r * s.h2;
        const double* x1 = ws.h1.data() + r * s.h1;
        for (size_t o = 0; o < s.h2; ++o) {
            double d = d2[o];
            if (d == 0) continue;
            double* gw = g + s.off_w2() + o * s.h1;
            for (size_t i = 0; i < s.h1; ++i) gw[i] += d * x1[i];
            g[s.off_b2() + o] += d;
            const double* w = v + s.off_w2() + o * s.h1;
            double* d1 = dh1.data() + r * s.h1;
            for (size_t i = 0; i < s.h1; ++i) d1[i] += d * w[i];
        }
    }
    for (size_t r = 0; r < rows; ++r) {
        if (!touched[r]) continue;
        double* d1 = dh1.data() + r * s.h1;
        const double* h = ws.h1.data() + r * s.h1;
        const double* xr = ws.x.data() + r * s.in;
        for (size_t o = 0; o < s.h1; ++o) {
            if (h[o] <= 0) d1[o] = 0;
            double d = d1[o];
            if (d == 0) continue;
            double* gw = g + s.off_w1() + o * s.in;
            for (size_t i = 0; i < s.in; ++i) gw[i] += d * xr[i];
            g[s.off_b1() + o] += d;
        }
    }
    return loss;
}

uint16_t predicted_family(const std::vector<double>& probs) {
    return static_cast<uint16_t>(std::max_element(probs.begin(), probs.end()) -
                                 probs.begin());
}

}  // namespace

NetShape make_net_shape(const SppConfig& scfg, uint32_t families, uint32_t in, uint32_t h1,
                        uint32_t h2, uint32_t classifier) {
    NetShape s;
    s.in = in;
    s.h1 = h1;
    s.h2 = h2;
    s.pooled = static_cast<uint32_t>(scfg.output_dim(h2));
    s.classifier = classifier;
    s.families = families;
    check_shape(s);
    return s;
}

NetParams NetParams::init(const NetShape& shape, uint64_t seed) {
    check_shape(shape);
    NetParams p;
    p.shape = shape;
    p.values.assign(shape.parameter_count(), 0.0);
    SplitMix64 rng(seed);
    auto glorot = [&](size_t off, size_t count, size_t fan_in, size_t fan_out) {
        double limit = std::sqrt(6.0 / double(fan_in + fan_out));
        for (size_t i = 0; i < count; ++i) p.values[off + i] = rng.uniform(-limit, limit);
    };
    glorot(shape.off_w1(), shape.n_w1(), shape.in, shape.h1);
    glorot(shape.off_w2(), shape.n_w2(), shape.h1, shape.h2);
    glorot(shape.off_w3(), shape.n_w3(), shape.pooled, shape.classifier);
    glorot(shape.off_w4(), shape.n_w4(), shape.classifier, shape.families);
    return p;
}

void NetParams::quantize_to_f32() {
    for (double& x : values) x = static_cast<double>(static_cast<float>(x));
}

ForwardResult forward(const NetParams& params, const PointCloud& cloud,
                      const FeatureMatrix& fm, const SppConfig& scfg) {
    Workspace ws;
    forward_ws(params, cloud, fm, scfg, ws);
    ForwardResult out;
    out.embedding.values.assign(ws.pooled.begin(), ws.pooled.end());
    out.probabilities = std::move(ws.probs);
    return out;
}

double cross_entropy(const std::vector<double>& probabilities, uint16_t true_family) {
    if (true_family >= probabilities.size())
        throw Error(Err::ShapeMismatch, "family id out of range");
    return -std::log(std::max(probabilities[true_family], 1e-12));
}

void adam_update(std::vector<double>& values, const std::vector<double>& grad,
                 std::vector<double>& m, std::vector<double>& v, uint64_t step,
                 const TrainConfig& tcfg) {
    if (grad.size() != values.size() || m.size() != values.size() ||
        v.size() != values.size())
        throw Error(Err::ShapeMismatch, "adam buffers disagree with parameter count");
    double corr1 = 1.0 - std::pow(tcfg.beta1, double(step));
    double corr2 = 1.0 - std::pow(tcfg.beta2, double(step));
    for (size_t i = 0; i < values.size(); ++i) {
        double gi = grad[i];
        m[i] = tcfg.beta1 * m[i] + (1 - tcfg.beta1) * gi;
        v[i] = tcfg.beta2 * v[i] + (1 - tcfg.beta2) * gi * gi;
        values[i] -= tcfg.learning_rate * (m[i] / corr1) /
                     (std::sqrt(v[i] / corr2) + tcfg.epsilon);
    }
}

std::pair<NetParams, TrainHistory> train(const std::vector<TrainSample>& train_set,
                                         const std::vector<TrainSample>& val_set,
                                         const NetShape& shape, const TrainConfig& tcfg,
                                         const SppConfig& scfg) {
    check_shape(shape);
    if (tcfg.epochs < 1) throw Error(Err::InvalidParams, "epochs must be at least 1");
    if (tcfg.batch < 1) throw Error(Err::InvalidParams, "batch size must be at least 1");
    if (!(tcfg.learning_rate > 0) || !std::isfinite(tcfg.learning_rate))
        throw Error(Err::InvalidParams, "learning rate must be positive and finite");
    if (train_set.empty()) throw Error(Err::EmptySplit, "training split is empty");
    if (val_set.empty()) throw Error(Err::EmptySplit, "validation split is empty");
    std::vector<uint32_t> family_seen(shape.families, 0);
    for (const TrainSample& s : train_set) {
        if (s.family >= shape.families)
            throw Error(Err::ShapeMismatch, "family id out of range");
        ++family_seen[s.family];
    }
    for (uint32_t f = 0; f < shape.families; ++f)
        if (family_seen[f] == 0)
            throw Error(Err::EmptySplit,
                        "family " + std::to_string(f) + " has no training sample");

    NetParams params = NetParams::init(shape, SplitMix64::derive(tcfg.seed, 0));
    const size_t n_params = params.values.size();
    std::vector<double> grad(n_params), m(n_params, 0.0), vmom(n_params, 0.0);
    Workspace ws;

    NetParams best = params;
    TrainHistory history;
    double best_acc = -1.0;

    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 shuffle_rng(SplitMix64::derive(tcfg.seed, 1));

    uint64_t step = 0;
    for (uint32_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
        for (size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i], order[shuffle_rng.next_index(i + 1)]);

        double loss_sum = 0;
        size_t correct = 0;
        for (size_t start = 0; start < order.size(); start += tcfg.batch) {
            size_t stop = std::min(order.size(), start + tcfg.batch);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (size_t i = start; i < stop; ++i) {
                const TrainSample& sample = train_set[order[i]];
                double loss = backward_ws(params, sample, scfg, ws, grad);
                loss_sum += loss;
                correct += predicted_family(ws.probs) == sample.family;
            }
            if (!std::isfinite(loss_sum))
                throw Error(Err::Divergence,
                            "training loss diverged at epoch " + std::to_string(epoch + 1));

            double inv_n = 1.0 / double(stop - start);
            for (size_t i = 0; i < n_params; ++i) grad[i] *= inv_n;
            adam_update(params.values, grad, m, vmom, ++step, tcfg);
        }

        EpochStats stats;
        stats.train_loss = loss_sum / double(train_set.size());
        stats.train_accuracy = double(correct) / double(train_set.size());

        double val_loss = 0;
        size_t val_correct = 0;
        for (const TrainSample& sample : val_set) {
            forward_ws(params, sample.cloud, sample.fm, scfg, ws);
            val_loss += cross_entropy(ws.probs, sample.family);
            val_correct += predicted_family(ws.probs) == sample.family;
        }
        stats.val_loss = val_loss / double(val_set.size());
        stats.val_accuracy = double(val_correct) / double(val_set.size());
        if (!std::isfinite(stats.val_loss))
            throw Error(Err::Divergence,
                        "validation loss diverged at epoch " + std::to_string(epoch + 1));
        history.epochs.push_back(stats);

        if (stats.val_accuracy > best_acc) {
            best_acc = stats.val_accuracy;
            best = params;
            history.best_epoch = epoch;
        }
    }

    best.quantize_to_f32();
    return {std::move(best), std::move(history)};
}

double grad_check(const NetParams& params, const TrainSample& sample,
                  const SppConfig& scfg, double eps, size_t n_checks, uint64_t seed) {
    if (!(eps > 0)) throw Error(Err::InvalidParams, "finite-difference step must be positive");
    const NetShape& s = params.shape;

    Workspace ws;
    std::vector<double> grad(params.values.size(), 0.0);
    backward_ws(params, sample, scfg, ws, grad);

    struct Group {
        size_t off, count;
    };
    const Group groups[8] = {{s.off_w1(), s.n_w1()}, {s.off_b1(), s.h1},
                             {s.off_w2(), s.n_w2()}, {s.off_b2(), s.h2},
                             {s.off_w3(), s.n_w3()}, {s.off_b3(), s.classifier},
                             {s.off_w4(), s.n_w4()}, {s.off_b4(), s.families}};

    SplitMix64 rng(seed);
    std::set<size_t> picked;
    size_t per_group = (n_checks + 7) / 8;
    for (const Group& grp : groups) {
        size_t want = std::min(per_group, grp.count);
        while (want > 0) {
            size_t idx = grp.off + rng.next_index(grp.count);
            if (picked.insert(idx).second) --want;
        }
    }
    while (picked.size() < n_checks)
        picked.insert(rng.next_index(params.values.size()));

    NetParams probe = params;
    double worst = 0;
    for (size_t idx : picked) {
        double saved = probe.values[idx];
        probe.values[idx] = saved + eps;
        forward_ws(probe, sample.cloud, sample.fm, scfg, ws);
        double lp = cross_entropy(ws.probs, sample.family);
        probe.values[idx] = saved - eps;
        forward_ws(probe, sample.cloud, sample.fm, scfg, ws);
        double lm = cross_entropy(ws.probs, sample.family);
        probe.values[idx] = saved;

        double numeric = (lp - lm) / (2 * eps);
        double err = std::abs(grad[idx] - numeric) /
                     std::max(std::abs(grad[idx]) + std::abs(numeric), 1e-3);
        worst = std::max(worst, err);
    }
    return worst;
}

std::vector<uint8_t> encode_fnet(const NetParams& params) {
    check_shape(params.shape);
    if (params.values.size() != params.shape.parameter_count())
        throw Error(Err::ShapeMismatch, "parameter vector length does not match shape");
    for (double x : params.values)
        if (!std::isfinite(x)) throw Error(Err::NonFinite, "non-finite parameter");

    ByteWriter w;
    w.bytes("FNET", 4);
    w.u16(1);
    w.u16(0);
    w.u32(6);
    const NetShape& s = params.shape;
    for (uint32_t size : {s.in, s.h1, s.h2, s.pooled, s.classifier, s.families})
        w.u32(size);
    for (double x : params.values) w.f32(static_cast<float>(x));
    return w.take();
}

NetParams decode_fnet(std::span<const uint8_t> bytes) {
    ByteReader r(bytes.data(), bytes.size(), "FNET");
    const uint8_t* magic = r.take(4);
    if (std::memcmp(magic, "FNET", 4) != 0) throw Error(Err::BadMagic, "not a FNET file");
    uint16_t version = r.u16();
    if (version != 1)
        throw Error(Err::VersionUnsupported,
                    "FNET version " + std::to_string(version) + " unsupported");
    if (r.u16() != 0) throw Error(Err::Malformed, "FNET reserved field must be zero");
    if (r.u32() != 6) throw Error(Err::Malformed, "FNET expects 6 layer sizes");

    NetParams p;
    p.shape.in = r.u32();
    p.shape.h1 = r.u32();
    p.shape.h2 = r.u32();
    p.shape.pooled = r.u32();
    p.shape.classifier = r.u32();
    p.shape.families = r.u32();
    if (p.shape.in == 0 || p.shape.h1 == 0 || p.shape.h2 == 0 || p.shape.pooled == 0 ||
        p.shape.classifier == 0 || p.shape.families == 0)
        throw Error(Err::Malformed, "FNET layer sizes must be positive");

    uint64_t count = p.shape.parameter_count();
    if (count > r.remaining() / 4)
        throw Error(Err::Truncated, "FNET parameter payload exceeds file size");
    if (count * 4 != r.remaining())
        throw Error(Err::Malformed, "trailing bytes after FNET payload");
    p.values.resize(count);
    for (double& x : p.values) {
        float f = r.f32();
        if (!std::isfinite(f)) throw Error(Err::NonFinite, "non-finite parameter");
        x = f;
    }
    return p;
}

void write_fnet(const NetParams& params, const std::filesystem::path& path) {
    write_file_atomic(path, encode_fnet(params));
}

NetParams read_fnet(const std::filesystem::path& path) {
    std::vector<uint8_t> bytes = read_file(path);
    return decode_fnet(bytes);
}

}  // namespace featuredex

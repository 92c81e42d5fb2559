#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <vector>

#include "doctest.h"
#include "featuredex/errors.hpp"
#include "featuredex/net.hpp"
#include "featuredex/rng.hpp"

using namespace featuredex;
namespace fs = std::filesystem;

namespace {

TrainSample make_sample(SplitMix64& rng, uint16_t family, uint32_t n_points,
                        uint32_t cols, double lo, double hi) {
    TrainSample s;
    s.family = family;
    s.fm.rows = n_points;
    s.fm.cols = cols;
    for (uint32_t i = 0; i < n_points; ++i) {
        Vec3 p{rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0, 10)};
        s.cloud.points.push_back(p);
        s.fm.positions.push_back(static_cast<float>(p.x));
        s.fm.positions.push_back(static_cast<float>(p.y));
        s.fm.positions.push_back(static_cast<float>(p.z));
        for (uint32_t c = 0; c < cols; ++c)
            s.fm.values.push_back(static_cast<float>(rng.uniform(lo, hi)));
    }
    return s;
}

// straight-line transcription of the per-point stack for oracle checks
std::vector<double> pointwise_oracle(const NetParams& p, const FeatureMatrix& fm) {
    const NetShape& s = p.shape;
    const std::vector<double>& v = p.values;
    std::vector<double> h1(size_t(fm.rows) * s.h1), h2(size_t(fm.rows) * s.h2);
    for (uint32_t r = 0; r < fm.rows; ++r) {
        for (uint32_t o = 0; o < s.h1; ++o) {
            double acc = v[s.off_b1() + o];
            for (uint32_t i = 0; i < s.in; ++i)
                acc += v[s.off_w1() + size_t(o) * s.in + i] * double(fm.at(r, i));
            h1[size_t(r) * s.h1 + o] = acc < 0 ? 0 : acc;
        }
        for (uint32_t o = 0; o < s.h2; ++o) {
            double acc = v[s.off_b2() + o];
            for (uint32_t i = 0; i < s.h1; ++i)
                acc += v[s.off_w2() + size_t(o) * s.h1 + i] * h1[size_t(r) * s.h1 + i];
            h2[size_t(r) * s.h2 + o] = acc < 0 ? 0 : acc;
        }
    }
    return h2;
}

template <typename Fn>
Err thrown_kind(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return Err::Empty;
}

}  // namespace

TEST_CASE("net shape arithmetic") {
    SppConfig scfg;  // levels (1,2,4) -> 73 bins
    NetShape s = make_net_shape(scfg, 12);
    CHECK(s.in == 32);
    CHECK(s.h1 == 64);
    CHECK(s.h2 == 32);
    CHECK(s.pooled == 2336);
    CHECK(s.classifier == 64);
    CHECK(s.families == 12);

    size_t expected = size_t(64) * 32 + 64       // w1, b1
                      + size_t(32) * 64 + 32     // w2, b2
                      + size_t(64) * 2336 + 64   // w3, b3
                      + size_t(12) * 64 + 12;    // w4, b4
    CHECK(s.parameter_count() == expected);
    CHECK(s.parameter_count() == 154540);
    CHECK(s.off_b4() + s.families == s.parameter_count());
    CHECK(s.off_w4() == s.off_b3() + s.classifier);

    CHECK(thrown_kind([&] { make_net_shape(scfg, 0); }) == Err::ShapeMismatch);
}

TEST_CASE("zero parameters give uniform class probabilities") {
    SppConfig scfg;
    scfg.levels = {1};
    NetShape shape = make_net_shape(scfg, 12, 4, 5, 3, 4);
    NetParams params = NetParams::init(shape, 1);
    std::fill(params.values.begin(), params.values.end(), 0.0);

    SplitMix64 rng(2);
    TrainSample s = make_sample(rng, 0, 20, 4, -1, 1);
    ForwardResult out = forward(params, s.cloud, s.fm, scfg);
    REQUIRE(out.probabilities.size() == 12);
    for (double p : out.probabilities) CHECK(p == 1.0 / 12.0);
    CHECK(out.embedding.values.size() == shape.pooled);
}

TEST_CASE("probabilities are a distribution and the embedding is the pooled stack") {
    SppConfig scfg;
    scfg.levels = {1, 2};
    NetShape shape = make_net_shape(scfg, 5, 6, 10, 8, 12);
    NetParams params = NetParams::init(shape, 33);

    SplitMix64 rng(34);
    for (int trial = 0; trial < 8; ++trial) {
        TrainSample s = make_sample(rng, 0, 30, 6, -2, 2);
        ForwardResult out = forward(params, s.cloud, s.fm, scfg);

        double sum = 0;
        for (double p : out.probabilities) {
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
            sum += p;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));

        std::vector<double> h2 = pointwise_oracle(params, s.fm);
        std::vector<double> pooled =
            spp_pool_core<double>(s.cloud, s.fm.rows, shape.h2, h2.data(), scfg, nullptr);
        REQUIRE(out.embedding.values.size() == pooled.size());
        for (size_t i = 0; i < pooled.size(); ++i)
            CHECK(out.embedding.values[i] == static_cast<float>(pooled[i]));
    }
}

TEST_CASE("cross entropy hand values") {
    std::vector<double> uniform(12, 1.0 / 12.0);
    CHECK(cross_entropy(uniform, 3) ==
          doctest::Approx(std::log(12.0)).epsilon(1e-12));
    CHECK(std::log(12.0) == doctest::Approx(2.484906649788).epsilon(1e-12));

    std::vector<double> sure{0.0, 1.0, 0.0};
    CHECK(cross_entropy(sure, 1) == 0.0);
    CHECK(cross_entropy(sure, 0) == doctest::Approx(27.63102111592855).epsilon(1e-12));

    CHECK(thrown_kind([&] { cross_entropy(sure, 3); }) == Err::ShapeMismatch);
}

TEST_CASE("adam scalar step matches the hand-computed oracle") {
    TrainConfig tcfg;
    tcfg.learning_rate = 0.1;
    std::vector<double> w{1.0}, g{0.5}, m{0.0}, v{0.0};
    adam_update(w, g, m, v, 1, tcfg);
    // m_hat = 0.5, v_hat = 0.25 -> step = 0.1 * 0.5 / (0.5 + 1e-8)
    double expected = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
    CHECK(w[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(w[0] == doctest::Approx(0.9).epsilon(1e-7));
    CHECK(m[0] == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(v[0] == doctest::Approx(0.00025).epsilon(1e-12));

    // buffer length mismatches are rejected
    std::vector<double> short_m{0.0};
    std::vector<double> w2{1.0, 2.0}, g2{0.1, 0.2}, m2{0, 0}, v2{0, 0};
    CHECK(thrown_kind([&] { adam_update(w2, g2, short_m, v2, 1, tcfg); }) ==
          Err::ShapeMismatch);
}

TEST_CASE("adam trajectory matches an independent reference loop") {
    TrainConfig tcfg;
    tcfg.learning_rate = 0.01;
    SplitMix64 rng(40);
    std::vector<double> w{0.5, -1.25, 2.0}, m(3, 0.0), v(3, 0.0);
    long double rw[3] = {0.5L, -1.25L, 2.0L}, rm[3] = {0, 0, 0}, rv[3] = {0, 0, 0};

    for (uint64_t step = 1; step <= 25; ++step) {
        std::vector<double> g;
        for (int i = 0; i < 3; ++i) g.push_back(rng.uniform(-1, 1));
        adam_update(w, g, m, v, step, tcfg);

        long double c1 = 1.0L - powl(0.9L, static_cast<long double>(step));
        long double c2 = 1.0L - powl(0.999L, static_cast<long double>(step));
        for (int i = 0; i < 3; ++i) {
            rm[i] = 0.9L * rm[i] + 0.1L * g[i];
            rv[i] = 0.999L * rv[i] + 0.001L * g[i] * g[i];
            rw[i] -= 0.01L * (rm[i] / c1) / (sqrtl(rv[i] / c2) + 1e-8L);
        }
        for (int i = 0; i < 3; ++i)
            CHECK(w[i] == doctest::Approx(double(rw[i])).epsilon(1e-12));
    }
}

TEST_CASE("analytic gradients agree with central differences") {
    SppConfig scfg;
    scfg.levels = {1, 2};
    NetShape shape = make_net_shape(scfg, 4, 6, 10, 8, 12);
    NetParams params = NetParams::init(shape, 3);
    REQUIRE(shape.parameter_count() >= 200);

    SplitMix64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        TrainSample s =
            make_sample(rng, static_cast<uint16_t>(trial % 4), 25, 6, 0.2, 3.0);
        double worst = grad_check(params, s, scfg, 1e-5, 200, 100 + trial);
        CHECK(worst < 1e-5);
    }

    CHECK(thrown_kind([&] {
              TrainSample s = make_sample(rng, 0, 5, 6, 0, 1);
              grad_check(params, s, scfg, 0.0, 10, 1);
          }) == Err::InvalidParams);
}

TEST_CASE("perturbing a point that owns no pooling slot leaves the output unchanged") {
    SppConfig scfg;
    scfg.levels = {1};  // 4 slots total, so at most 4 of 8 points own one
    NetShape shape = make_net_shape(scfg, 3, 4, 6, 4, 5);
    NetParams params = NetParams::init(shape, 21);

    SplitMix64 rng(22);
    TrainSample s = make_sample(rng, 1, 8, 4, 0.3, 2.5);

    std::vector<double> h2 = pointwise_oracle(params, s.fm);
    std::vector<int32_t> owner;
    spp_pool_core<double>(s.cloud, s.fm.rows, shape.h2, h2.data(), scfg, &owner);
    int victim = -1;
    for (int r = int(s.fm.rows) - 1; r >= 0; --r)
        if (std::find(owner.begin(), owner.end(), r) == owner.end()) {
            victim = r;
            break;
        }
    REQUIRE(victim >= 0);

    ForwardResult before = forward(params, s.cloud, s.fm, scfg);
    for (uint32_t c = 0; c < s.fm.cols; ++c)
        s.fm.values[size_t(victim) * s.fm.cols + c] += 1e-6f;
    ForwardResult after = forward(params, s.cloud, s.fm, scfg);

    CHECK(before.embedding == after.embedding);
    REQUIRE(before.probabilities.size() == after.probabilities.size());
    for (size_t f = 0; f < before.probabilities.size(); ++f)
        CHECK(before.probabilities[f] == after.probabilities[f]);
}

TEST_CASE("training is deterministic and tracks the best validation epoch") {
    SppConfig scfg;
    scfg.levels = {1};
    NetShape shape = make_net_shape(scfg, 2, 4, 6, 4, 6);
    TrainConfig tcfg;
    tcfg.epochs = 4;
    tcfg.batch = 4;
    tcfg.learning_rate = 5e-3;
    tcfg.seed = 7;

    SplitMix64 rng(50);
    std::vector<TrainSample> train_set, val_set;
    for (uint16_t fam = 0; fam < 2; ++fam)
        for (int i = 0; i < 6; ++i) {
            TrainSample s = make_sample(rng, fam, 12, 4, fam * 1.5, fam * 1.5 + 1.0);
            s.id = static_cast<uint32_t>(train_set.size());
            train_set.push_back(std::move(s));
        }
    for (uint16_t fam = 0; fam < 2; ++fam)
        for (int i = 0; i < 2; ++i)
            val_set.push_back(make_sample(rng, fam, 12, 4, fam * 1.5, fam * 1.5 + 1.0));

    auto [p1, h1] = train(train_set, val_set, shape, tcfg, scfg);
    auto [p2, h2] = train(train_set, val_set, shape, tcfg, scfg);

    CHECK(p1 == p2);
    REQUIRE(h1.epochs.size() == tcfg.epochs);
    REQUIRE(h2.epochs.size() == tcfg.epochs);
    for (size_t e = 0; e < h1.epochs.size(); ++e) {
        CHECK(h1.epochs[e].train_loss == h2.epochs[e].train_loss);
        CHECK(h1.epochs[e].val_accuracy == h2.epochs[e].val_accuracy);
        CHECK(std::isfinite(h1.epochs[e].train_loss));
        CHECK(h1.epochs[e].train_accuracy >= 0.0);
        CHECK(h1.epochs[e].train_accuracy <= 1.0);
    }
    CHECK(h1.best_epoch == h2.best_epoch);

    // best epoch is the earliest maximum of validation accuracy
    double best = -1.0;
    uint32_t best_at = 0;
    for (size_t e = 0; e < h1.epochs.size(); ++e)
        if (h1.epochs[e].val_accuracy > best) {
            best = h1.epochs[e].val_accuracy;
            best_at = static_cast<uint32_t>(e);
        }
    CHECK(h1.best_epoch == best_at);

    // returned parameters are f32-quantized
    NetParams q = p1;
    q.quantize_to_f32();
    CHECK(q == p1);

    // a different seed trains a different net
    tcfg.seed = 8;
    auto [p3, h3] = train(train_set, val_set, shape, tcfg, scfg);
    CHECK(p3.values != p1.values);
}

TEST_CASE("training rejects empty or gappy splits") {
    SppConfig scfg;
    scfg.levels = {1};
    NetShape shape = make_net_shape(scfg, 3, 4, 6, 4, 6);
    TrainConfig tcfg;
    tcfg.epochs = 1;

    SplitMix64 rng(60);
    std::vector<TrainSample> two_fams;
    for (uint16_t fam = 0; fam < 2; ++fam)
        two_fams.push_back(make_sample(rng, fam, 8, 4, 0, 1));
    std::vector<TrainSample> val{make_sample(rng, 0, 8, 4, 0, 1)};

    CHECK(thrown_kind([&] { train({}, val, shape, tcfg, scfg); }) == Err::EmptySplit);
    CHECK(thrown_kind([&] { train(two_fams, {}, shape, tcfg, scfg); }) == Err::EmptySplit);
    // family 2 has no training sample
    CHECK(thrown_kind([&] { train(two_fams, val, shape, tcfg, scfg); }) == Err::EmptySplit);

    std::vector<TrainSample> bad = two_fams;
    bad.push_back(make_sample(rng, 9, 8, 4, 0, 1));  // out-of-range family
    CHECK(thrown_kind([&] { train(bad, val, shape, tcfg, scfg); }) == Err::ShapeMismatch);

    TrainConfig zero_epochs = tcfg;
    zero_epochs.epochs = 0;
    CHECK(thrown_kind([&] { train(two_fams, val, shape, zero_epochs, scfg); }) ==
          Err::InvalidParams);
}

TEST_CASE("a runaway learning rate raises Divergence") {
    SppConfig scfg;
    scfg.levels = {1};
    NetShape shape = make_net_shape(scfg, 2, 4, 6, 4, 6);
    TrainConfig tcfg;
    tcfg.epochs = 3;
    tcfg.batch = 1;
    tcfg.learning_rate = 1e308;

    SplitMix64 rng(70);
    std::vector<TrainSample> train_set;
    for (uint16_t fam = 0; fam < 2; ++fam)
        for (int i = 0; i < 3; ++i) train_set.push_back(make_sample(rng, fam, 10, 4, 0.5, 2));
    std::vector<TrainSample> val{make_sample(rng, 0, 10, 4, 0.5, 2)};

    try {
        train(train_set, val, shape, tcfg, scfg);
        FAIL("expected divergence");
    } catch (const Error& e) {
        CHECK(e.kind() == Err::Divergence);
        CHECK(e.exit_code() == 4);
    }

    TrainConfig inf_lr = tcfg;
    inf_lr.learning_rate = std::numeric_limits<double>::infinity();
    CHECK(thrown_kind([&] { train(train_set, val, shape, inf_lr, scfg); }) ==
          Err::InvalidParams);
}

TEST_CASE("zero input features leave every weight block untrained") {
    SppConfig scfg;
    scfg.levels = {1};
    NetShape shape = make_net_shape(scfg, 2, 4, 6, 4, 6);
    TrainConfig tcfg;
    tcfg.epochs = 2;
    // batch 1: a mixed batch would cancel the two families' output-bias
    // gradients exactly and leave even b4 untouched
    tcfg.batch = 1;
    tcfg.seed = 13;

    SplitMix64 rng(80);
    std::vector<TrainSample> train_set, val_set;
    for (uint16_t fam = 0; fam < 2; ++fam)
        for (int i = 0; i < 3; ++i) {
            TrainSample s = make_sample(rng, fam, 8, 4, 0, 1);
            std::fill(s.fm.values.begin(), s.fm.values.end(), 0.0f);
            train_set.push_back(s);
            if (i == 0) val_set.push_back(s);
        }

    auto [p, hist] = train(train_set, val_set, shape, tcfg, scfg);

    // zero input + zero init biases: ReLUs sit at zero everywhere, so only
    // the output bias receives gradient
    NetParams init = NetParams::init(shape, SplitMix64::derive(tcfg.seed, 0));
    init.quantize_to_f32();
    const NetShape& s = shape;
    for (size_t i = 0; i < s.off_b4(); ++i) CHECK(p.values[i] == init.values[i]);
    bool bias_moved = false;
    for (size_t i = s.off_b4(); i < s.parameter_count(); ++i)
        if (p.values[i] != init.values[i]) bias_moved = true;
    CHECK(bias_moved);
}

TEST_CASE("forward rejects mismatched shapes") {
    SppConfig scfg;
    scfg.levels = {1};
    NetShape shape = make_net_shape(scfg, 3, 4, 6, 4, 5);
    NetParams params = NetParams::init(shape, 90);
    SplitMix64 rng(91);
    TrainSample s = make_sample(rng, 0, 10, 4, 0, 1);

    NetParams wrong_len = params;
    wrong_len.values.pop_back();
    CHECK(thrown_kind([&] { forward(wrong_len, s.cloud, s.fm, scfg); }) ==
          Err::ShapeMismatch);

    TrainSample wide = make_sample(rng, 0, 10, 7, 0, 1);
    CHECK(thrown_kind([&] { forward(params, wide.cloud, wide.fm, scfg); }) ==
          Err::ShapeMismatch);

    TrainSample ragged = s;
    ragged.cloud.points.pop_back();
    CHECK(thrown_kind([&] { forward(params, ragged.cloud, ragged.fm, scfg); }) ==
          Err::ShapeMismatch);

    SppConfig other;
    other.levels = {1, 2};  // pooled length disagrees with shape.pooled
    CHECK(thrown_kind([&] { forward(params, s.cloud, s.fm, other); }) ==
          Err::ShapeMismatch);
}

TEST_CASE("FNET roundtrips bit-exactly and rejects corruption") {
    SppConfig scfg;
    scfg.levels = {1, 2};
    NetShape shape = make_net_shape(scfg, 4, 6, 10, 8, 12);
    NetParams params = NetParams::init(shape, 5);
    params.quantize_to_f32();

    std::vector<uint8_t> bytes = encode_fnet(params);
    CHECK(bytes.size() == 36 + params.values.size() * 4);
    NetParams back = decode_fnet(bytes);
    CHECK(back == params);
    CHECK(encode_fnet(back) == bytes);

    // quantization is idempotent
    NetParams twice = back;
    twice.quantize_to_f32();
    CHECK(twice == back);

    fs::path path = fs::temp_directory_path() / "net_roundtrip.fnet";
    write_fnet(params, path);
    CHECK(read_fnet(path) == params);
    fs::remove(path);

    auto mutate = [&](size_t offset, std::vector<uint8_t> repl) {
        std::vector<uint8_t> b = bytes;
        std::copy(repl.begin(), repl.end(), b.begin() + offset);
        return b;
    };
    auto kind_of = [](const std::vector<uint8_t>& b) {
        return thrown_kind([&] { decode_fnet(b); });
    };
    CHECK(kind_of(mutate(0, {'Y'})) == Err::BadMagic);
    CHECK(kind_of(mutate(4, {2, 0})) == Err::VersionUnsupported);
    CHECK(kind_of(mutate(6, {1, 0})) == Err::Malformed);         // reserved
    CHECK(kind_of(mutate(8, {5, 0, 0, 0})) == Err::Malformed);   // n_sizes
    CHECK(kind_of(mutate(12, {0, 0, 0, 0})) == Err::Malformed);  // zero layer
    CHECK(kind_of(mutate(12, {0xFF, 0xFF, 0xFF, 0xFF})) == Err::Truncated);

    std::vector<uint8_t> short_file(bytes.begin(), bytes.end() - 1);
    CHECK(kind_of(short_file) == Err::Truncated);
    std::vector<uint8_t> trailing = bytes;
    trailing.push_back(0);
    CHECK(kind_of(trailing) == Err::Malformed);

    const uint32_t nan_bits = 0x7FC00000u;
    std::vector<uint8_t> nan_repl(4);
    std::memcpy(nan_repl.data(), &nan_bits, 4);
    CHECK(kind_of(mutate(36, nan_repl)) == Err::NonFinite);

    NetParams poisoned = params;
    poisoned.values[0] = std::nan("");
    CHECK(thrown_kind([&] { encode_fnet(poisoned); }) == Err::NonFinite);
    NetParams stubby = params;
    stubby.values.pop_back();
    CHECK(thrown_kind([&] { encode_fnet(stubby); }) == Err::ShapeMismatch);

    SplitMix64 rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<uint8_t> fuzz;
        if (trial % 2 == 0) {
            fuzz.resize(rng.next_index(120));
            for (auto& b : fuzz) b = static_cast<uint8_t>(rng.next());
            if (trial % 4 == 0 && fuzz.size() >= 4) std::memcpy(fuzz.data(), "FNET", 4);
        } else {
            fuzz = bytes;
            fuzz[rng.next_index(fuzz.size())] ^= uint8_t(1u << rng.next_index(8));
        }
        try {
            decode_fnet(fuzz);
        } catch (const Error&) {
        }
    }
}

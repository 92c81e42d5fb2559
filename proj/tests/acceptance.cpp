// Acceptance gate: one line per criterion, nonzero exit when any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "featuredex/datagen.hpp"
#include "featuredex/errors.hpp"
#include "featuredex/io_util.hpp"
#include "featuredex/net.hpp"
#include "featuredex/pipeline.hpp"
#include "featuredex/pooling.hpp"
#include "featuredex/retrieval.hpp"
#include "featuredex/rng.hpp"
#include "featuredex/sha256.hpp"
#include "featuredex/stl.hpp"

using namespace featuredex;
namespace fs = std::filesystem;

namespace {

char detail_buf[512];

void notef(const char* fmt, ...) {
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(detail_buf, sizeof detail_buf, fmt, args);
    va_end(args);
}

TriangleMesh random_mesh(SplitMix64& rng) {
    TriangleMesh mesh;
    size_t n = 1 + rng.next_index(50);
    for (size_t t = 0; t < n; ++t) {
        Triangle tri;
        for (Vec3* v : {&tri.v0, &tri.v1, &tri.v2}) {
            v->x = static_cast<float>(rng.uniform(0, 10));
            v->y = static_cast<float>(rng.uniform(0, 10));
            v->z = static_cast<float>(rng.uniform(0, 10));
        }
        tri.normal = tri.winding_normal();
        mesh.triangles.push_back(tri);
        mesh.attributes.push_back(0);
    }
    return mesh;
}

FeatureMatrix random_fmat(SplitMix64& rng) {
    FeatureMatrix fm;
    fm.rows = 1 + static_cast<uint32_t>(rng.next_index(40));
    fm.cols = 1 + static_cast<uint32_t>(rng.next_index(40));
    for (uint32_t i = 0; i < fm.rows * 3; ++i)
        fm.positions.push_back(static_cast<float>(rng.uniform(-10, 10)));
    for (uint32_t i = 0; i < fm.rows * fm.cols; ++i)
        fm.values.push_back(static_cast<float>(rng.uniform(-100, 100)));
    return fm;
}

RetrievalIndex random_fidx(SplitMix64& rng) {
    std::vector<IndexEntry> entries;
    size_t n = 1 + rng.next_index(20);
    uint32_t dim = 1 + static_cast<uint32_t>(rng.next_index(16));
    for (size_t i = 0; i < n; ++i) {
        IndexEntry e;
        e.id = static_cast<uint32_t>(i);
        e.family = static_cast<uint16_t>(rng.next_index(9));
        for (uint32_t d = 0; d < dim; ++d)
            e.embedding.push_back(static_cast<float>(rng.uniform(-5, 5)));
        entries.push_back(std::move(e));
    }
    Digest256 prov{};
    for (auto& b : prov) b = static_cast<uint8_t>(rng.next());
    return build_index(std::move(entries), rng.next_index(2) ? IndexMode::Learned
                                                             : IndexMode::Raw, prov);
}

NetParams random_fnet(SplitMix64& rng) {
    SppConfig scfg;
    scfg.levels = {1, 2};
    NetShape shape = make_net_shape(
        scfg, 2 + static_cast<uint32_t>(rng.next_index(4)),
        2 + static_cast<uint32_t>(rng.next_index(5)),
        2 + static_cast<uint32_t>(rng.next_index(5)),
        2 + static_cast<uint32_t>(rng.next_index(4)),
        2 + static_cast<uint32_t>(rng.next_index(5)));
    NetParams params = NetParams::init(shape, rng.next());
    params.quantize_to_f32();
    return params;
}

PointCloud random_cloud(SplitMix64& rng, size_t n) {
    PointCloud cloud;
    for (size_t i = 0; i < n; ++i)
        cloud.points.push_back(
            {rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0, 10)});
    return cloud;
}

TrainSample random_sample(SplitMix64& rng, uint16_t family, uint32_t n_points,
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

double signed_volume(const TriangleMesh& mesh) {
    double vol = 0;
    for (const Triangle& t : mesh.triangles) vol += t.v0.dot(t.v1.cross(t.v2));
    return vol / 6.0;
}

// true when every undirected edge borders exactly two triangles with
// opposite directions
bool closed_manifold(const TriangleMesh& mesh, double lattice) {
    auto key = [&](const Vec3& v) -> uint64_t {
        auto q = [&](double c) { return static_cast<uint64_t>(llround(c / lattice)) & 0x1FFFFF; };
        return (q(v.x) << 42) | (q(v.y) << 21) | q(v.z);
    };
    std::map<std::pair<uint64_t, uint64_t>, std::pair<int, int>> edges;
    for (const Triangle& t : mesh.triangles) {
        uint64_t k[3] = {key(t.v0), key(t.v1), key(t.v2)};
        for (int e = 0; e < 3; ++e) {
            uint64_t a = k[e], b = k[(e + 1) % 3];
            if (a == b) return false;
            auto& slot = edges[{std::min(a, b), std::max(a, b)}];
            (a < b ? slot.first : slot.second) += 1;
        }
    }
    for (const auto& [k, counts] : edges)
        if (counts.first != 1 || counts.second != 1) return false;
    return true;
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// ---- criteria ----

bool criterion_formats() {
    SplitMix64 rng(0xACC0);

    std::vector<uint8_t> valid_stl, valid_fmat, valid_fidx, valid_fnet;
    for (int t = 0; t < 100; ++t) {
        TriangleMesh mesh = random_mesh(rng);
        std::vector<uint8_t> b1 = write_stl(mesh, StlFormat::Binary);
        TriangleMesh back = parse_stl(b1);
        if (back.triangles.size() != mesh.triangles.size()) {
            notef("STL parse lost triangles");
            return false;
        }
        std::vector<uint8_t> b2 = write_stl(back, StlFormat::Binary);
        if (b1 != b2) {
            notef("STL roundtrip not bit-exact at instance %d", t);
            return false;
        }
        valid_stl = std::move(b1);
    }
    for (int t = 0; t < 100; ++t) {
        FeatureMatrix fm = random_fmat(rng);
        std::vector<uint8_t> b1 = encode_fmat(fm);
        FeatureMatrix back = decode_fmat(b1);
        if (!(back == fm) || encode_fmat(back) != b1) {
            notef("FMAT roundtrip not bit-exact at instance %d", t);
            return false;
        }
        valid_fmat = std::move(b1);
    }
    for (int t = 0; t < 100; ++t) {
        RetrievalIndex idx = random_fidx(rng);
        std::vector<uint8_t> b1 = encode_fidx(idx);
        RetrievalIndex back = decode_fidx(b1);
        if (!(back == idx) || encode_fidx(back) != b1) {
            notef("FIDX roundtrip not bit-exact at instance %d", t);
            return false;
        }
        valid_fidx = std::move(b1);
    }
    for (int t = 0; t < 100; ++t) {
        NetParams params = random_fnet(rng);
        std::vector<uint8_t> b1 = encode_fnet(params);
        NetParams back = decode_fnet(b1);
        if (!(back == params) || encode_fnet(back) != b1) {
            notef("FNET roundtrip not bit-exact at instance %d", t);
            return false;
        }
        valid_fnet = std::move(b1);
    }

    struct Decoder {
        const char* name;
        void (*decode)(std::span<const uint8_t>);
        const std::vector<uint8_t>* valid;
        const char* magic;
    };
    const Decoder decoders[4] = {
        {"STL", [](std::span<const uint8_t> b) { parse_stl(b); }, &valid_stl, "soli"},
        {"FMAT", [](std::span<const uint8_t> b) { decode_fmat(b); }, &valid_fmat, "FMAT"},
        {"FIDX", [](std::span<const uint8_t> b) { decode_fidx(b); }, &valid_fidx, "FIDX"},
        {"FNET", [](std::span<const uint8_t> b) { decode_fnet(b); }, &valid_fnet, "FNET"},
    };
    for (const Decoder& d : decoders) {
        for (int t = 0; t < 300; ++t) {
            std::vector<uint8_t> bytes;
            if (t % 2 == 0 || d.valid->empty()) {
                bytes.resize(rng.next_index(300));
                for (auto& b : bytes) b = static_cast<uint8_t>(rng.next());
                if (t % 4 == 0 && bytes.size() >= 4) std::memcpy(bytes.data(), d.magic, 4);
            } else {
                bytes = *d.valid;
                size_t flips = 1 + rng.next_index(8);
                for (size_t f = 0; f < flips && !bytes.empty(); ++f)
                    bytes[rng.next_index(bytes.size())] ^= uint8_t(1u << rng.next_index(8));
            }
            try {
                d.decode(bytes);
            } catch (const Error&) {
                // rejected cleanly
            } catch (...) {
                notef("%s fuzz raised a foreign exception at case %d", d.name, t);
                return false;
            }
        }
    }
    notef("4 formats x 100 roundtrips, 1200 fuzz cases");
    return true;
}

bool criterion_frobenius() {
    auto matrix = [](uint32_t rows, uint32_t cols, std::vector<float> vals) {
        FeatureMatrix fm;
        fm.rows = rows;
        fm.cols = cols;
        fm.positions.assign(size_t(rows) * 3, 0.0f);
        fm.values = std::move(vals);
        return fm;
    };
    auto oracle = [](const FeatureMatrix& fm) {
        long double sum = 0;
        for (float x : fm.values) sum += static_cast<long double>(x) * x;
        return static_cast<double>(sqrtl(sum));
    };

    struct Case {
        FeatureMatrix fm;
        double closed_form;
    };
    const Case cases[3] = {
        {matrix(2, 2, {0, 0, 0, 0}), 0.0},
        {matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}), std::sqrt(3.0)},
        {matrix(2, 2, {1, 2, 3, 4}), std::sqrt(30.0)},
    };
    double worst = 0;
    for (const Case& c : cases) {
        double got = frobenius_norm(c.fm);
        double want = oracle(c.fm);
        if (want == 0.0) {
            if (got != 0.0) {
                notef("norm of the zero matrix is %g", got);
                return false;
            }
            continue;
        }
        double rel = std::abs(got - want) / want;
        double rel_closed = std::abs(got - c.closed_form) / c.closed_form;
        worst = std::max({worst, rel, rel_closed});
    }
    if (worst > 1e-12) {
        notef("worst relative error %.2e exceeds 1e-12", worst);
        return false;
    }
    notef("worst relative error %.1e", worst);
    return true;
}

bool criterion_spp() {
    SppConfig cfg;
    size_t expected = 0;
    for (uint32_t l : cfg.levels) expected += size_t(l) * l * l;
    expected *= 32;
    if (expected != 2336) {
        notef("default config dimension is %zu, not 2336", expected);
        return false;
    }

    SplitMix64 rng(0xACC3);
    for (size_t n : {10, 100, 2048, 5000}) {
        PointCloud cloud = random_cloud(rng, n);
        FeatureMatrix fm;
        fm.rows = static_cast<uint32_t>(n);
        fm.cols = 32;
        for (const Vec3& p : cloud.points) {
            fm.positions.push_back(static_cast<float>(p.x));
            fm.positions.push_back(static_cast<float>(p.y));
            fm.positions.push_back(static_cast<float>(p.z));
        }
        for (size_t i = 0; i < n * 32; ++i)
            fm.values.push_back(static_cast<float>(rng.uniform(-4, 4)));

        Embedding e = spp_pool(cloud, fm, cfg);
        if (e.values.size() != expected) {
            notef("N=%zu produced dimension %zu", n, e.values.size());
            return false;
        }

        std::vector<uint32_t> perm(n);
        for (size_t i = 0; i < n; ++i) perm[i] = static_cast<uint32_t>(i);
        for (size_t i = n; i > 1; --i)
            std::swap(perm[i - 1], perm[rng.next_index(i)]);
        PointCloud shuffled;
        FeatureMatrix sfm;
        sfm.rows = fm.rows;
        sfm.cols = fm.cols;
        for (uint32_t src : perm) {
            shuffled.points.push_back(cloud.points[src]);
            for (int a = 0; a < 3; ++a) sfm.positions.push_back(fm.positions[src * 3u + a]);
            for (uint32_t c = 0; c < 32; ++c) sfm.values.push_back(fm.at(src, c));
        }
        if (!(spp_pool(shuffled, sfm, cfg) == e)) {
            notef("N=%zu embedding changed under permutation", n);
            return false;
        }
    }
    notef("dimension 2336 and permutation-stable for N=10,100,2048,5000");
    return true;
}

bool criterion_gradients() {
    SppConfig scfg;  // full default pyramid
    NetShape shape = make_net_shape(scfg, 8);
    NetParams params = NetParams::init(shape, 0xACC4);

    SplitMix64 rng(0xACC5);
    double worst = 0;
    for (int trial = 0; trial < 5; ++trial) {
        TrainSample s =
            random_sample(rng, static_cast<uint16_t>(trial % 8), 256, 32, 0.2, 3.0);
        // step 1e-6: wide enough to dominate roundoff, narrow enough that the
        // +-eps bracket stays clear of max-pool ownership crossings
        worst = std::max(worst, grad_check(params, s, scfg, 1e-6, 200, 7000 + trial));
    }
    if (worst >= 1e-5) {
        notef("worst relative error %.2e exceeds 1e-5", worst);
        return false;
    }
    notef("5 samples x 200+ parameters, worst relative error %.1e", worst);
    return true;
}

bool criterion_retrieval() {
    SplitMix64 rng(0xACC6);
    const uint32_t dim = 16;
    std::vector<IndexEntry> entries;
    for (uint32_t i = 0; i < 1000; ++i) {
        IndexEntry e;
        e.id = i;
        e.family = static_cast<uint16_t>(i % 8);
        for (uint32_t d = 0; d < dim; ++d)
            e.embedding.push_back(static_cast<float>(rng.uniform(-2, 2)));
        entries.push_back(std::move(e));
    }
    for (uint32_t i = 50; i < 1000; i += 50)
        entries[i].embedding = entries[i - 1].embedding;  // planted exact ties
    RetrievalIndex idx = build_index(entries, IndexMode::Raw, Digest256{});

    for (int trial = 0; trial < 100; ++trial) {
        Embedding q;
        if (trial % 3 == 0) {
            q.values = idx.entries[50 * (1 + trial % 19)].embedding;
        } else {
            for (uint32_t d = 0; d < dim; ++d)
                q.values.push_back(static_cast<float>(rng.uniform(-2, 2)));
        }
        size_t k = 1 + rng.next_index(12);
        std::optional<uint32_t> excl;
        if (trial % 4 == 1) excl = static_cast<uint32_t>(rng.next_index(1000));

        std::vector<QueryHit> got = query(idx, q, k, excl);

        std::vector<std::pair<double, uint32_t>> want;
        for (const IndexEntry& e : idx.entries) {
            if (excl && e.id == *excl) continue;
            double sum = 0;
            for (uint32_t d = 0; d < dim; ++d) {
                double diff = double(q.values[d]) - double(e.embedding[d]);
                sum += diff * diff;
            }
            want.push_back({std::sqrt(sum), e.id});
        }
        std::sort(want.begin(), want.end());
        if (want.size() > k) want.resize(k);

        if (got.size() != want.size()) {
            notef("query %d returned %zu hits, scan found %zu", trial, got.size(),
                  want.size());
            return false;
        }
        for (size_t i = 0; i < want.size(); ++i)
            if (got[i].id != want[i].second || got[i].distance != want[i].first) {
                notef("query %d rank %zu: got id %u dist %.17g, scan id %u dist %.17g",
                      trial, i, got[i].id, got[i].distance, want[i].second,
                      want[i].first);
                return false;
            }
    }
    notef("100 queries over 1000 entries, ties and exclusions included");
    return true;
}

bool criterion_generator() {
    SplitMix64 rng(0xACC7);
    int meshes = 0;
    for (const FamilyDef& fam : family_catalog()) {
        for (int draw = 0; draw < 3; ++draw) {
            FeatureParams params = fam.sample(rng);
            OccupancyGrid grid = occupancy_grid(fam, params, 64);
            TriangleMesh mesh = extract_surface(grid);
            if (!closed_manifold(mesh, grid.cell_size())) {
                notef("%s draw %d is not watertight", fam.name.c_str(), draw);
                return false;
            }
            double vol = signed_volume(mesh);
            double cells = double(grid.occupied_count()) *
                           grid.cell_size() * grid.cell_size() * grid.cell_size();
            if (std::abs(vol - cells) > 1e-6 * cells) {
                notef("%s draw %d: mesh volume %.6f vs cells %.6f", fam.name.c_str(),
                      draw, vol, cells);
                return false;
            }
            ++meshes;
        }
    }

    const FamilyDef& hole = family_catalog()[family_catalog_index("through_hole")];
    FeatureParams hp;
    hp.radius = 2.0;
    hp.depth = 10.0;
    hp.offset_x = 5.0;
    hp.offset_y = 5.0;
    TriangleMesh hole_mesh = extract_surface(occupancy_grid(hole, hp, 64));
    double removed = 1000.0 - signed_volume(hole_mesh);
    double analytic = 3.14159265358979323846 * hp.radius * hp.radius * 10.0;
    double vol_err = std::abs(removed - analytic) / analytic;
    if (vol_err > 0.03) {
        notef("through-hole removed volume off by %.2f%%", 100 * vol_err);
        return false;
    }

    size_t tr = 0, va = 0, te = 0;
    split_sizes(400, tr, va, te);
    bool splits_ok = tr == 280 && va == 60 && te == 60;
    split_sizes(50, tr, va, te);
    splits_ok = splits_ok && tr == 35 && va == 8 && te == 7;

    fs::path dir = fresh_dir("fdx_accept_gen");
    DatasetConfig dc;
    dc.out_dir = dir;
    dc.families = {"through_hole"};
    dc.per_family = 20;
    dc.resolution = 16;
    dc.seed = 2;
    std::vector<ModelRecord> records = generate_dataset(dc);
    size_t gtr = 0, gva = 0, gte = 0;
    for (const ModelRecord& r : records) {
        if (r.split == "train") ++gtr;
        else if (r.split == "val") ++gva;
        else ++gte;
    }
    split_sizes(20, tr, va, te);
    splits_ok = splits_ok && gtr == tr && gva == va && gte == te;
    fs::remove_all(dir);
    if (!splits_ok) {
        notef("split sizes deviate from 70/15/15 rounding");
        return false;
    }

    notef("%d meshes watertight, hole volume err %.2f%%, splits 280/60/60", meshes,
          100 * vol_err);
    return true;
}

bool criterion_end_to_end(double* out_seconds) {
    fs::path dir = fresh_dir("fdx_accept_run");
    PipelineConfig cfg;
    cfg.out_dir = dir;
    cfg.families = {"through_hole",       "o_ring",
                    "circular_end_blind_slot", "rectangular_passage",
                    "rectangular_blind_step",  "triangular_passage",
                    "triangular_pocket",  "six_sides_passage"};
    cfg.per_family = 50;
    cfg.resolution = 64;
    cfg.seed = 42;
    cfg.points = 2048;
    cfg.epochs = 30;
    cfg.radius = 1.2;
    cfg.hidden2 = 64;
    cfg.learning_rate = 2e-3;

    auto t0 = std::chrono::steady_clock::now();
    PipelineReport report = run_pipeline(cfg);
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (out_seconds) *out_seconds = secs;
    fs::remove_all(dir);

    double first_ce = report.history.epochs.front().train_loss;
    double final_ce = report.history.epochs.back().train_loss;
    if (!(final_ce <= 0.5 * first_ce)) {
        notef("final CE %.4f is not half of epoch-1 CE %.4f", final_ce, first_ce);
        return false;
    }
    if (!(report.learned.top1_accuracy > report.baseline.top1_accuracy)) {
        notef("learned top-1 %.3f does not beat baseline %.3f",
              report.learned.top1_accuracy, report.baseline.top1_accuracy);
        return false;
    }
    if (report.learned.topk_accuracy < report.learned.top1_accuracy ||
        report.baseline.topk_accuracy < report.baseline.top1_accuracy) {
        notef("top-5 below top-1 for a method");
        return false;
    }

    int slot_id = -1;
    for (size_t i = 0; i < cfg.families.size(); ++i)
        if (cfg.families[i] == "circular_end_blind_slot") slot_id = static_cast<int>(i);
    const FamilyConfusion* slot = nullptr;
    for (const FamilyConfusion& fc : report.learned.families)
        if (fc.family == slot_id) slot = &fc;
    if (!slot || slot->queries == 0) {
        notef("no circular_end_blind_slot test queries");
        return false;
    }
    double nn_rate = double(slot->top1_hits) / double(slot->queries);
    if (nn_rate < 0.60) {
        notef("circular_end_blind_slot same-family NN rate %.0f%% (%u/%u)",
              100 * nn_rate, slot->top1_hits, slot->queries);
        return false;
    }
    if (secs >= 600.0) {
        notef("run took %.0f s, budget is 600 s", secs);
        return false;
    }

    notef("CE %.3f->%.3f, top-1 learned %.3f > baseline %.3f, top-5 %.3f/%.3f, "
          "slot NN %u/%u",
          first_ce, final_ce, report.learned.top1_accuracy,
          report.baseline.top1_accuracy, report.learned.topk_accuracy,
          report.baseline.topk_accuracy, slot->top1_hits, slot->queries);
    return true;
}

bool criterion_determinism() {
    PipelineConfig cfg;
    cfg.families = {"through_hole", "circular_end_pocket", "triangular_pocket"};
    cfg.per_family = 8;
    cfg.resolution = 32;
    cfg.seed = 123;
    cfg.points = 512;
    cfg.epochs = 3;
    cfg.batch = 8;
    cfg.levels = {1, 2};
    cfg.hidden1 = 16;
    cfg.hidden2 = 8;
    cfg.classifier = 16;

    fs::path dir_a = fresh_dir("fdx_accept_det_a");
    fs::path dir_b = fresh_dir("fdx_accept_det_b");
    cfg.out_dir = dir_a;
    PipelineReport ra = run_pipeline(cfg);
    cfg.out_dir = dir_b;
    PipelineReport rb = run_pipeline(cfg);

    bool ok = ra.report_json == rb.report_json;
    std::string digests;
    for (const char* name : {"index_raw.fidx", "index_learned.fidx"}) {
        Digest256 da = sha256(read_file(dir_a / name));
        Digest256 db = sha256(read_file(dir_b / name));
        ok = ok && da == db;
        if (!digests.empty()) digests += " ";
        digests += digest_hex(da).substr(0, 12);
    }
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    if (!ok) {
        notef("reports or index digests differ between identical runs");
        return false;
    }
    notef("reports identical, FIDX digests %s", digests.c_str());
    return true;
}

template <typename Fn>
void run_criterion(int id, const char* label, Fn&& fn, int& failures) {
    detail_buf[0] = '\0';
    auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    try {
        ok = fn();
    } catch (const std::exception& e) {
        notef("unexpected exception: %s", e.what());
    } catch (...) {
        notef("unexpected non-standard exception");
    }
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %d: %s (%s%s%.1f s)\n", ok ? "PASS" : "FAIL", id, label,
                detail_buf, detail_buf[0] ? ", " : "", secs);
    std::fflush(stdout);
    if (!ok) ++failures;
}

}  // namespace

int main() {
    int failures = 0;
    run_criterion(1, "serialization formats roundtrip bit-exactly and survive fuzzing",
                  criterion_formats, failures);
    run_criterion(2, "Frobenius norm unit suite matches the summation oracle",
                  criterion_frobenius, failures);
    run_criterion(3, "pyramid pooling emits a fixed 2336-dim permutation-stable vector",
                  criterion_spp, failures);
    run_criterion(4, "analytic gradients match central differences below 1e-5",
                  criterion_gradients, failures);
    run_criterion(5, "top-k queries equal an exhaustive linear scan",
                  criterion_retrieval, failures);
    run_criterion(6, "generated meshes are watertight with exact volumes and splits",
                  criterion_generator, failures);
    run_criterion(7, "desk-scale end-to-end run hits the training and retrieval marks",
                  [] { return criterion_end_to_end(nullptr); }, failures);
    run_criterion(8, "identical seeds reproduce reports and index digests",
                  criterion_determinism, failures);

    std::printf("%d/8 criteria passed\n", 8 - failures);
    return failures == 0 ? 0 : 1;
}

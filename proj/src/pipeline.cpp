#include "featuredex/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "json.hpp"

#include "featuredex/errors.hpp"
#include "featuredex/io_util.hpp"
#include "featuredex/stl.hpp"

namespace featuredex {

namespace {

using nlohmann::json;

// stream tags for per-purpose RNG derivation
constexpr uint64_t kSampleStream = 0x53414D50;  // "SAMP"

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_config(int line, const std::string& why) {
    throw Error(Err::Malformed, "config line " + std::to_string(line) + ": " + why);
}

double parse_f64(const std::string& v, int line) {
    const char* begin = v.c_str();
    char* end = nullptr;
    double x = std::strtod(begin, &end);
    if (end != begin + v.size() || v.empty()) bad_config(line, "bad number '" + v + "'");
    if (!std::isfinite(x)) bad_config(line, "number must be finite");
    return x;
}

uint64_t parse_u64(const std::string& v, int line) {
    const char* begin = v.c_str();
    char* end = nullptr;
    unsigned long long x = std::strtoull(begin, &end, 10);
    if (end != begin + v.size() || v.empty() || v[0] == '-')
        bad_config(line, "bad unsigned integer '" + v + "'");
    return x;
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (pos <= v.size()) {
        size_t comma = v.find(',', pos);
        if (comma == std::string::npos) comma = v.size();
        std::string item = trim(v.substr(pos, comma - pos));
        if (!item.empty()) out.push_back(item);
        pos = comma + 1;
    }
    return out;
}

std::filesystem::path fmat_path(const PipelineConfig& cfg, uint32_t id) {
    char name[64];
    std::snprintf(name, sizeof name, "model_%06u.fmat", id);
    return cfg.out_dir / "fmat" / name;
}

std::string fmt_g17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

json eval_to_json(const EvalReport& report, const std::vector<std::string>& names) {
    json families = json::array();
    for (const FamilyConfusion& fc : report.families) {
        json foreign = json::array();
        for (const auto& [fam, count] : fc.top_foreign)
            foreign.push_back({{"family", names.at(fam)}, {"count", count}});
        families.push_back({{"family", names.at(fc.family)},
                            {"queries", fc.queries},
                            {"top1_hits", fc.top1_hits},
                            {"topk_hits", fc.topk_hits},
                            {"most_confused", foreign}});
    }
    return json{{"top1", report.top1_accuracy},
                {"topk", report.topk_accuracy},
                {"queries", report.query_count},
                {"families", families}};
}

}  // namespace

std::vector<std::string> PipelineConfig::resolved_families() const {
    if (!families.empty()) return families;
    std::vector<std::string> all;
    for (const FamilyDef& f : family_catalog()) all.push_back(f.name);
    return all;
}

PipelineConfig parse_pipeline_config(const std::string& text) {
    PipelineConfig cfg;
    size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;

        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        size_t eq = line.find('=');
        if (eq == std::string::npos) bad_config(line_no, "expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));

        if (key == "out_dir") cfg.out_dir = value;
        else if (key == "families") cfg.families = split_list(value);
        else if (key == "per_family") cfg.per_family = static_cast<int>(parse_u64(value, line_no));
        else if (key == "resolution") cfg.resolution = static_cast<int>(parse_u64(value, line_no));
        else if (key == "seed") cfg.seed = parse_u64(value, line_no);
        else if (key == "points") cfg.points = parse_u64(value, line_no);
        else if (key == "voxel") cfg.voxel = parse_f64(value, line_no);
        else if (key == "radius") cfg.radius = parse_f64(value, line_no);
        else if (key == "levels") {
            cfg.levels.clear();
            for (const std::string& item : split_list(value))
                cfg.levels.push_back(static_cast<uint32_t>(parse_u64(item, line_no)));
            if (cfg.levels.empty()) bad_config(line_no, "levels list is empty");
        } else if (key == "domain") {
            if (value == "canonical") cfg.domain = SppDomain::CanonicalCube;
            else if (value == "bbox") cfg.domain = SppDomain::BoundingBox;
            else bad_config(line_no, "domain must be 'canonical' or 'bbox'");
        } else if (key == "empty_fill") cfg.empty_fill = static_cast<float>(parse_f64(value, line_no));
        else if (key == "epochs") cfg.epochs = static_cast<uint32_t>(parse_u64(value, line_no));
        else if (key == "lr" || key == "learning_rate") cfg.learning_rate = parse_f64(value, line_no);
        else if (key == "batch") cfg.batch = static_cast<uint32_t>(parse_u64(value, line_no));
        else if (key == "hidden1") cfg.hidden1 = static_cast<uint32_t>(parse_u64(value, line_no));
        else if (key == "hidden2") cfg.hidden2 = static_cast<uint32_t>(parse_u64(value, line_no));
        else if (key == "classifier") cfg.classifier = static_cast<uint32_t>(parse_u64(value, line_no));
        else if (key == "k") cfg.k = static_cast<uint32_t>(parse_u64(value, line_no));
        else bad_config(line_no, "unknown key '" + key + "'");
    }
    return cfg;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    std::vector<uint8_t> bytes = read_file(path);
    return parse_pipeline_config(std::string(bytes.begin(), bytes.end()));
}

SppConfig spp_config(const PipelineConfig& cfg) {
    SppConfig scfg;
    scfg.levels = cfg.levels;
    scfg.domain = cfg.domain;
    scfg.empty_fill = cfg.empty_fill;
    return scfg;
}

DescriptorConfig descriptor_config(const PipelineConfig& cfg) { return {cfg.radius}; }

std::string provenance_text(const PipelineConfig& cfg, IndexMode mode,
                            const Digest256* net_digest) {
    std::string out = "featuredex-embedding-v1\n";
    out += "radius=" + fmt_g17(cfg.radius) + "\n";
    out += "dims=" + std::to_string(kDescriptorDims) + "\n";
    out += "points=" + std::to_string(cfg.points) + "\n";
    out += "voxel=" + fmt_g17(cfg.voxel) + "\n";
    out += "levels=";
    for (size_t i = 0; i < cfg.levels.size(); ++i)
        out += (i ? "," : "") + std::to_string(cfg.levels[i]);
    out += "\n";
    out += std::string("domain=") +
           (cfg.domain == SppDomain::CanonicalCube ? "canonical" : "bbox") + "\n";
    out += "empty_fill=" + fmt_g17(cfg.empty_fill) + "\n";
    out += std::string("mode=") + (mode == IndexMode::Raw ? "raw" : "learned") + "\n";
    out += "net=";
    out += mode == IndexMode::Learned && net_digest ? digest_hex(*net_digest) : "none";
    out += "\n";
    return out;
}

Digest256 provenance_digest(const PipelineConfig& cfg, IndexMode mode,
                            const Digest256* net_digest) {
    return sha256(provenance_text(cfg, mode, net_digest));
}

std::vector<std::string> manifest_families(const std::vector<ModelRecord>& records) {
    uint16_t max_id = 0;
    for (const ModelRecord& rec : records) max_id = std::max(max_id, rec.family_id);
    std::vector<std::string> names(size_t(max_id) + 1);
    for (const ModelRecord& rec : records) {
        std::string& slot = names[rec.family_id];
        if (slot.empty()) slot = rec.family;
        else if (slot != rec.family)
            throw Error(Err::Malformed, "family id " + std::to_string(rec.family_id) +
                                            " maps to both '" + slot + "' and '" +
                                            rec.family + "'");
    }
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i].empty())
            throw Error(Err::Malformed,
                        "family id " + std::to_string(i) + " missing from manifest");
    return names;
}

FeatureMatrix embed_input_features(const PipelineConfig& cfg,
                                   const std::filesystem::path& input, PointCloud& cloud) {
    constexpr uint64_t kQueryStream = 0x51455259;  // "QERY"
    std::vector<uint8_t> bytes = read_file(input);
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), "FMAT", 4) == 0) {
        FeatureMatrix fm = decode_fmat(bytes);
        cloud = fmat_cloud(fm);
        return fm;
    }
    TriangleMesh mesh = parse_stl(bytes);
    cloud = sample_surface(mesh, cfg.points, SplitMix64::derive(cfg.seed, kQueryStream));
    if (cfg.voxel > 0) cloud = voxel_downsample(cloud, cfg.voxel);
    return compute_descriptors(cloud, descriptor_config(cfg));
}

std::vector<ModelRecord> stage_gen(const PipelineConfig& cfg) {
    DatasetConfig dc;
    dc.out_dir = cfg.out_dir;
    dc.families = cfg.resolved_families();
    dc.per_family = cfg.per_family;
    dc.resolution = cfg.resolution;
    dc.seed = cfg.seed;
    return generate_dataset(dc);
}

void stage_extract(const PipelineConfig& cfg, const std::vector<ModelRecord>& records) {
    for (const ModelRecord& rec : records) {
        TriangleMesh mesh = load_stl(cfg.out_dir / rec.rel_path);
        PointCloud cloud =
            sample_surface(mesh, cfg.points, SplitMix64::derive(rec.seed, kSampleStream));
        if (cfg.voxel > 0) cloud = voxel_downsample(cloud, cfg.voxel);
        FeatureMatrix fm = compute_descriptors(cloud, descriptor_config(cfg));
        write_fmat(fm, fmat_path(cfg, rec.id));
    }
}

std::vector<TrainSample> load_samples(const PipelineConfig& cfg,
                                      const std::vector<ModelRecord>& records) {
    std::vector<TrainSample> samples;
    samples.reserve(records.size());
    for (const ModelRecord& rec : records) {
        TrainSample s;
        s.id = rec.id;
        s.family = rec.family_id;
        s.fm = read_fmat(fmat_path(cfg, rec.id), &s.cloud);
        if (!samples.empty() && s.fm.cols != samples.front().fm.cols)
            throw Error(Err::DimensionMismatch,
                        "feature width differs across models: " +
                            std::to_string(s.fm.cols) + " vs " +
                            std::to_string(samples.front().fm.cols));
        samples.push_back(std::move(s));
    }
    return samples;
}

TrainedNet stage_train(const PipelineConfig& cfg, const std::vector<TrainSample>& samples,
                       const std::vector<ModelRecord>& records) {
    if (samples.size() != records.size())
        throw Error(Err::MismatchedRows, "sample list does not match manifest");
    std::vector<TrainSample> train_set, val_set;
    for (size_t i = 0; i < records.size(); ++i) {
        if (records[i].split == "train") train_set.push_back(samples[i]);
        else if (records[i].split == "val") val_set.push_back(samples[i]);
    }

    const uint32_t n_families = static_cast<uint32_t>(cfg.resolved_families().size());
    const uint32_t in_width = samples.empty() ? kDescriptorDims : samples.front().fm.cols;
    NetShape shape = make_net_shape(spp_config(cfg), n_families, in_width, cfg.hidden1,
                                    cfg.hidden2, cfg.classifier);

    TrainConfig tcfg;
    tcfg.epochs = cfg.epochs;
    tcfg.learning_rate = cfg.learning_rate;
    tcfg.batch = cfg.batch;
    tcfg.seed = cfg.seed;

    auto [params, history] = train(train_set, val_set, shape, tcfg, spp_config(cfg));
    write_fnet(params, cfg.out_dir / "net.fnet");
    return {std::move(params), std::move(history)};
}

Embedding embed_sample(const PipelineConfig& cfg, const TrainSample& sample, IndexMode mode,
                       const NetParams* net) {
    if (mode == IndexMode::Raw) return spp_pool(sample.cloud, sample.fm, spp_config(cfg));
    if (!net) throw Error(Err::InvalidParams, "learned embeddings need network parameters");
    return forward(*net, sample.cloud, sample.fm, spp_config(cfg)).embedding;
}

RetrievalIndex stage_index(const PipelineConfig& cfg,
                           const std::vector<TrainSample>& samples,
                           const std::vector<ModelRecord>& records, IndexMode mode,
                           const NetParams* net) {
    if (samples.size() != records.size())
        throw Error(Err::MismatchedRows, "sample list does not match manifest");

    Digest256 net_digest{};
    if (mode == IndexMode::Learned) {
        if (!net) throw Error(Err::InvalidParams, "learned index needs network parameters");
        net_digest = sha256(encode_fnet(*net));
    }
    Digest256 provenance =
        provenance_digest(cfg, mode, mode == IndexMode::Learned ? &net_digest : nullptr);

    std::vector<IndexEntry> entries;
    entries.reserve(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        Embedding emb = embed_sample(cfg, samples[i], mode, net);
        entries.push_back(
            {records[i].id, records[i].family_id, std::move(emb.values)});
    }
    RetrievalIndex index = build_index(std::move(entries), mode, provenance);
    write_fidx(index, cfg.out_dir / (mode == IndexMode::Raw ? "index_raw.fidx"
                                                            : "index_learned.fidx"));
    return index;
}

std::string render_report(const PipelineConfig& cfg, const PipelineReport& report) {
    const std::vector<std::string> names = cfg.resolved_families();

    json config;
    config["families"] = names;
    config["per_family"] = cfg.per_family;
    config["resolution"] = cfg.resolution;
    config["seed"] = cfg.seed;
    config["points"] = cfg.points;
    config["voxel"] = cfg.voxel;
    config["radius"] = cfg.radius;
    config["levels"] = cfg.levels;
    config["domain"] = cfg.domain == SppDomain::CanonicalCube ? "canonical" : "bbox";
    config["empty_fill"] = cfg.empty_fill;
    config["epochs"] = cfg.epochs;
    config["learning_rate"] = cfg.learning_rate;
    config["batch"] = cfg.batch;
    config["hidden1"] = cfg.hidden1;
    config["hidden2"] = cfg.hidden2;
    config["classifier"] = cfg.classifier;
    config["k"] = cfg.k;

    json splits = {{"train", 0}, {"val", 0}, {"test", 0}};
    for (const ModelRecord& rec : report.records)
        splits[rec.split] = splits[rec.split].get<int>() + 1;

    json history = json::array();
    for (const EpochStats& e : report.history.epochs)
        history.push_back({{"train_loss", e.train_loss},
                           {"train_accuracy", e.train_accuracy},
                           {"val_loss", e.val_loss},
                           {"val_accuracy", e.val_accuracy}});

    json j;
    j["meta"] = {{"tool", "featuredex"}, {"report_format", 1}};
    j["config"] = config;
    j["dataset"] = {{"models", report.records.size()}, {"splits", splits}};
    j["training"] = {{"parameters", report.parameter_count},
                     {"best_epoch", report.history.best_epoch + 1},
                     {"history", history}};
    j["retrieval"] = {{"k", cfg.k},
                      {"baseline", eval_to_json(report.baseline, names)},
                      {"raw", eval_to_json(report.raw, names)},
                      {"learned", eval_to_json(report.learned, names)}};
    return j.dump(2) + "\n";
}

std::string render_eval_json(uint32_t k, const std::vector<std::string>& family_names,
                             const EvalReport* baseline, const EvalReport* raw,
                             const EvalReport* learned) {
    json j;
    j["meta"] = {{"tool", "featuredex"}, {"report_format", 1}};
    json retrieval;
    retrieval["k"] = k;
    if (baseline) retrieval["baseline"] = eval_to_json(*baseline, family_names);
    if (raw) retrieval["raw"] = eval_to_json(*raw, family_names);
    if (learned) retrieval["learned"] = eval_to_json(*learned, family_names);
    j["retrieval"] = retrieval;
    return j.dump(2) + "\n";
}

PipelineReport run_pipeline(const PipelineConfig& cfg) {
    PipelineReport report;
    report.records = stage_gen(cfg);
    stage_extract(cfg, report.records);
    std::vector<TrainSample> samples = load_samples(cfg, report.records);

    TrainedNet net = stage_train(cfg, samples, report.records);
    report.history = net.history;
    report.parameter_count = net.params.values.size();

    RetrievalIndex raw_index = stage_index(cfg, samples, report.records, IndexMode::Raw, nullptr);
    RetrievalIndex learned_index =
        stage_index(cfg, samples, report.records, IndexMode::Learned, &net.params);

    auto entry_for = [](const RetrievalIndex& index, uint32_t id) -> const IndexEntry& {
        const IndexEntry* e = find_entry(index, id);
        if (!e) throw Error(Err::DimensionMismatch, "id " + std::to_string(id) + " not indexed");
        return *e;
    };

    std::vector<IndexEntry> raw_test, learned_test;
    std::vector<NormEntry> norms, test_norms;
    for (size_t i = 0; i < samples.size(); ++i) {
        const ModelRecord& rec = report.records[i];
        norms.push_back({rec.id, rec.family_id, frobenius_norm(samples[i].fm)});
        if (rec.split != "test") continue;
        raw_test.push_back(entry_for(raw_index, rec.id));
        learned_test.push_back(entry_for(learned_index, rec.id));
        test_norms.push_back(norms.back());
    }

    report.baseline = evaluate_baseline(norms, test_norms, cfg.k);
    report.raw = evaluate(raw_index, raw_test, cfg.k);
    report.learned = evaluate(learned_index, learned_test, cfg.k);

    report.report_json = render_report(cfg, report);
    write_file_atomic(cfg.out_dir / "report.json", report.report_json);
    return report;
}

}  // namespace featuredex

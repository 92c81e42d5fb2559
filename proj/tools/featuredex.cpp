#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "featuredex/errors.hpp"
#include "featuredex/io_util.hpp"
#include "featuredex/pipeline.hpp"

namespace fx = featuredex;
namespace fs = std::filesystem;

namespace {

// flag values that need conversion after parsing
struct RawOptions {
    std::string families;
    std::string levels = "1,2,4";
    std::string domain = "canonical";
};

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (pos <= s.size()) {
        size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        std::string item = s.substr(pos, comma - pos);
        if (!item.empty()) out.push_back(item);
        pos = comma + 1;
    }
    return out;
}

void finalize(fx::PipelineConfig& cfg, const RawOptions& raw) {
    if (!raw.families.empty()) cfg.families = split_commas(raw.families);
    cfg.levels.clear();
    for (const std::string& item : split_commas(raw.levels)) {
        char* end = nullptr;
        unsigned long v = std::strtoul(item.c_str(), &end, 10);
        if (end != item.c_str() + item.size() || v == 0)
            throw fx::Error(fx::Err::InvalidParams, "bad pyramid level '" + item + "'");
        cfg.levels.push_back(static_cast<uint32_t>(v));
    }
    if (cfg.levels.empty())
        throw fx::Error(fx::Err::InvalidParams, "levels list is empty");
    if (raw.domain == "canonical") cfg.domain = fx::SppDomain::CanonicalCube;
    else if (raw.domain == "bbox") cfg.domain = fx::SppDomain::BoundingBox;
    else throw fx::Error(fx::Err::InvalidParams, "domain must be 'canonical' or 'bbox'");
}

void add_sampling_options(CLI::App* cmd, fx::PipelineConfig& cfg) {
    cmd->add_option("--points", cfg.points, "surface samples per model")
        ->capture_default_str();
    cmd->add_option("--voxel", cfg.voxel, "voxel downsample size in cm (0 disables)")
        ->capture_default_str();
    cmd->add_option("--radius", cfg.radius, "descriptor neighborhood radius in cm")
        ->capture_default_str();
}

void add_pooling_options(CLI::App* cmd, fx::PipelineConfig& cfg, RawOptions& raw) {
    cmd->add_option("--levels", raw.levels, "pyramid levels, comma separated")
        ->capture_default_str();
    cmd->add_option("--domain", raw.domain, "pooling domain: canonical | bbox")
        ->capture_default_str();
    cmd->add_option("--empty-fill", cfg.empty_fill, "value for empty pooling bins")
        ->capture_default_str();
}

std::vector<fx::ModelRecord> read_run_manifest(const fx::PipelineConfig& cfg) {
    return fx::read_manifest(cfg.out_dir / "manifest.tsv");
}

void print_split_counts(const std::vector<fx::ModelRecord>& records) {
    size_t train = 0, val = 0, test = 0;
    for (const fx::ModelRecord& rec : records) {
        if (rec.split == "train") ++train;
        else if (rec.split == "val") ++val;
        else ++test;
    }
    std::printf("splits: %zu train / %zu val / %zu test\n", train, val, test);
}

void print_eval_table(const char* label, const fx::EvalReport& report) {
    std::printf("%-10s top-1 %6.2f%%   top-%u %6.2f%%   (%zu queries)\n", label,
                100 * report.top1_accuracy, report.k, 100 * report.topk_accuracy,
                report.query_count);
}

void print_confusion(const fx::EvalReport& report, const std::vector<std::string>& names) {
    std::printf("\n%-26s %8s %7s %7s  %s\n", "family", "queries", "top-1", "top-k",
                "most confused with");
    for (const fx::FamilyConfusion& fc : report.families) {
        std::string foreign;
        for (const auto& [fam, count] : fc.top_foreign) {
            if (!foreign.empty()) foreign += ", ";
            foreign += names.at(fam) + "(" + std::to_string(count) + ")";
        }
        if (foreign.empty()) foreign = "-";
        std::printf("%-26s %8u %7u %7u  %s\n", names.at(fc.family).c_str(), fc.queries,
                    fc.top1_hits, fc.topk_hits, foreign.c_str());
    }
}

std::vector<std::string> names_for_index(const fs::path& index_path,
                                         const fx::RetrievalIndex& index) {
    fs::path manifest = index_path.parent_path() / "manifest.tsv";
    std::error_code ec;
    if (fs::exists(manifest, ec)) {
        try {
            return fx::manifest_families(fx::read_manifest(manifest));
        } catch (const fx::Error&) {
            // fall through to numeric labels
        }
    }
    uint16_t max_family = 0;
    for (const fx::IndexEntry& e : index.entries) max_family = std::max(max_family, e.family);
    std::vector<std::string> names;
    for (uint16_t f = 0; f <= max_family; ++f)
        names.push_back("family_" + std::to_string(f));
    return names;
}

int cmd_gen(fx::PipelineConfig& cfg) {
    std::vector<fx::ModelRecord> records = fx::stage_gen(cfg);
    std::printf("generated %zu models across %zu families in %s\n", records.size(),
                cfg.resolved_families().size(), cfg.out_dir.string().c_str());
    print_split_counts(records);
    std::vector<uint8_t> manifest = fx::read_file(cfg.out_dir / "manifest.tsv");
    std::printf("manifest sha256 %s\n", fx::digest_hex(fx::sha256(manifest)).c_str());
    return 0;
}

int cmd_extract(fx::PipelineConfig& cfg) {
    std::vector<fx::ModelRecord> records = read_run_manifest(cfg);
    fx::stage_extract(cfg, records);
    std::printf("extracted features for %zu models (%zu points, radius %g cm) into %s\n",
                records.size(), cfg.points, cfg.radius,
                (cfg.out_dir / "fmat").string().c_str());
    return 0;
}

int cmd_train(fx::PipelineConfig& cfg) {
    std::vector<fx::ModelRecord> records = read_run_manifest(cfg);
    cfg.families = fx::manifest_families(records);
    std::vector<fx::TrainSample> samples = fx::load_samples(cfg, records);
    fx::TrainedNet net = fx::stage_train(cfg, samples, records);

    std::printf("%5s  %10s  %9s  %10s  %9s\n", "epoch", "train loss", "train acc",
                "val loss", "val acc");
    for (size_t e = 0; e < net.history.epochs.size(); ++e) {
        const fx::EpochStats& s = net.history.epochs[e];
        std::printf("%5zu  %10.4f  %8.2f%%  %10.4f  %8.2f%%\n", e + 1, s.train_loss,
                    100 * s.train_accuracy, s.val_loss, 100 * s.val_accuracy);
    }
    std::printf("best epoch %u; saved %s (%zu parameters)\n", net.history.best_epoch + 1,
                (cfg.out_dir / "net.fnet").string().c_str(), net.params.values.size());
    return 0;
}

int cmd_index(fx::PipelineConfig& cfg, const std::string& mode_str) {
    fx::IndexMode mode;
    if (mode_str == "raw") mode = fx::IndexMode::Raw;
    else if (mode_str == "learned") mode = fx::IndexMode::Learned;
    else throw fx::Error(fx::Err::InvalidParams, "mode must be 'raw' or 'learned'");

    std::vector<fx::ModelRecord> records = read_run_manifest(cfg);
    cfg.families = fx::manifest_families(records);
    std::vector<fx::TrainSample> samples = fx::load_samples(cfg, records);

    std::optional<fx::NetParams> net;
    if (mode == fx::IndexMode::Learned) net = fx::read_fnet(cfg.out_dir / "net.fnet");

    fx::RetrievalIndex index =
        fx::stage_index(cfg, samples, records, mode, net ? &*net : nullptr);
    std::printf("indexed %zu embeddings of dimension %u (%s mode) -> %s\n",
                index.entries.size(), index.dimension, mode_str.c_str(),
                (cfg.out_dir /
                 (mode == fx::IndexMode::Raw ? "index_raw.fidx" : "index_learned.fidx"))
                    .string()
                    .c_str());
    std::printf("provenance %s\n", fx::digest_hex(index.provenance).c_str());
    return 0;
}

int cmd_query(fx::PipelineConfig& cfg, const fs::path& index_path, const fs::path& input,
              const std::string& net_flag, size_t k, const std::string& json_path,
              std::optional<uint32_t> exclude_id) {
    fx::RetrievalIndex index = fx::read_fidx(index_path);

    std::optional<fx::NetParams> net;
    fx::Digest256 net_digest{};
    if (index.mode == fx::IndexMode::Learned) {
        fs::path net_path =
            net_flag.empty() ? index_path.parent_path() / "net.fnet" : fs::path(net_flag);
        net = fx::read_fnet(net_path);
        net_digest = fx::sha256(fx::encode_fnet(*net));
    }
    fx::Digest256 expect = fx::provenance_digest(
        cfg, index.mode, index.mode == fx::IndexMode::Learned ? &net_digest : nullptr);
    if (expect != index.provenance)
        throw fx::Error(fx::Err::ConfigMismatch,
                        "index was built under a different embedding configuration "
                        "(check --points/--voxel/--radius/--levels/--domain/--empty-fill"
                        " and the network file)");

    fx::PointCloud cloud;
    fx::FeatureMatrix fm = fx::embed_input_features(cfg, input, cloud);
    fx::Embedding emb = index.mode == fx::IndexMode::Raw
                            ? fx::spp_pool(cloud, fm, fx::spp_config(cfg))
                            : fx::forward(*net, cloud, fm, fx::spp_config(cfg)).embedding;

    std::vector<fx::QueryHit> hits = fx::query(index, emb, k, exclude_id);
    std::vector<std::string> names = names_for_index(index_path, index);

    std::printf("%4s  %8s  %-26s %s\n", "rank", "model", "family", "euclidean distance");
    for (size_t i = 0; i < hits.size(); ++i)
        std::printf("%4zu  %8u  %-26s %.6f\n", i + 1, hits[i].id,
                    names.at(hits[i].family).c_str(), hits[i].distance);

    if (!json_path.empty()) {
        nlohmann::json out;
        out["input"] = input.string();
        out["k"] = k;
        out["mode"] = index.mode == fx::IndexMode::Raw ? "raw" : "learned";
        nlohmann::json list = nlohmann::json::array();
        for (size_t i = 0; i < hits.size(); ++i)
            list.push_back({{"rank", i + 1},
                            {"id", hits[i].id},
                            {"family", names.at(hits[i].family)},
                            {"distance", hits[i].distance}});
        out["hits"] = list;
        fx::write_file_atomic(json_path, out.dump(2) + "\n");
    }
    return 0;
}

int cmd_eval(fx::PipelineConfig& cfg, uint32_t k, std::string json_path) {
    std::vector<fx::ModelRecord> records = read_run_manifest(cfg);
    std::vector<std::string> names = fx::manifest_families(records);
    std::vector<fx::TrainSample> samples = fx::load_samples(cfg, records);

    std::vector<fx::NormEntry> norms, test_norms;
    for (size_t i = 0; i < samples.size(); ++i) {
        norms.push_back({records[i].id, records[i].family_id,
                         fx::frobenius_norm(samples[i].fm)});
        if (records[i].split == "test") test_norms.push_back(norms.back());
    }
    fx::EvalReport baseline = fx::evaluate_baseline(norms, test_norms, k);
    print_eval_table("baseline", baseline);

    std::optional<fx::EvalReport> raw_report, learned_report;
    for (fx::IndexMode mode : {fx::IndexMode::Raw, fx::IndexMode::Learned}) {
        const char* name = mode == fx::IndexMode::Raw ? "index_raw.fidx" : "index_learned.fidx";
        fs::path path = cfg.out_dir / name;
        std::error_code ec;
        if (!fs::exists(path, ec)) continue;
        fx::RetrievalIndex index = fx::read_fidx(path);
        std::vector<fx::IndexEntry> test_set;
        for (const fx::ModelRecord& rec : records) {
            if (rec.split != "test") continue;
            const fx::IndexEntry* e = fx::find_entry(index, rec.id);
            if (!e)
                throw fx::Error(fx::Err::DimensionMismatch,
                                "model " + std::to_string(rec.id) + " missing from " + name);
            test_set.push_back(*e);
        }
        fx::EvalReport report = fx::evaluate(index, test_set, k);
        if (mode == fx::IndexMode::Raw) {
            raw_report = report;
            print_eval_table("raw", report);
        } else {
            learned_report = report;
            print_eval_table("learned", report);
        }
    }
    if (learned_report) print_confusion(*learned_report, names);

    if (json_path.empty()) json_path = (cfg.out_dir / "eval_report.json").string();
    fx::write_file_atomic(json_path,
                          fx::render_eval_json(k, names, &baseline,
                                               raw_report ? &*raw_report : nullptr,
                                               learned_report ? &*learned_report : nullptr));
    std::printf("\nreport written to %s\n", json_path.c_str());
    return 0;
}

int cmd_pipeline(const fs::path& config_path, const std::string& out_override) {
    fx::PipelineConfig cfg = fx::load_pipeline_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (cfg.out_dir.empty())
        throw fx::Error(fx::Err::InvalidParams,
                        "config must set out_dir (or pass --out)");

    fx::PipelineReport report = fx::run_pipeline(cfg);
    std::printf("pipeline finished: %zu models\n", report.records.size());
    print_split_counts(report.records);
    if (!report.history.epochs.empty())
        std::printf("training: %zu epochs, best %u, final train loss %.4f\n",
                    report.history.epochs.size(), report.history.best_epoch + 1,
                    report.history.epochs.back().train_loss);
    print_eval_table("baseline", report.baseline);
    print_eval_table("raw", report.raw);
    print_eval_table("learned", report.learned);
    print_confusion(report.learned, cfg.resolved_families());
    std::printf("\nreport written to %s\n", (cfg.out_dir / "report.json").string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"machining-feature model retrieval: dataset generation, descriptors,"
                 " pooling, training, and nearest-neighbor search"};
    app.require_subcommand(1);

    fx::PipelineConfig cfg;
    RawOptions raw;

    auto* gen = app.add_subcommand("gen", "generate the synthetic dataset");
    gen->add_option("--out", cfg.out_dir, "output directory")->required();
    gen->add_option("--families", raw.families, "comma-separated family names (default: all)");
    gen->add_option("--per-family", cfg.per_family, "models per family")->capture_default_str();
    gen->add_option("--resolution", cfg.resolution, "voxelization resolution")
        ->capture_default_str();
    gen->add_option("--seed", cfg.seed, "dataset seed")->capture_default_str();

    auto* extract = app.add_subcommand("extract", "sample points and compute descriptors");
    extract->add_option("--out", cfg.out_dir, "run directory with manifest.tsv")->required();
    add_sampling_options(extract, cfg);

    auto* train = app.add_subcommand("train", "train the classification head");
    train->add_option("--out", cfg.out_dir, "run directory with extracted features")
        ->required();
    add_pooling_options(train, cfg, raw);
    train->add_option("--epochs", cfg.epochs, "training epochs")->capture_default_str();
    train->add_option("--lr", cfg.learning_rate, "Adam learning rate")->capture_default_str();
    train->add_option("--batch", cfg.batch, "mini-batch size")->capture_default_str();
    train->add_option("--h1", cfg.hidden1, "per-point hidden width")->capture_default_str();
    train->add_option("--h2", cfg.hidden2, "per-point output width")->capture_default_str();
    train->add_option("--classifier", cfg.classifier, "classifier hidden width")
        ->capture_default_str();
    train->add_option("--seed", cfg.seed, "training seed")->capture_default_str();

    std::string mode = "raw";
    auto* index = app.add_subcommand("index", "build and save a retrieval index");
    index->add_option("--out", cfg.out_dir, "run directory")->required();
    index->add_option("--mode", mode, "embedding mode: raw | learned")->capture_default_str();
    add_sampling_options(index, cfg);
    add_pooling_options(index, cfg, raw);

    fs::path index_path, input_path;
    std::string net_flag, json_path;
    size_t k = 5;
    std::optional<uint32_t> exclude_id;
    uint32_t exclude_value = 0;
    auto* query = app.add_subcommand("query", "rank index entries nearest to an input model");
    query->add_option("--index", index_path, "FIDX file")->required();
    query->add_option("--input", input_path, "query model (STL or FMAT)")->required();
    query->add_option("-k,--k", k, "results to return")->capture_default_str();
    query->add_option("--net", net_flag, "FNET file for learned-mode indexes"
                                         " (default: net.fnet beside the index)");
    query->add_option("--json", json_path, "also write the ranking as JSON");
    auto* excl = query->add_option("--exclude-id", exclude_value,
                                   "drop this model id from the candidates");
    query->add_option("--seed", cfg.seed, "sampling seed for STL inputs")
        ->capture_default_str();
    add_sampling_options(query, cfg);
    add_pooling_options(query, cfg, raw);

    uint32_t eval_k = 5;
    auto* eval = app.add_subcommand("eval", "retrieval metrics over the test split");
    eval->add_option("--out", cfg.out_dir, "run directory")->required();
    eval->add_option("-k,--k", eval_k, "retrieval depth")->capture_default_str();
    eval->add_option("--json", json_path, "report path (default: eval_report.json)");

    fs::path config_path;
    std::string out_override;
    auto* pipeline = app.add_subcommand("pipeline", "run every stage from a config file");
    pipeline->add_option("--config", config_path, "flat key=value config file")->required();
    pipeline->add_option("--out", out_override, "override the config's out_dir");

    try {
        app.parse(argc, argv);

        if (gen->parsed() || extract->parsed() || train->parsed() || index->parsed() ||
            query->parsed() || eval->parsed())
            finalize(cfg, raw);
        if (excl->count() > 0) exclude_id = exclude_value;

        if (gen->parsed()) return cmd_gen(cfg);
        if (extract->parsed()) return cmd_extract(cfg);
        if (train->parsed()) return cmd_train(cfg);
        if (index->parsed()) return cmd_index(cfg, mode);
        if (query->parsed())
            return cmd_query(cfg, index_path, input_path, net_flag, k, json_path, exclude_id);
        if (eval->parsed()) return cmd_eval(cfg, eval_k, json_path);
        if (pipeline->parsed()) return cmd_pipeline(config_path, out_override);
        return 1;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "featuredex: %s\n", e.what());
        return 1;
    } catch (const fx::Error& e) {
        std::fprintf(stderr, "featuredex: %s\n", e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "featuredex: %s\n", e.what());
        return 2;
    }
}

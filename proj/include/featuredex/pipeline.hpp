#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "featuredex/datagen.hpp"
#include "featuredex/net.hpp"
#include "featuredex/retrieval.hpp"

namespace featuredex {

/// One run's worth of settings, shared by every subcommand so that
/// provenance digests line up. Parsed from a flat key=value file for
/// full-pipeline runs; individual subcommands set the same fields from
/// flags.
struct PipelineConfig {
    std::filesystem::path out_dir;
    std::vector<std::string> families;  // empty = full catalog
    int per_family = 50;
    int resolution = 64;
    uint64_t seed = 0;

    size_t points = 2048;
    double voxel = 0;  // > 0 enables voxel downsampling of the sampled cloud
    double radius = 0.8;

    std::vector<uint32_t> levels{1, 2, 4};
    SppDomain domain = SppDomain::CanonicalCube;
    float empty_fill = 0.0f;

    uint32_t epochs = 30;
    double learning_rate = 1e-3;
    uint32_t batch = 16;
    uint32_t hidden1 = 64;
    uint32_t hidden2 = 32;
    uint32_t classifier = 64;

    uint32_t k = 5;

    /// The family list with the default expanded to the full catalog.
    std::vector<std::string> resolved_families() const;
};

/// Flat key=value text, one pair per line, '#' comments. Unknown keys and
/// unparseable values throw Error(Malformed); range violations surface
/// later as InvalidParams from the consuming module.
PipelineConfig parse_pipeline_config(const std::string& text);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

SppConfig spp_config(const PipelineConfig& cfg);
DescriptorConfig descriptor_config(const PipelineConfig& cfg);

/// Canonical description of everything that shapes an embedding; its
/// SHA-256 is stored in each index, and queries must reproduce it or be
/// rejected. Learned mode folds in the digest of the serialized network.
std::string provenance_text(const PipelineConfig& cfg, IndexMode mode,
                            const Digest256* net_digest);
Digest256 provenance_digest(const PipelineConfig& cfg, IndexMode mode,
                            const Digest256* net_digest);

/// Family names of a manifest, indexed by family id.
/// Throws Error(Malformed) when ids are not contiguous from 0 or a name
/// is inconsistent.
std::vector<std::string> manifest_families(const std::vector<ModelRecord>& records);

/// Features for a query input: a FMAT file is loaded as-is (external
/// feature import), anything else is parsed as STL and pushed through
/// sampling + descriptors under cfg. Fills the paired cloud.
FeatureMatrix embed_input_features(const PipelineConfig& cfg,
                                   const std::filesystem::path& input, PointCloud& cloud);

/// Dataset generation into cfg.out_dir (models/ + manifest.tsv).
std::vector<ModelRecord> stage_gen(const PipelineConfig& cfg);

/// Mesh -> cloud -> descriptors for every record; writes
/// out_dir/fmat/model_NNNNNN.fmat. The sampling seed derives from each
/// record's model seed.
void stage_extract(const PipelineConfig& cfg, const std::vector<ModelRecord>& records);

/// Reads the extracted features back as training samples, ordered and
/// indexed by model id.
std::vector<TrainSample> load_samples(const PipelineConfig& cfg,
                                      const std::vector<ModelRecord>& records);

struct TrainedNet {
    NetParams params;
    TrainHistory history;
};

/// Trains on the manifest's train/val splits and writes out_dir/net.fnet.
TrainedNet stage_train(const PipelineConfig& cfg, const std::vector<TrainSample>& samples,
                       const std::vector<ModelRecord>& records);

/// Embedding of one sample under the given mode (net required for
/// Learned).
Embedding embed_sample(const PipelineConfig& cfg, const TrainSample& sample, IndexMode mode,
                       const NetParams* net);

/// Builds the full-database index for a mode and writes
/// out_dir/index_raw.fidx or index_learned.fidx.
RetrievalIndex stage_index(const PipelineConfig& cfg,
                           const std::vector<TrainSample>& samples,
                           const std::vector<ModelRecord>& records, IndexMode mode,
                           const NetParams* net);

struct PipelineReport {
    std::vector<ModelRecord> records;
    TrainHistory history;
    size_t parameter_count = 0;
    EvalReport baseline;
    EvalReport raw;
    EvalReport learned;
    std::string report_json;  // byte-identical across reruns with one seed
};

/// gen -> extract -> train -> index (both modes) -> evaluate; writes
/// out_dir/report.json and returns everything the caller might inspect.
PipelineReport run_pipeline(const PipelineConfig& cfg);

/// The JSON report text for a finished run (also written by run_pipeline).
std::string render_report(const PipelineConfig& cfg, const PipelineReport& report);

/// Report for a standalone evaluation; sections with null reports are
/// omitted.
std::string render_eval_json(uint32_t k, const std::vector<std::string>& family_names,
                             const EvalReport* baseline, const EvalReport* raw,
                             const EvalReport* learned);

}  // namespace featuredex

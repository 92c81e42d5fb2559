#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "featuredex/descriptor.hpp"
#include "featuredex/pooling.hpp"
#include "featuredex/sha256.hpp"

namespace featuredex {

/// Frobenius norm: square root of the sum of squared entries, accumulated
/// in double precision.
double frobenius_norm(const FeatureMatrix& fm);

struct NormEntry {
    uint32_t id = 0;
    uint16_t family = 0;
    double norm = 0;
};

struct RankedNorm {
    uint32_t id = 0;
    uint16_t family = 0;
    double score = 0;  // |query norm - entry norm|
};

/// Baseline ranking: ascending |query norm - db norm| (most similar
/// first), ties broken by ascending id. The optional exclusion drops one
/// id from the candidates (self-match suppression).
std::vector<RankedNorm> frobenius_rank(double query_norm, const std::vector<NormEntry>& db,
                                       std::optional<uint32_t> exclude_id = std::nullopt);
std::vector<RankedNorm> frobenius_rank(const FeatureMatrix& query,
                                       const std::vector<NormEntry>& db);

enum class IndexMode : uint8_t {
    Raw = 0,      // descriptor matrix pooled directly
    Learned = 1,  // pooled output of the trained per-point transform
};

struct IndexEntry {
    uint32_t id = 0;
    uint16_t family = 0;
    std::vector<float> embedding;

    bool operator==(const IndexEntry&) const = default;
};

struct RetrievalIndex {
    uint32_t dimension = 0;
    IndexMode mode = IndexMode::Raw;
    Digest256 provenance{};  // digest of the embedding configuration
    std::vector<IndexEntry> entries;  // ascending unique ids

    bool operator==(const RetrievalIndex&) const = default;
};

/// Validates and sorts entries by id.
/// Throws Error: Empty (no entries), DimensionMismatch (ragged or
/// zero-length embeddings), DuplicateId.
RetrievalIndex build_index(std::vector<IndexEntry> entries, IndexMode mode,
                           const Digest256& provenance);

/// FIDX byte layout: "FIDX", u16 version=1, u32 dimension, u32 count,
/// u8 mode, 32-byte provenance digest, then per entry u32 id, u16 family,
/// dimension f32 values, all little endian.
std::vector<uint8_t> encode_fidx(const RetrievalIndex& index);
RetrievalIndex decode_fidx(std::span<const uint8_t> bytes);
void write_fidx(const RetrievalIndex& index, const std::filesystem::path& path);
RetrievalIndex read_fidx(const std::filesystem::path& path);

/// Entry with the given id, or nullptr.
const IndexEntry* find_entry(const RetrievalIndex& index, uint32_t id);

struct QueryHit {
    uint32_t id = 0;
    uint16_t family = 0;
    double distance = 0;
};

/// Exact k nearest entries by Euclidean distance, ascending, ties by
/// ascending id; fewer than k when the index (minus the exclusion) is
/// smaller.
/// Throws Error: DimensionMismatch, InvalidParams (k == 0).
std::vector<QueryHit> query(const RetrievalIndex& index, const Embedding& embedding,
                            size_t k, std::optional<uint32_t> exclude_id = std::nullopt);

struct FamilyConfusion {
    uint16_t family = 0;
    uint32_t queries = 0;
    uint32_t top1_hits = 0;   // nearest non-self neighbor in the same family
    uint32_t topk_hits = 0;   // same family anywhere in the top k
    /// The two foreign families retrieved most often across this family's
    /// top-k lists, as (family id, count), count descending then id.
    std::vector<std::pair<uint16_t, uint32_t>> top_foreign;
};

struct EvalReport {
    uint32_t k = 5;
    size_t query_count = 0;
    double top1_accuracy = 0;
    double topk_accuracy = 0;
    std::vector<FamilyConfusion> families;  // ascending family id, test families only
};

/// Queries every test entry against the index with itself excluded.
/// Throws Error: EmptyTestSet, DimensionMismatch, InvalidParams (k == 0).
EvalReport evaluate(const RetrievalIndex& index, const std::vector<IndexEntry>& test_set,
                    uint32_t k = 5);

/// Same protocol over Frobenius-difference ranking.
EvalReport evaluate_baseline(const std::vector<NormEntry>& db,
                             const std::vector<NormEntry>& test_set, uint32_t k = 5);

}  // namespace featuredex

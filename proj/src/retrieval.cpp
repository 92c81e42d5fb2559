#include "featuredex/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

#include "featuredex/errors.hpp"
#include "featuredex/io_util.hpp"

namespace featuredex {

double frobenius_norm(const FeatureMatrix& fm) {
    double sum = 0;
    for (float x : fm.values) sum += double(x) * double(x);
    return std::sqrt(sum);
}

std::vector<RankedNorm> frobenius_rank(double query_norm, const std::vector<NormEntry>& db,
                                       std::optional<uint32_t> exclude_id) {
    if (db.empty()) throw Error(Err::Empty, "norm database is empty");
    std::vector<RankedNorm> ranked;
    ranked.reserve(db.size());
    for (const NormEntry& e : db) {
        if (exclude_id && e.id == *exclude_id) continue;
        ranked.push_back({e.id, e.family, std::abs(query_norm - e.norm)});
    }
    std::sort(ranked.begin(), ranked.end(), [](const RankedNorm& a, const RankedNorm& b) {
        if (a.score != b.score) return a.score < b.score;
        return a.id < b.id;
    });
    return ranked;
}

std::vector<RankedNorm> frobenius_rank(const FeatureMatrix& query,
                                       const std::vector<NormEntry>& db) {
    return frobenius_rank(frobenius_norm(query), db);
}

RetrievalIndex build_index(std::vector<IndexEntry> entries, IndexMode mode,
                           const Digest256& provenance) {
    if (entries.empty()) throw Error(Err::Empty, "an index needs at least one entry");
    size_t dim = entries.front().embedding.size();
    if (dim == 0) throw Error(Err::DimensionMismatch, "zero-length embedding");
    for (const IndexEntry& e : entries)
        if (e.embedding.size() != dim)
            throw Error(Err::DimensionMismatch,
                        "entry " + std::to_string(e.id) + " has dimension " +
                            std::to_string(e.embedding.size()) + ", index has " +
                            std::to_string(dim));

    std::sort(entries.begin(), entries.end(),
              [](const IndexEntry& a, const IndexEntry& b) { return a.id < b.id; });
    for (size_t i = 1; i < entries.size(); ++i)
        if (entries[i].id == entries[i - 1].id)
            throw Error(Err::DuplicateId, "duplicate id " + std::to_string(entries[i].id));

    RetrievalIndex index;
    index.dimension = static_cast<uint32_t>(dim);
    index.mode = mode;
    index.provenance = provenance;
    index.entries = std::move(entries);
    return index;
}

std::vector<uint8_t> encode_fidx(const RetrievalIndex& index) {
    ByteWriter w;
    w.bytes("FIDX", 4);
    w.u16(1);
    w.u32(index.dimension);
    w.u32(static_cast<uint32_t>(index.entries.size()));
    w.u8(static_cast<uint8_t>(index.mode));
    w.bytes(index.provenance.data(), index.provenance.size());
    for (const IndexEntry& e : index.entries) {
        w.u32(e.id);
        w.u16(e.family);
        for (float x : e.embedding) w.f32(x);
    }
    return w.take();
}

RetrievalIndex decode_fidx(std::span<const uint8_t> bytes) {
    ByteReader r(bytes.data(), bytes.size(), "FIDX");
    const uint8_t* magic = r.take(4);
    if (std::memcmp(magic, "FIDX", 4) != 0) throw Error(Err::BadMagic, "not a FIDX file");
    uint16_t version = r.u16();
    if (version != 1)
        throw Error(Err::VersionUnsupported,
                    "FIDX version " + std::to_string(version) + " unsupported");

    RetrievalIndex index;
    index.dimension = r.u32();
    uint32_t count = r.u32();
    uint8_t mode = r.u8();
    if (mode > 1) throw Error(Err::Malformed, "unknown index mode " + std::to_string(mode));
    index.mode = static_cast<IndexMode>(mode);
    const uint8_t* digest = r.take(index.provenance.size());
    std::memcpy(index.provenance.data(), digest, index.provenance.size());

    if (index.dimension == 0) throw Error(Err::Malformed, "FIDX declares zero dimension");
    if (count == 0) throw Error(Err::Malformed, "FIDX declares zero entries");
    const uint64_t entry_bytes = 6 + uint64_t(index.dimension) * 4;
    if (count > r.remaining() / entry_bytes)
        throw Error(Err::Truncated, "FIDX payload exceeds file size");
    if (count * entry_bytes != r.remaining())
        throw Error(Err::Malformed, "trailing bytes after FIDX payload");

    index.entries.resize(count);
    for (IndexEntry& e : index.entries) {
        e.id = r.u32();
        e.family = r.u16();
        e.embedding.resize(index.dimension);
        for (float& x : e.embedding) {
            x = r.f32();
            if (!std::isfinite(x)) throw Error(Err::NonFinite, "non-finite embedding value");
        }
    }
    for (size_t i = 1; i < index.entries.size(); ++i) {
        if (index.entries[i].id == index.entries[i - 1].id)
            throw Error(Err::DuplicateId,
                        "duplicate id " + std::to_string(index.entries[i].id));
        if (index.entries[i].id < index.entries[i - 1].id)
            throw Error(Err::Malformed, "FIDX entries must be sorted by id");
    }
    return index;
}

void write_fidx(const RetrievalIndex& index, const std::filesystem::path& path) {
    write_file_atomic(path, encode_fidx(index));
}

RetrievalIndex read_fidx(const std::filesystem::path& path) {
    std::vector<uint8_t> bytes = read_file(path);
    return decode_fidx(bytes);
}

namespace {

double euclidean(const std::vector<float>& a, const std::vector<float>& b) {
    double sum = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = double(a[i]) - double(b[i]);
        sum += d * d;
    }
    return std::sqrt(sum);
}

}  // namespace

const IndexEntry* find_entry(const RetrievalIndex& index, uint32_t id) {
    auto it = std::lower_bound(index.entries.begin(), index.entries.end(), id,
                               [](const IndexEntry& e, uint32_t want) { return e.id < want; });
    if (it == index.entries.end() || it->id != id) return nullptr;
    return &*it;
}

std::vector<QueryHit> query(const RetrievalIndex& index, const Embedding& embedding,
                            size_t k, std::optional<uint32_t> exclude_id) {
    if (k == 0) throw Error(Err::InvalidParams, "k must be at least 1");
    if (embedding.values.size() != index.dimension)
        throw Error(Err::DimensionMismatch,
                    "query dimension " + std::to_string(embedding.values.size()) +
                        " does not match index dimension " +
                        std::to_string(index.dimension));

    std::vector<QueryHit> hits;
    hits.reserve(index.entries.size());
    for (const IndexEntry& e : index.entries) {
        if (exclude_id && e.id == *exclude_id) continue;
        hits.push_back({e.id, e.family, euclidean(embedding.values, e.embedding)});
    }
    std::sort(hits.begin(), hits.end(), [](const QueryHit& a, const QueryHit& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.id < b.id;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

namespace {

// Shared metric aggregation: `ranked` holds, per test entry, the k (or
// fewer) retrieved (family) labels in rank order plus the query's family.
struct RankedQuery {
    uint16_t family;
    std::vector<uint16_t> retrieved;
};

EvalReport aggregate(const std::vector<RankedQuery>& queries, uint32_t k) {
    EvalReport report;
    report.k = k;
    report.query_count = queries.size();

    std::map<uint16_t, FamilyConfusion> families;
    std::map<uint16_t, std::map<uint16_t, uint32_t>> foreign;
    size_t top1 = 0, topk = 0;
    for (const RankedQuery& q : queries) {
        FamilyConfusion& fc = families[q.family];
        fc.family = q.family;
        ++fc.queries;
        if (!q.retrieved.empty() && q.retrieved.front() == q.family) {
            ++top1;
            ++fc.top1_hits;
        }
        bool hit = false;
        for (uint16_t fam : q.retrieved) {
            if (fam == q.family) hit = true;
            else ++foreign[q.family][fam];
        }
        if (hit) {
            ++topk;
            ++fc.topk_hits;
        }
    }
    report.top1_accuracy = double(top1) / double(queries.size());
    report.topk_accuracy = double(topk) / double(queries.size());

    for (auto& [fam, fc] : families) {
        std::vector<std::pair<uint16_t, uint32_t>> counts(foreign[fam].begin(),
                                                          foreign[fam].end());
        std::sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        if (counts.size() > 2) counts.resize(2);
        fc.top_foreign = std::move(counts);
        report.families.push_back(std::move(fc));
    }
    return report;
}

}  // namespace

EvalReport evaluate(const RetrievalIndex& index, const std::vector<IndexEntry>& test_set,
                    uint32_t k) {
    if (test_set.empty()) throw Error(Err::EmptyTestSet, "no test entries to evaluate");
    std::vector<RankedQuery> queries;
    queries.reserve(test_set.size());
    for (const IndexEntry& t : test_set) {
        Embedding emb{t.embedding};
        std::vector<QueryHit> hits = query(index, emb, k, t.id);
        RankedQuery rq;
        rq.family = t.family;
        for (const QueryHit& h : hits) rq.retrieved.push_back(h.family);
        queries.push_back(std::move(rq));
    }
    return aggregate(queries, k);
}

EvalReport evaluate_baseline(const std::vector<NormEntry>& db,
                             const std::vector<NormEntry>& test_set, uint32_t k) {
    if (test_set.empty()) throw Error(Err::EmptyTestSet, "no test entries to evaluate");
    if (k == 0) throw Error(Err::InvalidParams, "k must be at least 1");
    std::vector<RankedQuery> queries;
    queries.reserve(test_set.size());
    for (const NormEntry& t : test_set) {
        std::vector<RankedNorm> ranked = frobenius_rank(t.norm, db, t.id);
        RankedQuery rq;
        rq.family = t.family;
        for (size_t i = 0; i < ranked.size() && i < k; ++i)
            rq.retrieved.push_back(ranked[i].family);
        queries.push_back(std::move(rq));
    }
    return aggregate(queries, k);
}

}  // namespace featuredex

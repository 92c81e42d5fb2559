#pragma once

#include <cstdint>
#include <vector>

#include "featuredex/descriptor.hpp"
#include "featuredex/sampling.hpp"

namespace featuredex {

enum class SppDomain : uint8_t {
    CanonicalCube = 0,  // the stock cube [0,10]^3
    BoundingBox = 1,    // per-cloud axis-aligned box
};

/// Spatial pyramid pooling configuration. output length for a producer
/// with `channels` features per point is channels * sum(level^3).
struct SppConfig {
    std::vector<uint32_t> levels{1, 2, 4};
    SppDomain domain = SppDomain::CanonicalCube;
    float empty_fill = 0.0f;

    size_t bins_total() const {
        size_t n = 0;
        for (uint32_t l : levels) n += size_t(l) * l * l;
        return n;
    }
    size_t output_dim(uint32_t channels) const { return bins_total() * channels; }
};

/// Fixed-length pooled vector; the retrieval embedding.
struct Embedding {
    std::vector<float> values;

    bool operator==(const Embedding&) const = default;
};

/// Per-axis bin for a coordinate: min(floor(level*(x-lo)/(hi-lo)), level-1),
/// clamped below at 0. Points exactly on an interior boundary land in the
/// higher bin; the domain maximum lands in the last bin.
uint32_t spp_axis_bin(double x, double lo, double hi, uint32_t level);

/// Max-pools `values` (rows x channels, row-major) over every pyramid
/// level; bins concatenate level by level in lexicographic (x,y,z) order
/// with channels contiguous per bin. Empty bins yield cfg.empty_fill.
/// When argmax is non-null it receives, per output slot, the row index of
/// the maximum (first index wins ties) or -1 for empty bins.
///
/// Throws Error: InvalidParams (no levels, or a zero level),
/// MismatchedRows (rows != cloud.N), EmptyDomain (bounding-box mode with a
/// zero-extent axis).
template <typename T>
std::vector<T> spp_pool_core(const PointCloud& cloud, size_t rows, size_t channels,
                             const T* values, const SppConfig& cfg,
                             std::vector<int32_t>* argmax = nullptr);

/// SPP over a per-point feature matrix.
Embedding spp_pool(const PointCloud& cloud, const FeatureMatrix& features,
                   const SppConfig& cfg);

extern template std::vector<float> spp_pool_core<float>(const PointCloud&, size_t, size_t,
                                                        const float*, const SppConfig&,
                                                        std::vector<int32_t>*);
extern template std::vector<double> spp_pool_core<double>(const PointCloud&, size_t,
                                                          size_t, const double*,
                                                          const SppConfig&,
                                                          std::vector<int32_t>*);

}  // namespace featuredex

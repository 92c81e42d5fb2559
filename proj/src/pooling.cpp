#include "featuredex/pooling.hpp"

#include <cmath>

#include "featuredex/errors.hpp"

namespace featuredex {

uint32_t spp_axis_bin(double x, double lo, double hi, uint32_t level) {
    double t = std::floor(double(level) * (x - lo) / (hi - lo));
    if (!(t > 0)) return 0;
    return std::min(static_cast<uint32_t>(t), level - 1);
}

template <typename T>
std::vector<T> spp_pool_core(const PointCloud& cloud, size_t rows, size_t channels,
                             const T* values, const SppConfig& cfg,
                             std::vector<int32_t>* argmax) {
    if (cfg.levels.empty()) throw Error(Err::InvalidParams, "pooling needs at least one level");
    for (uint32_t l : cfg.levels)
        if (l == 0) throw Error(Err::InvalidParams, "pyramid level must be at least 1");
    if (rows != cloud.size())
        throw Error(Err::MismatchedRows, "feature rows " + std::to_string(rows) +
                                             " vs cloud points " +
                                             std::to_string(cloud.size()));

    Vec3 lo{0, 0, 0}, hi{kCubeSide, kCubeSide, kCubeSide};
    if (cfg.domain == SppDomain::BoundingBox) {
        if (cloud.empty()) throw Error(Err::EmptyDomain, "bounding box of an empty cloud");
        lo = hi = cloud.points[0];
        for (const Vec3& p : cloud.points) {
            lo.x = std::min(lo.x, p.x);
            lo.y = std::min(lo.y, p.y);
            lo.z = std::min(lo.z, p.z);
            hi.x = std::max(hi.x, p.x);
            hi.y = std::max(hi.y, p.y);
            hi.z = std::max(hi.z, p.z);
        }
        if (!(hi.x > lo.x) || !(hi.y > lo.y) || !(hi.z > lo.z))
            throw Error(Err::EmptyDomain, "degenerate bounding box");
    }

    const size_t out_len = cfg.output_dim(static_cast<uint32_t>(channels));
    std::vector<T> out(out_len, static_cast<T>(cfg.empty_fill));
    std::vector<int32_t> owner(out_len, -1);

    std::vector<uint32_t> bin_of(rows);
    size_t offset = 0;
    for (uint32_t level : cfg.levels) {
        for (size_t i = 0; i < rows; ++i) {
            const Vec3& p = cloud.points[i];
            uint32_t bx = spp_axis_bin(p.x, lo.x, hi.x, level);
            uint32_t by = spp_axis_bin(p.y, lo.y, hi.y, level);
            uint32_t bz = spp_axis_bin(p.z, lo.z, hi.z, level);
            bin_of[i] = (bx * level + by) * level + bz;
        }
        // ascending point order + strict comparison = first index wins ties
        for (size_t i = 0; i < rows; ++i) {
            const size_t base = offset + size_t(bin_of[i]) * channels;
            const T* row = values + i * channels;
            for (size_t c = 0; c < channels; ++c) {
                if (owner[base + c] < 0 || row[c] > out[base + c]) {
                    out[base + c] = row[c];
                    owner[base + c] = static_cast<int32_t>(i);
                }
            }
        }
        offset += size_t(level) * level * level * channels;
    }
    if (argmax) *argmax = std::move(owner);
    return out;
}

template std::vector<float> spp_pool_core<float>(const PointCloud&, size_t, size_t,
                                                 const float*, const SppConfig&,
                                                 std::vector<int32_t>*);
template std::vector<double> spp_pool_core<double>(const PointCloud&, size_t, size_t,
                                                   const double*, const SppConfig&,
                                                   std::vector<int32_t>*);

Embedding spp_pool(const PointCloud& cloud, const FeatureMatrix& features,
                   const SppConfig& cfg) {
    Embedding e;
    e.values = spp_pool_core<float>(cloud, features.rows, features.cols,
                                    features.values.data(), cfg, nullptr);
    return e;
}

}  // namespace featuredex

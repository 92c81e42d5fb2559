#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "featuredex/sampling.hpp"

namespace featuredex {

/// Row-major per-point feature matrix, single precision, with the paired
/// point positions it was computed from (the positions travel with the
/// features because spatial pooling needs them).
struct FeatureMatrix {
    uint32_t rows = 0;
    uint32_t cols = 0;
    std::vector<float> positions;  // rows*3, xyz per point
    std::vector<float> values;     // rows*cols

    float at(uint32_t r, uint32_t c) const { return values[size_t(r) * cols + c]; }
    float& at(uint32_t r, uint32_t c) { return values[size_t(r) * cols + c]; }

    bool operator==(const FeatureMatrix&) const = default;
};

inline constexpr uint32_t kDescriptorDims = 32;

struct DescriptorConfig {
    double radius = 0.8;  // neighborhood radius, cm
};

/// Hand-crafted 32-wide geometric descriptor per point. Column layout:
///   0..2   eigenvalues of the radius-r neighborhood covariance, sorted
///          descending, normalized by their sum
///   3      linearity      (l1-l2)/l1
///   4      planarity      (l2-l3)/l1
///   5      sphericity     l3/l1
///   6      omnivariance   (l1*l2*l3)^(1/3) of the normalized eigenvalues
///   7      anisotropy     (l1-l3)/l1
///   8      eigenentropy   -sum(li*ln(li)) over normalized eigenvalues
///   9      surface variation  l3/(l1+l2+l3)
///   10..12 unit normal (smallest eigenvector, sign fixed toward the cube
///          center)
///   13     height z/10
///   14     distance to the cube center /10
///   15     neighbor count (self included) / N
///   16..25 columns 0..9 recomputed with a 2x radius neighborhood
///   26..31 zero padding
/// Degenerate neighborhoods (fewer than 3 points, or vanishing spread)
/// produce zero covariance columns and a zero normal.
FeatureMatrix compute_descriptors(const PointCloud& cloud, const DescriptorConfig& cfg);

/// Symmetric 3x3 eigensolver (cyclic Jacobi). Eigenvalues descending;
/// eigenvectors[i] belongs to eigenvalues[i], unit length.
void eigen_symmetric3(const double mat[3][3], double eigenvalues[3],
                      double eigenvectors[3][3]);

/// FMAT byte layout: "FMAT", u16 version=1, u16 flags=0, u32 N, u32 D,
/// u64 reserved, N*3 f32 positions, N*D f32 features, all little endian.
std::vector<uint8_t> encode_fmat(const FeatureMatrix& fm);
FeatureMatrix decode_fmat(std::span<const uint8_t> bytes);

void write_fmat(const FeatureMatrix& fm, const std::filesystem::path& path);
/// Returns the features and reconstructs the point cloud from the stored
/// positions.
FeatureMatrix read_fmat(const std::filesystem::path& path, PointCloud* cloud = nullptr);

/// Positions of a FeatureMatrix as a PointCloud (exact f32->f64 widening).
PointCloud fmat_cloud(const FeatureMatrix& fm);

}  // namespace featuredex

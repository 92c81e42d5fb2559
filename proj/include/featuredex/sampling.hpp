#pragma once

#include <cstdint>
#include <vector>

#include "featuredex/geometry.hpp"

namespace featuredex {

/// Unordered surface sample points, coordinates in cm. Dataset models live
/// in the canonical stock-cube frame [0,10]^3.
struct PointCloud {
    std::vector<Vec3> points;

    size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

/// Draws exactly n_points surface samples: triangles are chosen with
/// probability proportional to area (inverse sampling over the cumulative
/// area table), positions by uniform barycentric sampling (u,v ~ U(0,1),
/// folded when u+v > 1). Deterministic for a fixed seed; the generator
/// draws, per point, the triangle selector then u then v.
///
/// When source_triangles is given it receives the selected triangle index
/// for each sample.
///
/// Throws Error: ZeroArea (no triangles or total area zero),
/// InvalidParams (n_points == 0).
PointCloud sample_surface(const TriangleMesh& mesh, size_t n_points, uint64_t seed,
                          std::vector<uint32_t>* source_triangles = nullptr);

/// Density normalization: one output point per occupied voxel, the
/// centroid of its member points. Voxel key is floor(coordinate /
/// voxel_size) per axis; output is ordered by lexicographic voxel key.
/// Member points are accumulated in lexicographic coordinate order, so the
/// result is bit-identical under any permutation of the input.
///
/// Throws Error: InvalidParams (voxel_size <= 0).
PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size);

}  // namespace featuredex

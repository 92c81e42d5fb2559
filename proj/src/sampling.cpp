#include "featuredex/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "featuredex/errors.hpp"
#include "featuredex/rng.hpp"

namespace featuredex {

PointCloud sample_surface(const TriangleMesh& mesh, size_t n_points, uint64_t seed,
                          std::vector<uint32_t>* source_triangles) {
    if (n_points == 0)
        throw Error(Err::InvalidParams, "sample_surface: n_points must be at least 1");
    if (mesh.triangles.empty())
        throw Error(Err::ZeroArea, "sample_surface: mesh has no triangles");

    std::vector<double> cumulative(mesh.triangles.size());
    double total = 0;
    for (size_t i = 0; i < mesh.triangles.size(); ++i) {
        total += mesh.triangles[i].area();
        cumulative[i] = total;
    }
    if (!(total > 0))
        throw Error(Err::ZeroArea, "sample_surface: total surface area is zero");

    SplitMix64 rng(seed);
    PointCloud cloud;
    cloud.points.reserve(n_points);
    if (source_triangles) {
        source_triangles->clear();
        source_triangles->reserve(n_points);
    }
    for (size_t i = 0; i < n_points; ++i) {
        double r = rng.next_double() * total;
        size_t t = static_cast<size_t>(
            std::lower_bound(cumulative.begin(), cumulative.end(), r) -
            cumulative.begin());
        if (t >= mesh.triangles.size()) t = mesh.triangles.size() - 1;
        double u = rng.next_double();
        double v = rng.next_double();
        if (u + v > 1.0) {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        const Triangle& tri = mesh.triangles[t];
        cloud.points.push_back(tri.v0 + (tri.v1 - tri.v0) * u + (tri.v2 - tri.v0) * v);
        if (source_triangles) source_triangles->push_back(static_cast<uint32_t>(t));
    }
    return cloud;
}

PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size) {
    if (!(voxel_size > 0))
        throw Error(Err::InvalidParams, "voxel_downsample: voxel_size must be positive");

    using Key = std::tuple<int64_t, int64_t, int64_t>;
    std::map<Key, std::vector<Vec3>> voxels;
    for (const Vec3& p : cloud.points) {
        Key key{static_cast<int64_t>(std::floor(p.x / voxel_size)),
                static_cast<int64_t>(std::floor(p.y / voxel_size)),
                static_cast<int64_t>(std::floor(p.z / voxel_size))};
        voxels[key].push_back(p);
    }

    PointCloud out;
    out.points.reserve(voxels.size());
    for (auto& [key, members] : voxels) {
        // canonical summation order, independent of input permutation
        std::sort(members.begin(), members.end(), [](const Vec3& a, const Vec3& b) {
            return std::tie(a.x, a.y, a.z) < std::tie(b.x, b.y, b.z);
        });
        Vec3 sum{0, 0, 0};
        for (const Vec3& p : members) sum += p;
        out.points.push_back(sum * (1.0 / static_cast<double>(members.size())));
    }
    return out;
}

}  // namespace featuredex

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace featuredex {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

/// One surface triangle; coordinates in centimeters.
/// The stored normal is either the zero vector or unit length.
struct Triangle {
    Vec3 v0, v1, v2;
    Vec3 normal;

    /// Unit normal from vertex winding, or the zero vector when the
    /// triangle is degenerate.
    Vec3 winding_normal() const {
        Vec3 c = (v1 - v0).cross(v2 - v0);
        double len = c.norm();
        if (len == 0.0) return {0, 0, 0};
        return c * (1.0 / len);
    }

    double area() const { return 0.5 * (v1 - v0).cross(v2 - v0).norm(); }
};

struct Aabb {
    Vec3 lo, hi;
};

/// Surface-only geometry, the unit of exchange through STL files.
struct TriangleMesh {
    std::vector<Triangle> triangles;
    /// Per-triangle attribute words preserved from binary STL input.
    /// Empty for meshes built in memory; writers always emit zero.
    std::vector<uint16_t> attributes;
    std::string source_name;

    bool empty() const { return triangles.empty(); }
    size_t size() const { return triangles.size(); }

    Aabb bounding_box() const {
        Aabb box{{0, 0, 0}, {0, 0, 0}};
        if (triangles.empty()) return box;
        box.lo = box.hi = triangles[0].v0;
        auto grow = [&box](const Vec3& v) {
            box.lo.x = std::min(box.lo.x, v.x);
            box.lo.y = std::min(box.lo.y, v.y);
            box.lo.z = std::min(box.lo.z, v.z);
            box.hi.x = std::max(box.hi.x, v.x);
            box.hi.y = std::max(box.hi.y, v.y);
            box.hi.z = std::max(box.hi.z, v.z);
        };
        for (const Triangle& t : triangles) {
            grow(t.v0);
            grow(t.v1);
            grow(t.v2);
        }
        return box;
    }

    double surface_area() const {
        double a = 0;
        for (const Triangle& t : triangles) a += t.area();
        return a;
    }
};

/// Side length of the stock cube every dataset model is cut from, in cm.
inline constexpr double kCubeSide = 10.0;

}  // namespace featuredex

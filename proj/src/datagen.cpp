#include "featuredex/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

#include "featuredex/errors.hpp"
#include "featuredex/io_util.hpp"
#include "featuredex/stl.hpp"

namespace featuredex {

namespace {

constexpr double kWall = 0.5;  // minimum material around walled features, cm
constexpr double kHalf = kCubeSide / 2;

[[noreturn]] void invalid(const std::string& family, const std::string& why) {
    throw Error(Err::InvalidParams, family + ": " + why);
}

// Cube-frame point -> feature-frame point: undo quarter-turn rotations
// about the vertical cube axis.
void to_feature_frame(const FeatureParams& p, double x, double y, double& lx, double& ly) {
    double dx = x - kHalf, dy = y - kHalf;
    for (int t = 0; t < (p.quarter_turns & 3); ++t) {
        double nx = dy, ny = -dx;
        dx = nx;
        dy = ny;
    }
    lx = kHalf + dx;
    ly = kHalf + dy;
}

bool depth_reached(const FeatureParams& p, double z) { return z >= kCubeSide - p.depth; }

void check_depth(const std::string& name, const FeatureParams& p, bool through) {
    if (through) {
        if (p.depth != kCubeSide) invalid(name, "through feature requires depth == 10");
    } else if (!(p.depth > 0) || p.depth > kCubeSide) {
        invalid(name, "blind feature requires 0 < depth <= 10");
    }
}

void check_centered_disk(const std::string& name, double ox, double oy, double r) {
    if (!(r > 0)) invalid(name, "radius must be positive");
    if (ox - r < kWall || ox + r > kCubeSide - kWall || oy - r < kWall ||
        oy + r > kCubeSide - kWall)
        invalid(name, "feature must keep a 0.5 cm lateral wall");
}

double dist2_to_segment(double px, double py, double ax, double ay, double bx, double by) {
    double vx = bx - ax, vy = by - ay;
    double len2 = vx * vx + vy * vy;
    double t = 0;
    if (len2 > 0) t = std::clamp(((px - ax) * vx + (py - ay) * vy) / len2, 0.0, 1.0);
    double cx = ax + t * vx, cy = ay + t * vy;
    return (px - cx) * (px - cx) + (py - cy) * (py - cy);
}

// CCW convex polygon containment, boundary counts as inside.
bool in_convex_polygon(const double (*verts)[2], int n, double x, double y) {
    for (int i = 0; i < n; ++i) {
        const double* a = verts[i];
        const double* b = verts[(i + 1) % n];
        double cross = (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]);
        if (cross < 0) return false;
    }
    return true;
}

// Equilateral triangle pointing +Y, CCW.
void triangle_verts(double ox, double oy, double rc, double (*out)[2]) {
    const double s32 = std::sqrt(3.0) / 2;
    out[0][0] = ox;
    out[0][1] = oy + rc;
    out[1][0] = ox - s32 * rc;
    out[1][1] = oy - rc / 2;
    out[2][0] = ox + s32 * rc;
    out[2][1] = oy - rc / 2;
}

// Regular hexagon, first vertex on +X, CCW.
void hexagon_verts(double ox, double oy, double rc, double (*out)[2]) {
    const double s32 = std::sqrt(3.0) / 2;
    const double cosines[6] = {1, 0.5, -0.5, -1, -0.5, 0.5};
    const double sines[6] = {0, s32, s32, 0, -s32, -s32};
    for (int i = 0; i < 6; ++i) {
        out[i][0] = ox + rc * cosines[i];
        out[i][1] = oy + rc * sines[i];
    }
}

std::vector<FamilyDef> build_catalog() {
    std::vector<FamilyDef> cat;

    auto cylinder_inside = [](const FeatureParams& p, double x, double y, double z) {
        if (!depth_reached(p, z)) return false;
        double lx, ly;
        to_feature_frame(p, x, y, lx, ly);
        double dx = lx - p.offset_x, dy = ly - p.offset_y;
        return dx * dx + dy * dy <= p.radius * p.radius;
    };
    auto disk_sampler = [](bool through, double depth_lo, double depth_hi) {
        return [=](SplitMix64& rng) {
            FeatureParams p;
            p.radius = rng.uniform(0.8, 3.0);
            p.offset_x = rng.uniform(kWall + p.radius, kCubeSide - kWall - p.radius);
            p.offset_y = rng.uniform(kWall + p.radius, kCubeSide - kWall - p.radius);
            p.depth = through ? kCubeSide : rng.uniform(depth_lo, depth_hi);
            p.quarter_turns = static_cast<int>(rng.next_index(4));
            return p;
        };
    };

    cat.push_back({"through_hole", "circular", true,
                   [](const FeatureParams& p) {
                       check_centered_disk("through_hole", p.offset_x, p.offset_y, p.radius);
                       check_depth("through_hole", p, true);
                   },
                   cylinder_inside, disk_sampler(true, 0, 0)});

    cat.push_back({"blind_hole", "circular", false,
                   [](const FeatureParams& p) {
                       check_centered_disk("blind_hole", p.offset_x, p.offset_y, p.radius);
                       check_depth("blind_hole", p, false);
                   },
                   cylinder_inside, disk_sampler(false, 2.0, 8.0)});

    auto box_inside = [](const FeatureParams& p, double x, double y, double z) {
        if (!depth_reached(p, z)) return false;
        double lx, ly;
        to_feature_frame(p, x, y, lx, ly);
        return std::abs(lx - p.offset_x) <= p.width_x / 2 &&
               std::abs(ly - p.offset_y) <= p.width_y / 2;
    };
    auto box_validate = [](const char* name, const FeatureParams& p) {
        if (!(p.width_x > 0) || !(p.width_y > 0)) invalid(name, "widths must be positive");
        if (p.offset_x - p.width_x / 2 < kWall || p.offset_x + p.width_x / 2 > kCubeSide - kWall ||
            p.offset_y - p.width_y / 2 < kWall || p.offset_y + p.width_y / 2 > kCubeSide - kWall)
            invalid(name, "feature must keep a 0.5 cm lateral wall");
    };
    auto box_sampler = [](bool through, double w_hi) {
        return [=](SplitMix64& rng) {
            FeatureParams p;
            p.width_x = rng.uniform(1.5, w_hi);
            p.width_y = rng.uniform(1.5, w_hi);
            p.offset_x = rng.uniform(kWall + p.width_x / 2, kCubeSide - kWall - p.width_x / 2);
            p.offset_y = rng.uniform(kWall + p.width_y / 2, kCubeSide - kWall - p.width_y / 2);
            p.depth = through ? kCubeSide : rng.uniform(1.5, 8.0);
            p.quarter_turns = static_cast<int>(rng.next_index(4));
            return p;
        };
    };

    cat.push_back({"rectangular_passage", "rectangular", true,
                   [box_validate](const FeatureParams& p) {
                       box_validate("rectangular_passage", p);
                       check_depth("rectangular_passage", p, true);
                   },
                   box_inside, box_sampler(true, 5.0)});

    cat.push_back({"rectangular_pocket", "rectangular", false,
                   [box_validate](const FeatureParams& p) {
                       box_validate("rectangular_pocket", p);
                       check_depth("rectangular_pocket", p, false);
                   },
                   box_inside, box_sampler(false, 6.0)});

    // corner cut, open on two side faces and the top
    cat.push_back({"rectangular_blind_step", "rectangular", false,
                   [](const FeatureParams& p) {
                       if (!(p.width_x > 0) || !(p.width_y > 0))
                           invalid("rectangular_blind_step", "widths must be positive");
                       if (p.width_x > kCubeSide - kWall || p.width_y > kCubeSide - kWall)
                           invalid("rectangular_blind_step",
                                   "step must leave 0.5 cm of material on the far sides");
                       check_depth("rectangular_blind_step", p, false);
                   },
                   [](const FeatureParams& p, double x, double y, double z) {
                       if (!depth_reached(p, z)) return false;
                       double lx, ly;
                       to_feature_frame(p, x, y, lx, ly);
                       return lx <= p.width_x && ly <= p.width_y;
                   },
                   [](SplitMix64& rng) {
                       FeatureParams p;
                       p.width_x = rng.uniform(2.0, 6.0);
                       p.width_y = rng.uniform(2.0, 6.0);
                       p.depth = rng.uniform(1.5, 8.0);
                       p.quarter_turns = static_cast<int>(rng.next_index(4));
                       return p;
                   }});

    // stadium profile: rectangle with semicircular caps, fully walled
    cat.push_back({"circular_end_pocket", "circular", false,
                   [](const FeatureParams& p) {
                       if (!(p.radius > 0) || !(p.width_x > 0))
                           invalid("circular_end_pocket", "radius and half-length must be positive");
                       double ex = p.width_x + p.radius;
                       if (p.offset_x - ex < kWall || p.offset_x + ex > kCubeSide - kWall ||
                           p.offset_y - p.radius < kWall ||
                           p.offset_y + p.radius > kCubeSide - kWall)
                           invalid("circular_end_pocket", "feature must keep a 0.5 cm lateral wall");
                       check_depth("circular_end_pocket", p, false);
                   },
                   [](const FeatureParams& p, double x, double y, double z) {
                       if (!depth_reached(p, z)) return false;
                       double lx, ly;
                       to_feature_frame(p, x, y, lx, ly);
                       return dist2_to_segment(lx, ly, p.offset_x - p.width_x, p.offset_y,
                                               p.offset_x + p.width_x, p.offset_y) <=
                              p.radius * p.radius;
                   },
                   [](SplitMix64& rng) {
                       FeatureParams p;
                       p.radius = rng.uniform(0.8, 2.0);
                       // cap the half-length so the stadium always fits the walls
                       p.width_x = rng.uniform(1.0, std::min(3.0, 4.3 - p.radius));
                       double ex = p.width_x + p.radius;
                       p.offset_x = rng.uniform(kWall + ex, kCubeSide - kWall - ex);
                       p.offset_y = rng.uniform(kWall + p.radius, kCubeSide - kWall - p.radius);
                       p.depth = rng.uniform(1.5, 8.0);
                       p.quarter_turns = static_cast<int>(rng.next_index(4));
                       return p;
                   }});

    // slot running in from a side face, semicircular far end, blind in depth
    cat.push_back({"circular_end_blind_slot", "circular", false,
                   [](const FeatureParams& p) {
                       if (!(p.radius > 0) || !(p.width_y > 0))
                           invalid("circular_end_blind_slot",
                                   "radius and penetration must be positive");
                       if (p.width_y + p.radius > kCubeSide - kWall)
                           invalid("circular_end_blind_slot",
                                   "slot end must keep a 0.5 cm wall");
                       if (p.offset_x - p.radius < kWall ||
                           p.offset_x + p.radius > kCubeSide - kWall)
                           invalid("circular_end_blind_slot",
                                   "slot sides must keep a 0.5 cm wall");
                       check_depth("circular_end_blind_slot", p, false);
                   },
                   [](const FeatureParams& p, double x, double y, double z) {
                       if (!depth_reached(p, z)) return false;
                       double lx, ly;
                       to_feature_frame(p, x, y, lx, ly);
                       return dist2_to_segment(lx, ly, p.offset_x, 0.0, p.offset_x, p.width_y) <=
                              p.radius * p.radius;
                   },
                   [](SplitMix64& rng) {
                       FeatureParams p;
                       p.radius = rng.uniform(0.8, 2.0);
                       p.width_y = rng.uniform(2.0, 6.0);
                       p.offset_x = rng.uniform(kWall + p.radius, kCubeSide - kWall - p.radius);
                       p.depth = rng.uniform(1.5, 8.0);
                       p.quarter_turns = static_cast<int>(rng.next_index(4));
                       return p;
                   }});

    auto triangle_inside = [](const FeatureParams& p, double x, double y, double z) {
        if (!depth_reached(p, z)) return false;
        double lx, ly;
        to_feature_frame(p, x, y, lx, ly);
        double verts[3][2];
        triangle_verts(p.offset_x, p.offset_y, p.radius, verts);
        return in_convex_polygon(verts, 3, lx, ly);
    };
    auto polygon_validate = [](const char* name, const FeatureParams& p) {
        if (!(p.radius > 0)) invalid(name, "circumradius must be positive");
        if (p.offset_x - p.radius < kWall || p.offset_x + p.radius > kCubeSide - kWall ||
            p.offset_y - p.radius < kWall || p.offset_y + p.radius > kCubeSide - kWall)
            invalid(name, "feature must keep a 0.5 cm lateral wall");
    };
    auto polygon_sampler = [](bool through, double rc_lo, double rc_hi) {
        return [=](SplitMix64& rng) {
            FeatureParams p;
            p.radius = rng.uniform(rc_lo, rc_hi);
            p.offset_x = rng.uniform(kWall + p.radius, kCubeSide - kWall - p.radius);
            p.offset_y = rng.uniform(kWall + p.radius, kCubeSide - kWall - p.radius);
            p.depth = through ? kCubeSide : rng.uniform(1.5, 8.0);
            p.quarter_turns = static_cast<int>(rng.next_index(4));
            return p;
        };
    };

    cat.push_back({"triangular_passage", "triangular", true,
                   [polygon_validate](const FeatureParams& p) {
                       polygon_validate("triangular_passage", p);
                       check_depth("triangular_passage", p, true);
                   },
                   triangle_inside, polygon_sampler(true, 1.5, 3.5)});

    cat.push_back({"triangular_pocket", "triangular", false,
                   [polygon_validate](const FeatureParams& p) {
                       polygon_validate("triangular_pocket", p);
                       check_depth("triangular_pocket", p, false);
                   },
                   triangle_inside, polygon_sampler(false, 1.5, 3.5)});

    auto hexagon_inside = [](const FeatureParams& p, double x, double y, double z) {
        if (!depth_reached(p, z)) return false;
        double lx, ly;
        to_feature_frame(p, x, y, lx, ly);
        double verts[6][2];
        hexagon_verts(p.offset_x, p.offset_y, p.radius, verts);
        return in_convex_polygon(verts, 6, lx, ly);
    };

    cat.push_back({"six_sides_passage", "six_sided", true,
                   [polygon_validate](const FeatureParams& p) {
                       polygon_validate("six_sides_passage", p);
                       check_depth("six_sides_passage", p, true);
                   },
                   hexagon_inside, polygon_sampler(true, 1.2, 3.0)});

    cat.push_back({"six_sides_pocket", "six_sided", false,
                   [polygon_validate](const FeatureParams& p) {
                       polygon_validate("six_sides_pocket", p);
                       check_depth("six_sides_pocket", p, false);
                   },
                   hexagon_inside, polygon_sampler(false, 1.2, 3.0)});

    cat.push_back({"o_ring", "circular", false,
                   [](const FeatureParams& p) {
                       if (!(p.inner_radius > 0) || !(p.radius > p.inner_radius))
                           invalid("o_ring", "requires 0 < inner_radius < radius");
                       check_centered_disk("o_ring", p.offset_x, p.offset_y, p.radius);
                       check_depth("o_ring", p, false);
                   },
                   [](const FeatureParams& p, double x, double y, double z) {
                       if (!depth_reached(p, z)) return false;
                       double lx, ly;
                       to_feature_frame(p, x, y, lx, ly);
                       double dx = lx - p.offset_x, dy = ly - p.offset_y;
                       double d2 = dx * dx + dy * dy;
                       return d2 >= p.inner_radius * p.inner_radius && d2 <= p.radius * p.radius;
                   },
                   [](SplitMix64& rng) {
                       FeatureParams p;
                       p.radius = rng.uniform(1.5, 3.5);
                       p.inner_radius = p.radius * rng.uniform(0.35, 0.65);
                       p.offset_x = rng.uniform(kWall + p.radius, kCubeSide - kWall - p.radius);
                       p.offset_y = rng.uniform(kWall + p.radius, kCubeSide - kWall - p.radius);
                       p.depth = rng.uniform(1.0, 5.0);
                       p.quarter_turns = static_cast<int>(rng.next_index(4));
                       return p;
                   }});

    return cat;
}

// Fills cells until no 2x2 checkerboard exists in any axis plane. A
// checkerboard square produces an edge shared by four boundary faces;
// filling the lexicographically smallest empty cell of the square breaks
// it while only shrinking the feature.
void enforce_well_composed(OccupancyGrid& g) {
    const int R = g.resolution;
    struct Cell {
        int i, j, k;
    };
    bool changed = true;
    while (changed) {
        changed = false;
        auto fix_square = [&](Cell a, Cell b, Cell c, Cell d) {
            // a,b are one diagonal, c,d the other
            bool va = g.at(a.i, a.j, a.k), vb = g.at(b.i, b.j, b.k);
            bool vc = g.at(c.i, c.j, c.k), vd = g.at(d.i, d.j, d.k);
            if (va != vb || vc != vd || va == vc) return;
            Cell e0 = va ? c : a;
            Cell e1 = va ? d : b;
            Cell pick = std::tie(e0.i, e0.j, e0.k) < std::tie(e1.i, e1.j, e1.k) ? e0 : e1;
            g.set(pick.i, pick.j, pick.k, true);
            changed = true;
        };
        for (int i = 0; i + 1 < R; ++i)
            for (int j = 0; j + 1 < R; ++j)
                for (int k = 0; k < R; ++k)
                    fix_square({i, j, k}, {i + 1, j + 1, k}, {i + 1, j, k}, {i, j + 1, k});
        for (int i = 0; i + 1 < R; ++i)
            for (int k = 0; k + 1 < R; ++k)
                for (int j = 0; j < R; ++j)
                    fix_square({i, j, k}, {i + 1, j, k + 1}, {i + 1, j, k}, {i, j, k + 1});
        for (int j = 0; j + 1 < R; ++j)
            for (int k = 0; k + 1 < R; ++k)
                for (int i = 0; i < R; ++i)
                    fix_square({i, j, k}, {i, j + 1, k + 1}, {i, j + 1, k}, {i, j, k + 1});
    }
}

std::string format_params(const FeatureParams& p) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "radius=%.17g,inner_radius=%.17g,width_x=%.17g,width_y=%.17g,"
                  "depth=%.17g,offset_x=%.17g,offset_y=%.17g,quarter_turns=%d",
                  p.radius, p.inner_radius, p.width_x, p.width_y, p.depth, p.offset_x,
                  p.offset_y, p.quarter_turns);
    return buf;
}

FeatureParams parse_params(const std::string& text, int line_no) {
    FeatureParams p;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t eq = text.find('=', pos);
        size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        if (eq == std::string::npos || eq > comma)
            throw Error(Err::Malformed, "manifest line " + std::to_string(line_no) +
                                            ": bad parameter list");
        std::string key = text.substr(pos, eq - pos);
        std::string val = text.substr(eq + 1, comma - eq - 1);
        double num = std::strtod(val.c_str(), nullptr);
        if (key == "radius") p.radius = num;
        else if (key == "inner_radius") p.inner_radius = num;
        else if (key == "width_x") p.width_x = num;
        else if (key == "width_y") p.width_y = num;
        else if (key == "depth") p.depth = num;
        else if (key == "offset_x") p.offset_x = num;
        else if (key == "offset_y") p.offset_y = num;
        else if (key == "quarter_turns") p.quarter_turns = static_cast<int>(num);
        else
            throw Error(Err::Malformed, "manifest line " + std::to_string(line_no) +
                                            ": unknown parameter '" + key + "'");
        pos = comma + (comma < text.size() ? 1 : 0);
    }
    return p;
}

}  // namespace

const std::vector<FamilyDef>& family_catalog() {
    static const std::vector<FamilyDef> catalog = build_catalog();
    return catalog;
}

int family_catalog_index(const std::string& name) {
    const auto& cat = family_catalog();
    for (size_t i = 0; i < cat.size(); ++i)
        if (cat[i].name == name) return static_cast<int>(i);
    return -1;
}

size_t OccupancyGrid::occupied_count() const {
    size_t n = 0;
    for (uint8_t c : cells) n += c != 0;
    return n;
}

OccupancyGrid occupancy_grid(const FamilyDef& family, const FeatureParams& params,
                             int resolution) {
    if (resolution < 16 || resolution > 256)
        throw Error(Err::InvalidParams,
                    "resolution must be in [16,256], got " + std::to_string(resolution));
    family.validate(params);

    OccupancyGrid g;
    g.resolution = resolution;
    g.cells.assign(static_cast<size_t>(resolution) * resolution * resolution, 0);
    const double h = g.cell_size();
    for (int i = 0; i < resolution; ++i) {
        double cx = (i + 0.5) * h;
        for (int j = 0; j < resolution; ++j) {
            double cy = (j + 0.5) * h;
            for (int k = 0; k < resolution; ++k) {
                double cz = (k + 0.5) * h;
                g.set(i, j, k, !family.inside(params, cx, cy, cz));
            }
        }
    }
    enforce_well_composed(g);
    return g;
}

TriangleMesh extract_surface(const OccupancyGrid& grid) {
    const int R = grid.resolution;
    const size_t total = static_cast<size_t>(R) * R * R;
    const size_t occ = grid.occupied_count();
    (void)total;
    if (occ == 0) throw Error(Err::Degenerate, "grid is fully empty");

    const double h = grid.cell_size();
    // per direction: neighbor offset, then quad corners in CCW order seen
    // from outside (winding normal equals the face direction)
    struct Dir {
        int dx, dy, dz;
        int c[4][3];
    };
    static const Dir dirs[6] = {
        {1, 0, 0, {{1, 0, 0}, {1, 1, 0}, {1, 1, 1}, {1, 0, 1}}},
        {-1, 0, 0, {{0, 0, 0}, {0, 0, 1}, {0, 1, 1}, {0, 1, 0}}},
        {0, 1, 0, {{0, 1, 0}, {0, 1, 1}, {1, 1, 1}, {1, 1, 0}}},
        {0, -1, 0, {{0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1}}},
        {0, 0, 1, {{0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}}},
        {0, 0, -1, {{0, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, 0, 0}}},
    };

    TriangleMesh mesh;
    for (int i = 0; i < R; ++i) {
        for (int j = 0; j < R; ++j) {
            for (int k = 0; k < R; ++k) {
                if (!grid.at(i, j, k)) continue;
                for (const Dir& d : dirs) {
                    int ni = i + d.dx, nj = j + d.dy, nk = k + d.dz;
                    bool outside = ni < 0 || ni >= R || nj < 0 || nj >= R || nk < 0 || nk >= R;
                    if (!outside && grid.at(ni, nj, nk)) continue;
                    Vec3 q[4];
                    for (int c = 0; c < 4; ++c)
                        q[c] = Vec3{(i + d.c[c][0]) * h, (j + d.c[c][1]) * h,
                                    (k + d.c[c][2]) * h};
                    Triangle t1{q[0], q[1], q[2], {}};
                    Triangle t2{q[0], q[2], q[3], {}};
                    t1.normal = t1.winding_normal();
                    t2.normal = t2.winding_normal();
                    mesh.triangles.push_back(t1);
                    mesh.triangles.push_back(t2);
                }
            }
        }
    }
    return mesh;
}

void split_sizes(size_t total, size_t& train, size_t& val, size_t& test) {
    train = static_cast<size_t>(std::llround(0.70 * static_cast<double>(total)));
    val = static_cast<size_t>(std::llround(0.15 * static_cast<double>(total)));
    if (train + val > total) train = total - val;
    test = total - train - val;
}

std::vector<ModelRecord> generate_dataset(const DatasetConfig& config) {
    if (config.per_family < 1)
        throw Error(Err::InvalidParams, "per_family must be at least 1");
    std::vector<std::string> families = config.families;
    if (families.empty())
        for (const FamilyDef& f : family_catalog()) families.push_back(f.name);
    for (const std::string& name : families)
        if (family_catalog_index(name) < 0)
            throw Error(Err::InvalidParams, "unknown family '" + name + "'");

    const auto& cat = family_catalog();
    const size_t count = families.size() * static_cast<size_t>(config.per_family);
    std::vector<ModelRecord> records(count);

    for (size_t f = 0; f < families.size(); ++f) {
        const FamilyDef& def = cat[family_catalog_index(families[f])];
        for (int m = 0; m < config.per_family; ++m) {
            uint32_t id = static_cast<uint32_t>(f * config.per_family + m);
            uint64_t model_seed = SplitMix64::derive(config.seed, id);
            SplitMix64 rng(model_seed);
            FeatureParams params = def.sample(rng);

            OccupancyGrid grid = occupancy_grid(def, params, config.resolution);
            TriangleMesh mesh = extract_surface(grid);

            char name[128];
            std::snprintf(name, sizeof name, "models/model_%06u_%s.stl", id,
                          def.name.c_str());
            mesh.source_name = std::filesystem::path(name).stem().string();
            save_stl(mesh, config.out_dir / name, StlFormat::Binary);

            ModelRecord& rec = records[id];
            rec.id = id;
            rec.family = def.name;
            rec.family_id = static_cast<uint16_t>(f);
            rec.seed = model_seed;
            rec.params = params;
            rec.rel_path = name;
        }
    }

    // seeded shuffle decides the split membership
    std::vector<size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 shuffle_rng(SplitMix64::derive(config.seed, 0x53504C4954ULL));
    for (size_t i = count - 1; i > 0; --i) {
        size_t j = shuffle_rng.next_index(i + 1);
        std::swap(order[i], order[j]);
    }
    size_t n_train, n_val, n_test;
    split_sizes(count, n_train, n_val, n_test);
    for (size_t pos = 0; pos < count; ++pos) {
        ModelRecord& rec = records[order[pos]];
        rec.split = pos < n_train ? "train" : pos < n_train + n_val ? "val" : "test";
    }

    write_manifest(records, config.out_dir / "manifest.tsv");
    return records;
}

std::string manifest_to_text(const std::vector<ModelRecord>& records) {
    std::string out = "# featuredex manifest v1: id\tfamily\tfamily_id\tsplit\tseed\tparams\tpath\n";
    for (const ModelRecord& r : records) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%u\t%s\t%u\t%s\t%llu\t", r.id, r.family.c_str(),
                      static_cast<unsigned>(r.family_id), r.split.c_str(),
                      static_cast<unsigned long long>(r.seed));
        out += buf;
        out += format_params(r.params);
        out += '\t';
        out += r.rel_path;
        out += '\n';
    }
    return out;
}

void write_manifest(const std::vector<ModelRecord>& records,
                    const std::filesystem::path& path) {
    write_file_atomic(path, manifest_to_text(records));
}

std::vector<ModelRecord> read_manifest(const std::filesystem::path& path) {
    std::vector<uint8_t> bytes = read_file(path);
    std::string text(bytes.begin(), bytes.end());
    std::vector<ModelRecord> records;
    size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty() || line[0] == '#') continue;

        std::vector<std::string> fields;
        size_t fpos = 0;
        for (;;) {
            size_t tab = line.find('\t', fpos);
            if (tab == std::string::npos) {
                fields.push_back(line.substr(fpos));
                break;
            }
            fields.push_back(line.substr(fpos, tab - fpos));
            fpos = tab + 1;
        }
        if (fields.size() != 7)
            throw Error(Err::Malformed, "manifest line " + std::to_string(line_no) +
                                            ": expected 7 fields, got " +
                                            std::to_string(fields.size()));
        ModelRecord r;
        r.id = static_cast<uint32_t>(std::strtoul(fields[0].c_str(), nullptr, 10));
        r.family = fields[1];
        r.family_id = static_cast<uint16_t>(std::strtoul(fields[2].c_str(), nullptr, 10));
        r.split = fields[3];
        r.seed = std::strtoull(fields[4].c_str(), nullptr, 10);
        r.params = parse_params(fields[5], line_no);
        r.rel_path = fields[6];
        if (r.split != "train" && r.split != "val" && r.split != "test")
            throw Error(Err::Malformed, "manifest line " + std::to_string(line_no) +
                                            ": bad split tag '" + r.split + "'");
        records.push_back(std::move(r));
    }
    return records;
}

}  // namespace featuredex

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "featuredex/geometry.hpp"
#include "featuredex/rng.hpp"

namespace featuredex {

/// Parameters of one machining feature, interpreted per family.
/// Lengths in cm; the feature is subtracted from the [0,10]^3 stock cube
/// from the top face (z = 10) downward, or straight through for passage
/// families (depth == 10).
struct FeatureParams {
    double radius = 0;        // circular families; hexagon/triangle circumradius
    double inner_radius = 0;  // o_ring bore
    double width_x = 0;       // box width / stadium half-length / step extent
    double width_y = 0;       // box width / slot penetration / step extent
    double depth = 0;         // cut depth along -Z from the top face
    double offset_x = 0;      // feature center in cube coordinates
    double offset_y = 0;
    int quarter_turns = 0;    // rotation about Z through the cube center, 0..3
};

/// One entry of the built-in feature catalog.
struct FamilyDef {
    std::string name;
    std::string group;  // circular | rectangular | triangular | six_sided
    bool through;       // passage/through families cut the full 10 cm

    /// Throws Error(InvalidParams) when params violate the family's rules
    /// (walls thinner than 0.5 cm where a wall is required, depth out of
    /// range, non-positive sizes).
    std::function<void(const FeatureParams&)> validate;

    /// True when cube-frame point (x,y,z) lies inside the removed solid.
    std::function<bool(const FeatureParams&, double x, double y, double z)> inside;

    /// Draws valid params uniformly from the family's ranges.
    std::function<FeatureParams(SplitMix64&)> sample;
};

/// The 12 named families, fixed order. "circular_end_blind_slot" is also
/// known in some sources as "circular end blind spot"; the slot spelling
/// is canonical here.
const std::vector<FamilyDef>& family_catalog();

/// Catalog position for a family name, or -1.
int family_catalog_index(const std::string& name);

/// Dense cell-occupancy voxelization of the stock cube minus a feature.
/// Cell (i,j,k) spans [i*h,(i+1)*h] x ... with h = 10/resolution; index
/// layout is x-major: (i*R + j)*R + k.
struct OccupancyGrid {
    int resolution = 0;
    std::vector<uint8_t> cells;

    double cell_size() const { return kCubeSide / resolution; }
    size_t index(int i, int j, int k) const {
        return (static_cast<size_t>(i) * resolution + j) * resolution + k;
    }
    bool at(int i, int j, int k) const { return cells[index(i, j, k)] != 0; }
    void set(int i, int j, int k, bool v) { cells[index(i, j, k)] = v ? 1 : 0; }
    size_t occupied_count() const;
};

/// Voxelizes cube-minus-feature: a cell is occupied iff its center lies
/// outside the removed solid. The result is post-processed so that no
/// 2x2 checkerboard of cells exists in any axis plane, which keeps the
/// extracted surface free of non-manifold edges.
///
/// Throws Error(InvalidParams) for resolution outside [16,256] or params
/// that fail the family's validation.
OccupancyGrid occupancy_grid(const FamilyDef& family, const FeatureParams& params,
                             int resolution);

/// Emits two outward-oriented triangles per boundary face (an occupied
/// cell face adjacent to an empty cell or the grid exterior). The result
/// is a closed 2-manifold surface: every undirected edge is shared by
/// exactly two triangles. A fully occupied grid yields its outer shell.
///
/// Throws Error(Degenerate) when the grid is fully empty (no surface).
TriangleMesh extract_surface(const OccupancyGrid& grid);

struct ModelRecord {
    uint32_t id = 0;
    std::string family;
    uint16_t family_id = 0;
    std::string split;  // train | val | test
    uint64_t seed = 0;
    FeatureParams params;
    std::string rel_path;
};

struct DatasetConfig {
    std::filesystem::path out_dir;
    std::vector<std::string> families;  // default: full catalog
    int per_family = 50;
    int resolution = 64;
    uint64_t seed = 0;
};

/// Generates per_family models per family: parameters drawn per model
/// from a seed derived from (seed, id), binary STL written under
/// out_dir/models/, and a manifest at out_dir/manifest.tsv. Models are
/// assigned to train/val/test splits 70/15/15 by a seeded shuffle.
/// Byte-identical output for identical config and seed.
std::vector<ModelRecord> generate_dataset(const DatasetConfig& config);

/// Manifest serialization: one tab-separated line per model holding id,
/// family name, family id, split tag, seed, parameter list, relative path.
std::string manifest_to_text(const std::vector<ModelRecord>& records);
std::vector<ModelRecord> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ModelRecord>& records,
                    const std::filesystem::path& path);

/// Split sizes used by generate_dataset: 70/15/15 with llround, remainder
/// to test.
void split_sizes(size_t total, size_t& train, size_t& val, size_t& test);

}  // namespace featuredex

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "featuredex/geometry.hpp"

namespace featuredex {

enum class StlFormat { Binary, Ascii };

/// Parses an STL byte buffer, auto-detecting the variant.
///
/// A buffer whose first bytes are "solid" is tried as ASCII; if the facet
/// grammar does not hold it is re-tried as binary, since binary exports
/// frequently start with "solid" in the header. Binary layout: 80-byte
/// header, u32 LE triangle count, then 50 bytes per triangle (normal and
/// three vertices as f32 LE, plus a u16 attribute word).
///
/// Throws Error: Truncated (binary length != 84 + 50*count), Malformed
/// (ASCII grammar violation, message carries the line number), NonFinite
/// (any NaN/Inf coordinate).
TriangleMesh parse_stl(std::span<const uint8_t> bytes);

/// Serializes a mesh. Normals are recomputed from vertex winding
/// (normalized cross(v1-v0, v2-v0), zero when degenerate); attribute
/// words are written as zero. ASCII output uses 9-significant-digit
/// scientific notation.
///
/// Throws Error: Empty (no triangles), NonFinite (any NaN/Inf coordinate).
std::vector<uint8_t> write_stl(const TriangleMesh& mesh, StlFormat format);

/// File conveniences. load_stl sets source_name to the file stem.
TriangleMesh load_stl(const std::filesystem::path& path);
void save_stl(const TriangleMesh& mesh, const std::filesystem::path& path,
              StlFormat format = StlFormat::Binary);

}  // namespace featuredex

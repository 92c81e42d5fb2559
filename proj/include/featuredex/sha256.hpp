#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace featuredex {

using Digest256 = std::array<uint8_t, 32>;

/// SHA-256 of a byte buffer. Used to fingerprint configurations and model
/// files so an index refuses queries computed under different settings.
Digest256 sha256(const void* data, size_t size);
Digest256 sha256(const std::string& s);
Digest256 sha256(const std::vector<uint8_t>& v);

std::string digest_hex(const Digest256& d);

}  // namespace featuredex

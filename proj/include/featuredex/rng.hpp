#pragma once

#include <cstdint>

namespace featuredex {

/// Portable seedable 64-bit generator (SplitMix64).
///
/// State update, applied per draw:
///     state += 0x9E3779B97F4A7C15
///     z = state
///     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///     output = z ^ (z >> 31)
///
/// Every randomized stage of the pipeline (sampling, dataset generation,
/// weight init, shuffles) draws from this generator so that results are
/// reproducible bit-for-bit for a fixed seed, independent of platform.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed = 0) : state_(seed) {}

    uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    /// Uniform double in [0, 1), 53 mantissa bits.
    double next_double() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    /// Uniform index in [0, n). Modulo reduction; the bias of at most
    /// n / 2^64 is irrelevant at the index ranges used here.
    uint64_t next_index(uint64_t n) { return next() % n; }

    /// Output function applied to an arbitrary word (stateless).
    static uint64_t mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Derives an independent child seed for a numbered stream, e.g. one
    /// per model id. derive(seed, a) and derive(seed, b) with a != b give
    /// unrelated sequences.
    static uint64_t derive(uint64_t seed, uint64_t stream) {
        return SplitMix64(seed ^ mix(stream + 0x9E3779B97F4A7C15ULL)).next();
    }

private:
    uint64_t state_;
};

}  // namespace featuredex

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "featuredex/pooling.hpp"

namespace featuredex {

/// Layer widths of the trainable head: a per-point transform
/// in -> h1 -> h2 (ReLU after each), spatial pyramid pooling over the h2
/// features (pooled = h2 * bins), then a dense classifier
/// pooled -> classifier -> families (ReLU hidden, softmax output).
struct NetShape {
    uint32_t in = kDescriptorDims;
    uint32_t h1 = 64;
    uint32_t h2 = 32;
    uint32_t pooled = 0;
    uint32_t classifier = 64;
    uint32_t families = 0;

    size_t n_w1() const { return size_t(h1) * in; }
    size_t n_w2() const { return size_t(h2) * h1; }
    size_t n_w3() const { return size_t(classifier) * pooled; }
    size_t n_w4() const { return size_t(families) * classifier; }

    size_t off_w1() const { return 0; }
    size_t off_b1() const { return n_w1(); }
    size_t off_w2() const { return off_b1() + h1; }
    size_t off_b2() const { return off_w2() + n_w2(); }
    size_t off_w3() const { return off_b2() + h2; }
    size_t off_b3() const { return off_w3() + n_w3(); }
    size_t off_w4() const { return off_b3() + classifier; }
    size_t off_b4() const { return off_w4() + n_w4(); }
    size_t parameter_count() const { return off_b4() + families; }

    bool operator==(const NetShape&) const = default;
};

/// Shape with `pooled` filled in from the pooling config.
NetShape make_net_shape(const SppConfig& scfg, uint32_t families,
                        uint32_t in = kDescriptorDims, uint32_t h1 = 64, uint32_t h2 = 32,
                        uint32_t classifier = 64);

/// Flat parameter vector, kept in double precision for gradient work and
/// quantized to single precision for storage.
struct NetParams {
    NetShape shape;
    std::vector<double> values;  // w1,b1,w2,b2,w3,b3,w4,b4

    /// Glorot-uniform weights, zero biases, deterministic in seed.
    static NetParams init(const NetShape& shape, uint64_t seed);

    /// Rounds every value through f32 so serialization is lossless.
    void quantize_to_f32();

    bool operator==(const NetParams&) const = default;
};

struct ForwardResult {
    Embedding embedding;                 // the SPP output, length shape.pooled
    std::vector<double> probabilities;   // softmax over families
};

/// Full forward pass for one model.
/// Throws Error(ShapeMismatch) when fm width, cloud size, pooled length,
/// or parameter vector length disagree with params.shape.
ForwardResult forward(const NetParams& params, const PointCloud& cloud,
                      const FeatureMatrix& fm, const SppConfig& scfg);

/// Categorical cross entropy: -ln(max(p[true_family], 1e-12)).
double cross_entropy(const std::vector<double>& probabilities, uint16_t true_family);

struct TrainSample {
    uint32_t id = 0;
    uint16_t family = 0;
    PointCloud cloud;
    FeatureMatrix fm;
};

struct TrainConfig {
    uint32_t epochs = 30;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    uint32_t batch = 16;
    uint64_t seed = 0;
};

struct EpochStats {
    double train_loss = 0, train_accuracy = 0;
    double val_loss = 0, val_accuracy = 0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    uint32_t best_epoch = 0;  // zero-based; earliest epoch of the best val accuracy
};

/// One Adam step over a flat parameter vector. `grad` is the (already
/// averaged) gradient; `m` and `v` are the running first/second moment
/// estimates, updated in place; `step` counts from 1 and drives the bias
/// correction:
///     m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g^2
///     w -= lr * (m / (1-b1^step)) / (sqrt(v / (1-b2^step)) + eps)
void adam_update(std::vector<double>& values, const std::vector<double>& grad,
                 std::vector<double>& m, std::vector<double>& v, uint64_t step,
                 const TrainConfig& tcfg);

/// Mini-batch Adam over shuffled epochs. Deterministic for a fixed seed.
/// Returns the parameters of the epoch with the best validation accuracy
/// (earliest on ties), quantized to f32.
/// Throws Error: EmptySplit (empty train/val set, or a family in
/// [0,shape.families) with no training sample), Divergence (non-finite
/// loss), ShapeMismatch.
std::pair<NetParams, TrainHistory> train(const std::vector<TrainSample>& train_set,
                                         const std::vector<TrainSample>& val_set,
                                         const NetShape& shape, const TrainConfig& tcfg,
                                         const SppConfig& scfg);

/// Analytic-vs-central-difference comparison over >= n_checks parameters
/// sampled from every layer; returns the largest relative error, where
/// relative error = |a-n| / max(|a|+|n|, 1e-3).
double grad_check(const NetParams& params, const TrainSample& sample,
                  const SppConfig& scfg, double eps, size_t n_checks, uint64_t seed);

/// FNET byte layout: "FNET", u16 version=1, u16 reserved=0, u32 n_sizes=6,
/// u32 sizes in,h1,h2,pooled,classifier,families, then every parameter as
/// f32 LE in storage order.
std::vector<uint8_t> encode_fnet(const NetParams& params);
NetParams decode_fnet(std::span<const uint8_t> bytes);
void write_fnet(const NetParams& params, const std::filesystem::path& path);
NetParams read_fnet(const std::filesystem::path& path);

}  // namespace featuredex

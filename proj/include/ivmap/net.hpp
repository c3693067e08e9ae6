// SPDX-License-Identifier: Apache-2.0
//
// Dense feed-forward chains with hand-written reverse-mode gradients and Adam.
// Batches are stored column-major: one sample per column.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace ivmap {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint8_t { relu = 0, sigmoid = 1, linear = 2 };

std::string_view to_string(Activation a);

struct LayerSpec {
  int fan_in = 0;
  int fan_out = 0;
  Activation activation = Activation::relu;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Builds the spec chain for widths {w0, w1, ..., wn}: relu on every hidden
/// layer and `output` on the last.
std::vector<LayerSpec> dense_chain(std::span<const int> widths, Activation output);

struct DenseLayer {
  LayerSpec spec;
  Matrix weight;  // fan_out x fan_in
  Vector bias;    // fan_out
};

struct NetParams {
  std::vector<DenseLayer> layers;

  int input_dim() const { return layers.front().spec.fan_in; }
  int output_dim() const { return layers.back().spec.fan_out; }
  std::vector<LayerSpec> specs() const;
  std::size_t parameter_count() const;
};

/// He-uniform weights for relu layers, Glorot-uniform otherwise, zero biases.
/// Throws ShapeMismatch if consecutive layers do not chain.
NetParams init_params(std::span<const LayerSpec> specs, std::uint64_t seed);

/// Post-activation outputs of every layer; activations[0] is the input.
struct ForwardCache {
  std::vector<Matrix> activations;
};

Matrix forward(const NetParams& net, const Matrix& x, ForwardCache* cache = nullptr);
/// Single-sample convenience wrapper.
Vector forward_single(const NetParams& net, const Vector& x);

/// Same shapes as the parameters they belong to.
struct NetGrads {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;

  static NetGrads zeros_like(const NetParams& net);
};

struct BackwardResult {
  NetGrads grads;
  Matrix d_input;  // empty when not requested
};

/// Gradients of sum(d_out .* output) with respect to every parameter and the
/// input. Batch columns are summed; callers scale d_out for a mean.
BackwardResult backward(const NetParams& net, const ForwardCache& cache, const Matrix& d_out,
                        bool want_input_grad = true);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  NetGrads first_moment;
  NetGrads second_moment;
  std::int64_t step = 0;

  static AdamState fresh(const NetParams& net, AdamConfig config = {});
};

/// Bias-corrected Adam update in place.
void adam_step(NetParams& net, const NetGrads& grads, AdamState& state);

/// Versioned binary container: layer specs, weights and biases, Adam state
/// and the seed the parameters were initialised from.
struct NetCheckpoint {
  NetParams params;
  AdamState adam;
  std::uint64_t seed = 0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& os, const NetCheckpoint& ckpt);
/// Throws VersionMismatch on an unknown version, CorruptCheckpoint on any
/// truncation or inconsistency.
NetCheckpoint read_checkpoint(std::istream& is);
void save_checkpoint(const std::filesystem::path& path, const NetCheckpoint& ckpt);
NetCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ivmap

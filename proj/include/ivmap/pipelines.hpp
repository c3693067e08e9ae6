// SPDX-License-Identifier: Apache-2.0
//
// The two stacked paths: curve -> structure (inverse design) and
// structure -> curve (forward prediction).
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ivmap/bridge.hpp"
#include "ivmap/render.hpp"
#include "ivmap/surrogate.hpp"
#include "ivmap/vae.hpp"

namespace ivmap {

struct PassCounts {
  int curve_pre = 2;   // curve-VAE passes on the target before the inverse bridge
  int image_post = 3;  // image-VAE passes on the designed image
  int image_pre = 1;   // image-VAE passes on the input before the forward bridge

  friend bool operator==(const PassCounts&, const PassCounts&) = default;
};

struct TrainedStack {
  VaeModel image_vae;
  VaeModel curve_vae;
  PolyBridge fwd_bridge;  // image latent -> curve latent
  PolyBridge inv_bridge;  // curve latent -> image latent
  PassCounts passes;
};

/// Throws ShapeMismatch when bridge and VAE dimensions disagree, DomainError
/// on negative pass counts.
void validate(const TrainedStack& s);

/// Images as [0, 1] columns (6400 x n) and normalized curves (51 x n).
Matrix image_matrix(std::span<const DeviceImage> images);
Matrix curve_matrix(std::span<const IVCurve> curves);

struct StackConfig {
  VaeArch image_arch = VaeArch::image_default();
  VaeArch curve_arch = VaeArch::curve_default();
  TrainConfig image_train;
  TrainConfig curve_train;
  double fwd_lambda = 1.0;
  double inv_lambda = 1.0;
  PassCounts passes;
};

/// Optimizer moments at the end of training.
struct StackOptimizer {
  AdamState image_encoder;
  AdamState image_decoder;
  AdamState curve_encoder;
  AdamState curve_decoder;
};

struct StackTraining {
  TrainedStack stack;
  StackOptimizer optimizer;
  std::vector<EpochStats> image_trace;
  std::vector<EpochStats> curve_trace;
};

/// Progress hook: which VAE ("image" or "curve") and the finished epoch.
using StackProgress = std::function<void(const std::string&, const EpochStats&)>;

/// Trains both VAEs (initialised from their train seeds), then fits both
/// bridges on the latent means of the training pairs.
StackTraining train_stack(const Matrix& images, const Matrix& curves, const StackConfig& cfg,
                          const StackProgress& progress = {});

DeviceImage inverse_design(const TrainedStack& s, const IVCurve& target);
std::vector<DeviceImage> inverse_design(const TrainedStack& s, std::span<const IVCurve> targets);

/// Designed image plus the parameters read back from it, when readable.
struct DesignResult {
  DeviceImage image;
  std::optional<DeviceParams> params;
  std::string extract_error;
};

DesignResult inverse_design_with_params(const TrainedStack& s, const IVCurve& target);

IVCurve forward_predict(const TrainedStack& s, const DeviceImage& img);
std::vector<IVCurve> forward_predict(const TrainedStack& s, std::span<const DeviceImage> images);

}  // namespace ivmap

// SPDX-License-Identifier: Apache-2.0
//
// A small, quickly trained stack shared by the pipeline-level tests.
#pragma once

#include "ivmap/pipelines.hpp"

namespace ivmap::testing {

inline std::vector<DeviceParams> tiny_devices() { return sample_params(31, 80); }

inline StackConfig tiny_config() {
  StackConfig cfg;
  cfg.image_arch = {kImagePixels, {48}, 6, ReconLoss::bce};
  cfg.curve_arch = {kCurvePoints, {24}, 4, ReconLoss::mse};
  cfg.image_train.epochs = 15;
  cfg.image_train.batch_size = 16;
  cfg.image_train.kl_weight = 1e-3;
  cfg.image_train.rng_seed = 3;
  cfg.curve_train.epochs = 60;
  cfg.curve_train.batch_size = 16;
  cfg.curve_train.kl_weight = 1e-3;
  cfg.curve_train.rng_seed = 4;
  return cfg;
}

inline StackTraining tiny_stack() {
  std::vector<DeviceImage> images;
  std::vector<IVCurve> curves;
  for (const auto& p : tiny_devices()) {
    images.push_back(render(p));
    curves.push_back(simulate_iv(p));
  }
  return train_stack(image_matrix(images), curve_matrix(curves), tiny_config());
}

}  // namespace ivmap::testing

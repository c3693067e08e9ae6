// SPDX-License-Identifier: Apache-2.0
//
// Declarative run configuration shared by the command-line tools.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ivmap/pipelines.hpp"

namespace ivmap {

struct VaeSettings {
  std::vector<int> hidden;
  int latent_dim = 0;
  int epochs = 0;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double kl_warmup_fraction = 0.2;
  double kl_weight = 1.0;
  double final_lr_fraction = 1.0;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t n_train = 2000;
  std::size_t n_test = 200;
  VaeSettings image_vae{{1024, 256}, 30, 200, 64, 1e-3, 0.2, 0.03, 0.01};
  VaeSettings curve_vae{{64, 32}, 10, 400, 16, 1e-3, 0.2, 1e-4, 0.01};
  double fwd_lambda = 1.0;
  double inv_lambda = 1.0;
  PassCounts passes;
  double noise_sigma = kDefaultNoiseDecades;
  std::size_t inverse_targets = 20;

  /// Seeds of the individual stochastic stages, all derived from `seed`.
  std::uint64_t image_seed() const { return seed + 101; }
  std::uint64_t curve_seed() const { return seed + 202; }
  std::uint64_t hand_drawn_seed() const { return seed + 303; }
  std::uint64_t noise_seed() const { return seed + 404; }

  StackConfig stack_config() const;
};

/// Parses JSON text; every key is optional, unknown keys and ill-typed
/// values throw ConfigError.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
/// Canonical JSON with every field spelled out.
std::string to_json(const RunConfig& cfg);
void validate(const RunConfig& cfg);

/// Parses "a,b,c" into curve_pre, image_post, image_pre.
PassCounts parse_pass_counts(const std::string& text);

}  // namespace ivmap

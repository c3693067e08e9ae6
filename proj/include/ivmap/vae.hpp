// SPDX-License-Identifier: Apache-2.0
//
// Variational autoencoders on top of the dense chains in net.hpp.
#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "ivmap/net.hpp"

namespace ivmap {

enum class ReconLoss : std::uint8_t { bce = 0, mse = 1 };

std::string_view to_string(ReconLoss r);
ReconLoss recon_loss_from_string(std::string_view s);

/// Encoder widths input -> hidden... -> 2 * latent; the decoder mirrors them.
struct VaeArch {
  int input_dim = 0;
  std::vector<int> hidden;
  int latent_dim = 0;
  ReconLoss recon = ReconLoss::mse;

  /// 6400 -> 1024 -> 256 -> 30, BCE, sigmoid output.
  static VaeArch image_default();
  /// 51 -> 64 -> 32 -> 10, MSE, linear output.
  static VaeArch curve_default();

  friend bool operator==(const VaeArch&, const VaeArch&) = default;
};

struct VaeModel {
  NetParams encoder;  // emits mu (rows 0..L-1) then log-variance (rows L..2L-1)
  NetParams decoder;
  int latent_dim = 0;
  int input_dim = 0;
  ReconLoss recon = ReconLoss::mse;
};

VaeModel make_vae(const VaeArch& arch, std::uint64_t seed);
VaeArch arch_of(const VaeModel& m);

struct Encoding {
  Matrix mu;      // latent x batch
  Matrix logvar;  // latent x batch
};

Encoding encode(const VaeModel& m, const Matrix& x);
/// Latent means only; the deterministic representation used downstream.
Matrix encode_mean(const VaeModel& m, const Matrix& x);
Matrix decode(const VaeModel& m, const Matrix& z);

/// z = mu + exp(logvar / 2) * eps with eps ~ N(0, 1) drawn from `seed`.
Vector reparameterize(const Vector& mu, const Vector& logvar, std::uint64_t seed);

/// KL(N(mu, exp(logvar)) || N(0, 1)) summed over latent dimensions.
double kl_divergence(const Vector& mu, const Vector& logvar);

inline constexpr double kBceClamp = 1e-7;

/// Summed per-element loss. BCE clamps x_hat to [1e-7, 1 - 1e-7] and throws
/// DomainError when x or x_hat leave [0, 1].
double recon_loss(ReconLoss kind, const Vector& x, const Vector& x_hat);

/// Mean-over-batch loss recon + beta * KL evaluated with explicit noise, and
/// its exact gradients.
struct VaeLossGrad {
  double total = 0.0;
  double recon = 0.0;
  double kl = 0.0;
  NetGrads encoder;
  NetGrads decoder;
};

VaeLossGrad vae_loss_and_grads(const VaeModel& m, const Matrix& x, const Matrix& eps, double beta);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 64;
  double kl_warmup_fraction = 0.2;
  std::uint64_t rng_seed = 1;
  double learning_rate = 1e-3;
  /// Final KL weight reached after the warm-up ramp.
  double kl_weight = 1.0;
  /// Learning rate at the last step as a fraction of learning_rate, reached by
  /// cosine annealing; 1 keeps the rate constant.
  double final_lr_fraction = 1.0;
};

void validate(const TrainConfig& cfg);

struct EpochStats {
  int epoch = 0;
  double total = 0.0;  // mean per-sample loss over the epoch
  double recon = 0.0;
  double kl = 0.0;
  double beta = 0.0;   // KL weight at the end of the epoch
};

struct TrainResult {
  VaeModel model;
  std::vector<EpochStats> trace;
  AdamState encoder_adam;
  AdamState decoder_adam;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Mini-batch Adam on recon + beta(t) KL. beta ramps linearly from 0 to
/// kl_weight over the first kl_warmup_fraction of all steps. Data holds one
/// sample per column. Throws NonFiniteLoss if the loss diverges.
TrainResult train(VaeModel m, const Matrix& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// `passes` rounds of decode(encode_mean(x)); zero passes is the identity.
Matrix autoencode(const VaeModel& m, const Matrix& x, int passes);

}  // namespace ivmap

// SPDX-License-Identifier: Apache-2.0
#include "ivmap/vae.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "ivmap/errors.hpp"

namespace ivmap {

namespace {

std::vector<int> encoder_widths(const VaeArch& a) {
  std::vector<int> w{a.input_dim};
  w.insert(w.end(), a.hidden.begin(), a.hidden.end());
  w.push_back(2 * a.latent_dim);
  return w;
}

std::vector<int> decoder_widths(const VaeArch& a) {
  std::vector<int> w{a.latent_dim};
  w.insert(w.end(), a.hidden.rbegin(), a.hidden.rend());
  w.push_back(a.input_dim);
  return w;
}

void check_rows(const Matrix& x, int rows, const char* what) {
  if (x.rows() != rows) {
    throw ShapeMismatch(std::string(what) + " has " + std::to_string(x.rows()) + " rows, expected " +
                        std::to_string(rows));
  }
}

// Per-column reconstruction loss and its gradient with respect to x_hat.
double recon_value_and_grad(ReconLoss kind, const Matrix& x, const Matrix& x_hat, Matrix* grad) {
  if (kind == ReconLoss::mse) {
    const Matrix diff = x_hat - x;
    if (grad) *grad = 2.0 * diff;
    return diff.squaredNorm();
  }
  const auto xc = x_hat.array().cwiseMax(kBceClamp).cwiseMin(1.0 - kBceClamp);
  const double value = -(x.array() * xc.log() + (1.0 - x.array()) * (1.0 - xc).log()).sum();
  if (grad) {
    const auto inside = (x_hat.array() > kBceClamp) && (x_hat.array() < 1.0 - kBceClamp);
    const Matrix g = ((xc - x.array()) / (xc * (1.0 - xc))).matrix();
    *grad = inside.select(g, 0.0);
  }
  return value;
}

double kl_columns(const Matrix& mu, const Matrix& logvar) {
  return -0.5 * (1.0 + logvar.array() - mu.array().square() - logvar.array().exp()).sum();
}

}  // namespace

std::string_view to_string(ReconLoss r) { return r == ReconLoss::bce ? "bce" : "mse"; }

ReconLoss recon_loss_from_string(std::string_view s) {
  if (s == "bce") return ReconLoss::bce;
  if (s == "mse") return ReconLoss::mse;
  throw DomainError("unknown reconstruction loss '" + std::string(s) + "'");
}

VaeArch VaeArch::image_default() { return {6400, {1024, 256}, 30, ReconLoss::bce}; }

VaeArch VaeArch::curve_default() { return {51, {64, 32}, 10, ReconLoss::mse}; }

VaeModel make_vae(const VaeArch& arch, std::uint64_t seed) {
  if (arch.input_dim < 1 || arch.latent_dim < 1) throw ShapeMismatch("VAE dimensions must be >= 1");
  const Activation out = arch.recon == ReconLoss::bce ? Activation::sigmoid : Activation::linear;
  VaeModel m;
  m.encoder = init_params(dense_chain(encoder_widths(arch), Activation::linear), seed);
  m.decoder = init_params(dense_chain(decoder_widths(arch), out), seed + 0x9e3779b97f4a7c15ULL);
  m.latent_dim = arch.latent_dim;
  m.input_dim = arch.input_dim;
  m.recon = arch.recon;
  return m;
}

VaeArch arch_of(const VaeModel& m) {
  VaeArch a;
  a.input_dim = m.input_dim;
  a.latent_dim = m.latent_dim;
  a.recon = m.recon;
  for (std::size_t i = 0; i + 1 < m.encoder.layers.size(); ++i) {
    a.hidden.push_back(m.encoder.layers[i].spec.fan_out);
  }
  return a;
}

Encoding encode(const VaeModel& m, const Matrix& x) {
  check_rows(x, m.input_dim, "encoder input");
  const Matrix h = forward(m.encoder, x);
  return {h.topRows(m.latent_dim), h.bottomRows(m.latent_dim)};
}

Matrix encode_mean(const VaeModel& m, const Matrix& x) { return encode(m, x).mu; }

Matrix decode(const VaeModel& m, const Matrix& z) {
  check_rows(z, m.latent_dim, "latent input");
  return forward(m.decoder, z);
}

Vector reparameterize(const Vector& mu, const Vector& logvar, std::uint64_t seed) {
  if (mu.size() != logvar.size()) throw ShapeMismatch("mu and logvar lengths differ");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) z[i] = mu[i] + std::exp(0.5 * logvar[i]) * normal(rng);
  return z;
}

double kl_divergence(const Vector& mu, const Vector& logvar) {
  if (mu.size() != logvar.size()) throw ShapeMismatch("mu and logvar lengths differ");
  return kl_columns(mu, logvar);
}

double recon_loss(ReconLoss kind, const Vector& x, const Vector& x_hat) {
  if (x.size() != x_hat.size()) throw ShapeMismatch("x and x_hat lengths differ");
  if (kind == ReconLoss::bce) {
    const bool ok = (x.array() >= 0.0).all() && (x.array() <= 1.0).all() &&
                    (x_hat.array() >= 0.0).all() && (x_hat.array() <= 1.0).all();
    if (!ok) throw DomainError("binary cross-entropy needs x and x_hat in [0, 1]");
  }
  return recon_value_and_grad(kind, x, x_hat, nullptr);
}

VaeLossGrad vae_loss_and_grads(const VaeModel& m, const Matrix& x, const Matrix& eps, double beta) {
  check_rows(x, m.input_dim, "batch");
  check_rows(eps, m.latent_dim, "noise");
  if (eps.cols() != x.cols()) throw ShapeMismatch("noise and batch sizes differ");
  const double inv_batch = 1.0 / static_cast<double>(x.cols());
  const int latent = m.latent_dim;

  ForwardCache enc_cache;
  const Matrix h = forward(m.encoder, x, &enc_cache);
  const auto mu = h.topRows(latent);
  const auto logvar = h.bottomRows(latent);
  const Matrix sigma = (0.5 * logvar.array()).exp().matrix();
  const Matrix z = mu + sigma.cwiseProduct(eps);

  ForwardCache dec_cache;
  const Matrix x_hat = forward(m.decoder, z, &dec_cache);

  VaeLossGrad out;
  Matrix d_xhat;
  out.recon = recon_value_and_grad(m.recon, x, x_hat, &d_xhat) * inv_batch;
  out.kl = kl_columns(mu, logvar) * inv_batch;
  out.total = out.recon + beta * out.kl;

  d_xhat *= inv_batch;
  BackwardResult dec = backward(m.decoder, dec_cache, d_xhat, true);
  out.decoder = std::move(dec.grads);

  Matrix d_h(2 * latent, x.cols());
  d_h.topRows(latent) = dec.d_input + (beta * inv_batch) * mu;
  d_h.bottomRows(latent) =
      (dec.d_input.array() * eps.array() * 0.5 * sigma.array() +
       (beta * inv_batch * 0.5) * (logvar.array().exp() - 1.0))
          .matrix();
  out.encoder = std::move(backward(m.encoder, enc_cache, d_h, false).grads);
  return out;
}

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw DomainError("epochs must be >= 1");
  if (cfg.batch_size < 1) throw DomainError("batch_size must be >= 1");
  if (cfg.kl_warmup_fraction < 0.0 || cfg.kl_warmup_fraction > 1.0) {
    throw DomainError("kl_warmup_fraction must lie in [0, 1]");
  }
  if (cfg.learning_rate < 0.0) throw DomainError("learning_rate must be >= 0");
  if (cfg.kl_weight < 0.0) throw DomainError("kl_weight must be >= 0");
  if (cfg.final_lr_fraction < 0.0 || cfg.final_lr_fraction > 1.0) {
    throw DomainError("final_lr_fraction must lie in [0, 1]");
  }
}

TrainResult train(VaeModel m, const Matrix& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  validate(cfg);
  check_rows(data, m.input_dim, "training data");
  const Eigen::Index n = data.cols();
  if (n == 0) throw ShapeMismatch("training data is empty");

  const AdamConfig adam{cfg.learning_rate, 0.9, 0.999, 1e-8};
  TrainResult res{std::move(m), {}, {}, {}};
  VaeModel& model = res.model;
  res.encoder_adam = AdamState::fresh(model.encoder, adam);
  res.decoder_adam = AdamState::fresh(model.decoder, adam);

  std::mt19937_64 shuffle_rng(cfg.rng_seed);
  std::mt19937_64 noise_rng(cfg.rng_seed ^ 0xa5a5a5a5a5a5a5a5ULL);
  std::normal_distribution<double> normal(0.0, 1.0);

  const Eigen::Index batch = std::min<Eigen::Index>(cfg.batch_size, n);
  const Eigen::Index steps_per_epoch = (n + batch - 1) / batch;
  const double total_steps = static_cast<double>(steps_per_epoch) * cfg.epochs;
  const double warmup_steps = cfg.kl_warmup_fraction * total_steps;

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::int64_t step = 0;
  Matrix xb, eps;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochStats stats;
    stats.epoch = epoch;
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index b = std::min(batch, n - start);
      xb.resize(data.rows(), b);
      for (Eigen::Index j = 0; j < b; ++j) xb.col(j) = data.col(order[start + j]);
      eps.resize(model.latent_dim, b);
      for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = normal(noise_rng);

      const double ramp = warmup_steps > 0.0 ? std::min(1.0, static_cast<double>(step) / warmup_steps) : 1.0;
      const double beta = cfg.kl_weight * ramp;
      VaeLossGrad lg = vae_loss_and_grads(model, xb, eps, beta);
      if (!std::isfinite(lg.total)) {
        throw NonFiniteLoss("loss became " + std::to_string(lg.total) + " at epoch " +
                            std::to_string(epoch) + ", step " + std::to_string(step));
      }
      const double progress = total_steps > 1.0 ? static_cast<double>(step) / (total_steps - 1.0) : 1.0;
      const double anneal = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
      const double lr = cfg.learning_rate * (cfg.final_lr_fraction + (1.0 - cfg.final_lr_fraction) * anneal);
      res.encoder_adam.config.learning_rate = lr;
      res.decoder_adam.config.learning_rate = lr;
      adam_step(model.encoder, lg.encoder, res.encoder_adam);
      adam_step(model.decoder, lg.decoder, res.decoder_adam);

      const double w = static_cast<double>(b);
      stats.total += lg.total * w;
      stats.recon += lg.recon * w;
      stats.kl += lg.kl * w;
      stats.beta = beta;
      ++step;
    }
    stats.total /= static_cast<double>(n);
    stats.recon /= static_cast<double>(n);
    stats.kl /= static_cast<double>(n);
    res.trace.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return res;
}

Matrix autoencode(const VaeModel& m, const Matrix& x, int passes) {
  if (passes < 0) throw DomainError("pass count must be >= 0");
  check_rows(x, m.input_dim, "autoencode input");
  Matrix y = x;
  for (int k = 0; k < passes; ++k) y = decode(m, encode_mean(m, y));
  return y;
}

}  // namespace ivmap

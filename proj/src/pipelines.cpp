// SPDX-License-Identifier: Apache-2.0
#include "ivmap/pipelines.hpp"

#include <string>

#include "ivmap/errors.hpp"

namespace ivmap {

namespace {

void check_dims(const char* what, int got, int want) {
  if (got != want) {
    throw ShapeMismatch(std::string(what) + " is " + std::to_string(got) + ", expected " + std::to_string(want));
  }
}

}  // namespace

void validate(const TrainedStack& s) {
  check_dims("image VAE input", s.image_vae.input_dim, kImagePixels);
  check_dims("curve VAE input", s.curve_vae.input_dim, kCurvePoints);
  check_dims("forward bridge input", s.fwd_bridge.in_dim, s.image_vae.latent_dim);
  check_dims("forward bridge output", s.fwd_bridge.out_dim, s.curve_vae.latent_dim);
  check_dims("inverse bridge input", s.inv_bridge.in_dim, s.curve_vae.latent_dim);
  check_dims("inverse bridge output", s.inv_bridge.out_dim, s.image_vae.latent_dim);
  if (s.passes.curve_pre < 0 || s.passes.image_post < 0 || s.passes.image_pre < 0) {
    throw DomainError("pass counts must be >= 0");
  }
}

Matrix image_matrix(std::span<const DeviceImage> images) {
  Matrix m(kImagePixels, static_cast<Eigen::Index>(images.size()));
  for (std::size_t j = 0; j < images.size(); ++j) {
    for (int k = 0; k < kImagePixels; ++k) m(k, static_cast<Eigen::Index>(j)) = images[j].pixels[k] / 255.0;
  }
  return m;
}

Matrix curve_matrix(std::span<const IVCurve> curves) {
  Matrix m(kCurvePoints, static_cast<Eigen::Index>(curves.size()));
  for (std::size_t j = 0; j < curves.size(); ++j) {
    const auto y = normalize_curve(curves[j]);
    for (int k = 0; k < kCurvePoints; ++k) m(k, static_cast<Eigen::Index>(j)) = y[k];
  }
  return m;
}

StackTraining train_stack(const Matrix& images, const Matrix& curves, const StackConfig& cfg,
                          const StackProgress& progress) {
  if (images.cols() != curves.cols()) throw ShapeMismatch("image and curve counts differ");
  StackTraining out;
  auto hook = [&](const char* name) {
    return [&progress, name](const EpochStats& e) {
      if (progress) progress(name, e);
    };
  };
  TrainResult img = train(make_vae(cfg.image_arch, cfg.image_train.rng_seed), images, cfg.image_train, hook("image"));
  TrainResult crv = train(make_vae(cfg.curve_arch, cfg.curve_train.rng_seed), curves, cfg.curve_train, hook("curve"));

  TrainedStack& s = out.stack;
  s.image_vae = std::move(img.model);
  s.curve_vae = std::move(crv.model);
  s.passes = cfg.passes;
  const Matrix zi = encode_mean(s.image_vae, images);
  const Matrix zc = encode_mean(s.curve_vae, curves);
  s.fwd_bridge = fit_bridge(zi, zc, cfg.fwd_lambda);
  s.inv_bridge = fit_bridge(zc, zi, cfg.inv_lambda);
  validate(s);
  out.optimizer = {std::move(img.encoder_adam), std::move(img.decoder_adam), std::move(crv.encoder_adam),
                   std::move(crv.decoder_adam)};
  out.image_trace = std::move(img.trace);
  out.curve_trace = std::move(crv.trace);
  return out;
}

std::vector<DeviceImage> inverse_design(const TrainedStack& s, std::span<const IVCurve> targets) {
  for (const auto& t : targets) validate(t);
  const Matrix y = autoencode(s.curve_vae, curve_matrix(targets), s.passes.curve_pre);
  const Matrix zi = predict_batch(s.inv_bridge, encode_mean(s.curve_vae, y));
  const Matrix img = autoencode(s.image_vae, decode(s.image_vae, zi), s.passes.image_post);
  std::vector<DeviceImage> out;
  out.reserve(targets.size());
  for (Eigen::Index j = 0; j < img.cols(); ++j) {
    out.push_back(quantize_decoded(std::span<const double>(img.col(j).data(), kImagePixels)));
  }
  return out;
}

DeviceImage inverse_design(const TrainedStack& s, const IVCurve& target) {
  return inverse_design(s, std::span<const IVCurve>(&target, 1)).front();
}

DesignResult inverse_design_with_params(const TrainedStack& s, const IVCurve& target) {
  DesignResult r{inverse_design(s, target), std::nullopt, {}};
  try {
    r.params = extract_params(r.image);
  } catch (const MalformedImage& e) {
    r.extract_error = e.what();
  }
  return r;
}

std::vector<IVCurve> forward_predict(const TrainedStack& s, std::span<const DeviceImage> images) {
  const Matrix x = autoencode(s.image_vae, image_matrix(images), s.passes.image_pre);
  const Matrix zc = predict_batch(s.fwd_bridge, encode_mean(s.image_vae, x));
  const Matrix y = decode(s.curve_vae, zc);
  std::vector<IVCurve> out;
  out.reserve(images.size());
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    out.push_back(denormalize_curve(std::vector<double>(y.col(j).data(), y.col(j).data() + kCurvePoints)));
  }
  return out;
}

IVCurve forward_predict(const TrainedStack& s, const DeviceImage& img) {
  return forward_predict(s, std::span<const DeviceImage>(&img, 1)).front();
}

}  // namespace ivmap

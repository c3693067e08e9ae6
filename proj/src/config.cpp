// SPDX-License-Identifier: Apache-2.0
#include "ivmap/config.hpp"

#include <fstream>
#include <sstream>

#include "ivmap/errors.hpp"
#include "json.hpp"

namespace ivmap {

using nlohmann::ordered_json;

namespace {

template <typename T>
T take(const ordered_json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("key '" + key + "' has the wrong type");
  }
}

void reject_unknown(const std::string& where, const std::string& key) {
  throw ConfigError("unknown key '" + key + "' in " + where);
}

void parse_vae(const ordered_json& j, const std::string& where, VaeSettings& v) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, val] : j.items()) {
    const std::string path = where + "." + key;
    if (key == "hidden") v.hidden = take<std::vector<int>>(val, path);
    else if (key == "latent_dim") v.latent_dim = take<int>(val, path);
    else if (key == "epochs") v.epochs = take<int>(val, path);
    else if (key == "batch_size") v.batch_size = take<int>(val, path);
    else if (key == "learning_rate") v.learning_rate = take<double>(val, path);
    else if (key == "kl_warmup_fraction") v.kl_warmup_fraction = take<double>(val, path);
    else if (key == "kl_weight") v.kl_weight = take<double>(val, path);
    else if (key == "final_lr_fraction") v.final_lr_fraction = take<double>(val, path);
    else reject_unknown(where, key);
  }
}

ordered_json vae_json(const VaeSettings& v) {
  return {{"hidden", v.hidden},
          {"latent_dim", v.latent_dim},
          {"epochs", v.epochs},
          {"batch_size", v.batch_size},
          {"learning_rate", v.learning_rate},
          {"kl_warmup_fraction", v.kl_warmup_fraction},
          {"kl_weight", v.kl_weight},
          {"final_lr_fraction", v.final_lr_fraction}};
}

TrainConfig train_config(const VaeSettings& v, std::uint64_t seed) {
  TrainConfig t;
  t.epochs = v.epochs;
  t.batch_size = v.batch_size;
  t.kl_warmup_fraction = v.kl_warmup_fraction;
  t.rng_seed = seed;
  t.learning_rate = v.learning_rate;
  t.kl_weight = v.kl_weight;
  t.final_lr_fraction = v.final_lr_fraction;
  return t;
}

void validate_vae(const VaeSettings& v, const std::string& where) {
  if (v.latent_dim < 1) throw ConfigError(where + ".latent_dim must be >= 1");
  for (int h : v.hidden) {
    if (h < 1) throw ConfigError(where + ".hidden widths must be >= 1");
  }
  try {
    validate(train_config(v, 0));
  } catch (const DomainError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

StackConfig RunConfig::stack_config() const {
  StackConfig s;
  s.image_arch = {kImagePixels, image_vae.hidden, image_vae.latent_dim, ReconLoss::bce};
  s.curve_arch = {kCurvePoints, curve_vae.hidden, curve_vae.latent_dim, ReconLoss::mse};
  s.image_train = train_config(image_vae, image_seed());
  s.curve_train = train_config(curve_vae, curve_seed());
  s.fwd_lambda = fwd_lambda;
  s.inv_lambda = inv_lambda;
  s.passes = passes;
  return s;
}

RunConfig parse_run_config(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  RunConfig c;
  for (const auto& [key, val] : j.items()) {
    if (key == "seed") c.seed = take<std::uint64_t>(val, key);
    else if (key == "n_train") c.n_train = take<std::size_t>(val, key);
    else if (key == "n_test") c.n_test = take<std::size_t>(val, key);
    else if (key == "image_vae") parse_vae(val, key, c.image_vae);
    else if (key == "curve_vae") parse_vae(val, key, c.curve_vae);
    else if (key == "fwd_lambda") c.fwd_lambda = take<double>(val, key);
    else if (key == "inv_lambda") c.inv_lambda = take<double>(val, key);
    else if (key == "noise_sigma") c.noise_sigma = take<double>(val, key);
    else if (key == "inverse_targets") c.inverse_targets = take<std::size_t>(val, key);
    else if (key == "passes") {
      if (!val.is_object()) throw ConfigError("passes must be an object");
      for (const auto& [pk, pv] : val.items()) {
        if (pk == "curve_pre") c.passes.curve_pre = take<int>(pv, "passes." + pk);
        else if (pk == "image_post") c.passes.image_post = take<int>(pv, "passes." + pk);
        else if (pk == "image_pre") c.passes.image_pre = take<int>(pv, "passes." + pk);
        else reject_unknown("passes", pk);
      }
    } else {
      reject_unknown("configuration", key);
    }
  }
  validate(c);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_run_config(ss.str());
}

std::string to_json(const RunConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["n_train"] = c.n_train;
  j["n_test"] = c.n_test;
  j["image_vae"] = vae_json(c.image_vae);
  j["curve_vae"] = vae_json(c.curve_vae);
  j["fwd_lambda"] = c.fwd_lambda;
  j["inv_lambda"] = c.inv_lambda;
  j["passes"] = {{"curve_pre", c.passes.curve_pre},
                 {"image_post", c.passes.image_post},
                 {"image_pre", c.passes.image_pre}};
  j["noise_sigma"] = c.noise_sigma;
  j["inverse_targets"] = c.inverse_targets;
  return j.dump(2) + "\n";
}

void validate(const RunConfig& c) {
  if (c.n_train < 1 || c.n_test < 1) throw ConfigError("n_train and n_test must be >= 1");
  validate_vae(c.image_vae, "image_vae");
  validate_vae(c.curve_vae, "curve_vae");
  if (!(c.fwd_lambda >= 0.0) || !(c.inv_lambda >= 0.0)) throw ConfigError("ridge weights must be >= 0");
  if (c.passes.curve_pre < 0 || c.passes.image_post < 0 || c.passes.image_pre < 0) {
    throw ConfigError("pass counts must be >= 0");
  }
  if (!(c.noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (c.inverse_targets < 2) throw ConfigError("inverse_targets must be >= 2");
}

PassCounts parse_pass_counts(const std::string& text) {
  PassCounts p;
  int* slots[] = {&p.curve_pre, &p.image_post, &p.image_pre};
  std::stringstream ss(text);
  std::string part;
  int n = 0;
  while (std::getline(ss, part, ',')) {
    if (n == 3) throw ConfigError("--passes takes three counts, got more in '" + text + "'");
    std::size_t used = 0;
    int v = -1;
    try {
      v = std::stoi(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != part.size() || part.empty() || v < 0) {
      throw ConfigError("--passes entries must be non-negative integers, got '" + part + "'");
    }
    *slots[n++] = v;
  }
  if (n != 3) throw ConfigError("--passes takes three counts a,b,c, got '" + text + "'");
  return p;
}

}  // namespace ivmap

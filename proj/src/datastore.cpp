// SPDX-License-Identifier: Apache-2.0
#include "ivmap/datastore.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "ivmap/errors.hpp"
#include "json.hpp"

namespace ivmap {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string item_stem(int id) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05d", id);
  return buf;
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
  if (!os) throw IoError("failed writing " + p.string());
}

ordered_json params_json(const DeviceParams& p) {
  return {{"l_g", p.l_g}, {"x_j", p.x_j}, {"l_sp", p.l_sp}, {"t_poly", p.t_poly}, {"t_sub", p.t_sub}};
}

DeviceParams params_from_json(const ordered_json& j) {
  return {j.at("l_g").get<double>(), j.at("x_j").get<double>(), j.at("l_sp").get<double>(),
          j.at("t_poly").get<double>(), j.at("t_sub").get<double>()};
}

ordered_json arch_json(const VaeModel& m) {
  const VaeArch a = arch_of(m);
  return {{"input_dim", a.input_dim},
          {"hidden", a.hidden},
          {"latent_dim", a.latent_dim},
          {"recon", std::string(to_string(a.recon))}};
}

void save_bridge_file(const fs::path& p, const PolyBridge& b) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cannot open " + p.string() + " for writing");
  write_bridge(os, b);
}

PolyBridge load_bridge_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw CorruptCheckpoint("missing bridge file " + p.string());
  return read_bridge(is);
}

NetParams load_net(const fs::path& p) {
  if (!fs::exists(p)) throw CorruptCheckpoint("missing checkpoint " + p.string());
  return load_checkpoint(p).params;
}

VaeModel vae_from(const ordered_json& meta, NetParams encoder, NetParams decoder) {
  VaeModel m;
  m.input_dim = meta.at("input_dim").get<int>();
  m.latent_dim = meta.at("latent_dim").get<int>();
  m.recon = recon_loss_from_string(meta.at("recon").get<std::string>());
  m.encoder = std::move(encoder);
  m.decoder = std::move(decoder);
  const auto hidden = meta.at("hidden").get<std::vector<int>>();
  std::vector<int> enc{m.input_dim};
  enc.insert(enc.end(), hidden.begin(), hidden.end());
  enc.push_back(2 * m.latent_dim);
  std::vector<int> dec{m.latent_dim};
  dec.insert(dec.end(), hidden.rbegin(), hidden.rend());
  dec.push_back(m.input_dim);
  const Activation out = m.recon == ReconLoss::bce ? Activation::sigmoid : Activation::linear;
  if (m.encoder.specs() != dense_chain(enc, Activation::linear) || m.decoder.specs() != dense_chain(dec, out)) {
    throw CorruptCheckpoint("checkpoint layers do not match the recorded architecture");
  }
  return m;
}

}  // namespace

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < manifest.items.size(); ++i) {
    if (manifest.items[i].split == s) out.push_back(i);
  }
  return out;
}

DatasetManifest generate_dataset(std::size_t n_train, std::size_t n_test, std::uint64_t seed,
                                 const fs::path& out_dir) {
  if (n_train < 1 || n_test < 1) throw DomainError("dataset needs at least one train and one test item");
  ensure_dir(out_dir / "images");
  ensure_dir(out_dir / "curves");
  DatasetManifest m;
  m.n_train = n_train;
  m.n_test = n_test;
  m.seed = seed;
  const auto params = sample_params(seed, n_train + n_test);
  ordered_json items = ordered_json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    ManifestItem it;
    it.id = static_cast<int>(i);
    it.split = i < n_train ? Split::train : Split::test;
    it.params = params[i];
    it.image_file = "images/" + item_stem(it.id) + ".png";
    it.curve_file = "curves/" + item_stem(it.id) + ".csv";
    save_png(out_dir / it.image_file, render(it.params));
    save_curve_csv(out_dir / it.curve_file, simulate_iv(it.params));
    items.push_back({{"id", it.id},
                     {"split", it.split == Split::train ? "train" : "test"},
                     {"params", params_json(it.params)},
                     {"image", it.image_file},
                     {"curve", it.curve_file}});
    m.items.push_back(std::move(it));
  }
  ordered_json j;
  j["format"] = "ivmap-dataset";
  j["version"] = m.version;
  j["seed"] = seed;
  j["n_train"] = n_train;
  j["n_test"] = n_test;
  j["items"] = std::move(items);
  write_text(out_dir / "manifest.json", j.dump(1) + "\n");
  return m;
}

DatasetManifest load_manifest(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw CorruptDataset("missing manifest.json in " + dir.string());
  DatasetManifest m;
  try {
    const ordered_json j = ordered_json::parse(is);
    if (j.at("format") != "ivmap-dataset") throw CorruptDataset("manifest format is not ivmap-dataset");
    m.version = j.at("version").get<int>();
    if (m.version != kDatasetVersion) {
      throw CorruptDataset("manifest version " + std::to_string(m.version) + " is not supported");
    }
    m.seed = j.at("seed").get<std::uint64_t>();
    m.n_train = j.at("n_train").get<std::size_t>();
    m.n_test = j.at("n_test").get<std::size_t>();
    for (const auto& e : j.at("items")) {
      ManifestItem it;
      it.id = e.at("id").get<int>();
      const std::string split = e.at("split").get<std::string>();
      if (split != "train" && split != "test") {
        throw CorruptDataset("item " + std::to_string(it.id) + ": unknown split '" + split + "'");
      }
      it.split = split == "train" ? Split::train : Split::test;
      it.params = params_from_json(e.at("params"));
      it.image_file = e.at("image").get<std::string>();
      it.curve_file = e.at("curve").get<std::string>();
      m.items.push_back(std::move(it));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptDataset(std::string("unreadable manifest: ") + e.what());
  }

  if (m.items.size() != m.n_train + m.n_test) {
    throw CorruptDataset("manifest lists " + std::to_string(m.items.size()) + " items but counts sum to " +
                         std::to_string(m.n_train + m.n_test));
  }
  std::size_t train = 0;
  std::set<std::string> files;
  std::set<int> ids;
  for (const auto& it : m.items) {
    if (it.split == Split::train) ++train;
    if (!ids.insert(it.id).second) throw CorruptDataset("item " + std::to_string(it.id) + ": duplicate id");
    if (!files.insert(it.image_file).second || !files.insert(it.curve_file).second) {
      throw CorruptDataset("item " + std::to_string(it.id) + ": duplicate file name");
    }
  }
  if (train != m.n_train) {
    throw CorruptDataset("manifest has " + std::to_string(train) + " train items, header says " +
                         std::to_string(m.n_train));
  }
  return m;
}

Dataset load_dataset(const fs::path& dir) {
  Dataset d;
  d.manifest = load_manifest(dir);
  for (const auto& it : d.manifest.items) {
    const std::string tag = "item " + std::to_string(it.id) + ": ";
    const fs::path img = dir / it.image_file;
    const fs::path crv = dir / it.curve_file;
    if (!fs::exists(img)) throw CorruptDataset(tag + "missing " + it.image_file);
    if (!fs::exists(crv)) throw CorruptDataset(tag + "missing " + it.curve_file);
    try {
      d.images.push_back(load_png(img));
      d.curves.push_back(load_curve_csv(crv));
    } catch (const Error& e) {
      throw CorruptDataset(tag + e.what());
    }
  }
  return d;
}

std::string config_digest(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void save_stack(const fs::path& dir, const TrainedStack& s, const StackMeta& meta, const StackOptimizer* opt) {
  validate(s);
  const fs::path root = dir / "models";
  ensure_dir(root);
  auto save_net = [&](const char* name, const NetParams& p, const AdamState* adam) {
    save_checkpoint(root / name, {p, adam ? *adam : AdamState::fresh(p), meta.seed});
  };
  save_net("image_encoder.ckpt", s.image_vae.encoder, opt ? &opt->image_encoder : nullptr);
  save_net("image_decoder.ckpt", s.image_vae.decoder, opt ? &opt->image_decoder : nullptr);
  save_net("curve_encoder.ckpt", s.curve_vae.encoder, opt ? &opt->curve_encoder : nullptr);
  save_net("curve_decoder.ckpt", s.curve_vae.decoder, opt ? &opt->curve_decoder : nullptr);
  save_bridge_file(root / "fwd_bridge.bin", s.fwd_bridge);
  save_bridge_file(root / "inv_bridge.bin", s.inv_bridge);

  ordered_json j;
  j["format"] = "ivmap-stack";
  j["version"] = kStackVersion;
  j["seed"] = meta.seed;
  j["config_digest"] = meta.config_digest;
  j["image_vae"] = arch_json(s.image_vae);
  j["curve_vae"] = arch_json(s.curve_vae);
  j["normalization"] = {{"log_current_floor", kLogCurrentFloor}, {"log_current_span", kLogCurrentSpan}};
  j["passes"] = {{"curve_pre", s.passes.curve_pre},
                 {"image_post", s.passes.image_post},
                 {"image_pre", s.passes.image_pre}};
  j["fwd_lambda"] = meta.fwd_lambda;
  j["inv_lambda"] = meta.inv_lambda;
  write_text(root / "stack.json", j.dump(2) + "\n");
}

LoadedStack load_stack(const fs::path& dir) {
  const fs::path root = dir / "models";
  std::ifstream is(root / "stack.json");
  if (!is) throw CorruptCheckpoint("missing " + (root / "stack.json").string());
  LoadedStack out;
  try {
    const ordered_json j = ordered_json::parse(is);
    if (j.at("format") != "ivmap-stack") throw CorruptCheckpoint("stack.json format is not ivmap-stack");
    const int version = j.at("version").get<int>();
    if (version != kStackVersion) {
      throw VersionMismatch("stack version " + std::to_string(version) + ", this build reads " +
                            std::to_string(kStackVersion));
    }
    const auto& norm = j.at("normalization");
    if (norm.at("log_current_floor").get<double>() != kLogCurrentFloor ||
        norm.at("log_current_span").get<double>() != kLogCurrentSpan) {
      throw VersionMismatch("stack was trained with a different curve normalization");
    }
    out.meta.seed = j.at("seed").get<std::uint64_t>();
    out.meta.config_digest = j.at("config_digest").get<std::string>();
    out.meta.fwd_lambda = j.at("fwd_lambda").get<double>();
    out.meta.inv_lambda = j.at("inv_lambda").get<double>();
    TrainedStack& s = out.stack;
    s.image_vae = vae_from(j.at("image_vae"), load_net(root / "image_encoder.ckpt"),
                           load_net(root / "image_decoder.ckpt"));
    s.curve_vae = vae_from(j.at("curve_vae"), load_net(root / "curve_encoder.ckpt"),
                           load_net(root / "curve_decoder.ckpt"));
    const auto& p = j.at("passes");
    s.passes = {p.at("curve_pre").get<int>(), p.at("image_post").get<int>(), p.at("image_pre").get<int>()};
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(std::string("unreadable stack.json: ") + e.what());
  } catch (const DomainError& e) {
    throw CorruptCheckpoint(e.what());
  }
  out.stack.fwd_bridge = load_bridge_file(root / "fwd_bridge.bin");
  out.stack.inv_bridge = load_bridge_file(root / "inv_bridge.bin");
  try {
    validate(out.stack);
  } catch (const Error& e) {
    throw CorruptCheckpoint(e.what());
  }
  return out;
}

}  // namespace ivmap

// SPDX-License-Identifier: Apache-2.0
//
// ivmap: dataset generation, stack training, forward prediction, inverse
// design and evaluation from the command line.
#include <malloc.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ivmap/config.hpp"
#include "ivmap/datastore.hpp"
#include "ivmap/errors.hpp"
#include "ivmap/evaluation.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace ivmap;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string mode = "forward";
  std::string passes;
  std::vector<std::string> inputs;
};

RunConfig resolve_config(const Options& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (!o.passes.empty()) c.passes = parse_pass_counts(o.passes);
  validate(c);
  return c;
}

fs::path out_dir(const Options& o) {
  if (o.out.empty()) throw ConfigError("--out is required");
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw IoError("cannot create " + o.out + ": " + ec.message());
  return o.out;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
  if (!os) throw IoError("failed writing " + p.string());
}

void write_trace(const fs::path& p, const std::vector<EpochStats>& trace) {
  std::ostringstream os;
  os << "epoch,total,recon,kl,beta\n";
  char buf[160];
  for (const auto& e : trace) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g,%.10g\n", e.epoch, e.total, e.recon, e.kl, e.beta);
    os << buf;
  }
  write_text(p, os.str());
}

// Stack with pass counts optionally overridden from the command line.
LoadedStack open_stack(const Options& o, const fs::path& dir) {
  LoadedStack s = load_stack(dir);
  if (!o.passes.empty()) s.stack.passes = parse_pass_counts(o.passes);
  return s;
}

nlohmann::ordered_json params_json(const DeviceParams& p) {
  return {{"l_g", p.l_g}, {"x_j", p.x_j}, {"l_sp", p.l_sp}, {"t_poly", p.t_poly}, {"t_sub", p.t_sub}};
}

int cmd_gen(const Options& o) {
  const RunConfig c = resolve_config(o);
  const fs::path out = out_dir(o);
  const DatasetManifest m = generate_dataset(c.n_train, c.n_test, c.seed, out);
  std::cout << "wrote " << m.items.size() << " devices (" << m.n_train << " train, " << m.n_test << " test) to "
            << out.string() << "\n";
  return 0;
}

int cmd_train(const Options& o) {
  const RunConfig c = resolve_config(o);
  const fs::path out = out_dir(o);
  const Dataset d = load_dataset(o.inputs.at(0));
  std::vector<DeviceImage> images;
  std::vector<IVCurve> curves;
  for (std::size_t i : d.indices(Split::train)) {
    images.push_back(d.images[i]);
    curves.push_back(d.curves[i]);
  }
  const StackTraining t = train_stack(image_matrix(images), curve_matrix(curves), c.stack_config(),
                                      [](const std::string& which, const EpochStats& e) {
                                        std::cerr << which << " epoch " << e.epoch + 1 << " loss " << e.total
                                                  << " kl " << e.kl << "\n";
                                      });
  const std::string cfg_text = to_json(c);
  save_stack(out, t.stack, {c.seed, config_digest(cfg_text), c.fwd_lambda, c.inv_lambda}, &t.optimizer);
  write_text(out / "config.json", cfg_text);
  write_trace(out / "image_loss.csv", t.image_trace);
  write_trace(out / "curve_loss.csv", t.curve_trace);
  std::cout << "trained stack written to " << out.string() << " (config " << config_digest(cfg_text) << ")\n";
  return 0;
}

int cmd_predict(const Options& o) {
  const LoadedStack s = open_stack(o, o.inputs.at(0));
  const fs::path out = out_dir(o);
  const DeviceImage img = load_png(o.inputs.at(1));
  EvalReport r;
  EvalRecord rec;
  rec.predicted = forward_predict(s.stack, img);
  rec.reference = rec.predicted;
  try {
    rec.params = clamp_to_ranges(extract_params(img));
    rec.reference = simulate_iv(rec.params);
  } catch (const MalformedImage& e) {
    std::cerr << "note: no oracle overlay, " << e.what() << "\n";
  }
  r.records.push_back(rec);
  save_curve_csv(out / "predicted.csv", rec.predicted);
  write_text(out / "predicted.svg", curve_overlay_svg(r, 1));
  const FiguresOfMerit f = extract_fom(rec.predicted);
  std::printf("i_off %.6e A  i_on %.6e A\n", f.i_off, f.i_on);
  return 0;
}

int cmd_invert(const Options& o) {
  const LoadedStack s = open_stack(o, o.inputs.at(0));
  const fs::path out = out_dir(o);
  const IVCurve target = load_curve_csv(o.inputs.at(1));
  const DesignResult r = inverse_design_with_params(s.stack, target);
  save_png(out / "design.png", r.image);
  nlohmann::ordered_json j;
  const FiguresOfMerit tf = extract_fom(target);
  j["target"] = {{"i_off", tf.i_off}, {"i_on", tf.i_on}};
  if (r.params) {
    const FiguresOfMerit df = extract_fom(simulate_iv(clamp_to_ranges(*r.params)));
    j["params"] = params_json(*r.params);
    j["design"] = {{"i_off", df.i_off}, {"i_on", df.i_on}};
  } else {
    j["params"] = nullptr;
    j["extract_error"] = r.extract_error;
  }
  write_text(out / "design_params.json", j.dump(2) + "\n");
  if (r.params) {
    std::printf("l_g %g  x_j %g  l_sp %g  t_poly %g  t_sub %g (nm)\n", r.params->l_g, r.params->x_j, r.params->l_sp,
                r.params->t_poly, r.params->t_sub);
  } else {
    std::printf("design image written; parameters unreadable: %s\n", r.extract_error.c_str());
  }
  return 0;
}

int cmd_eval(const Options& o) {
  const RunConfig c = resolve_config(o);
  const LoadedStack s = open_stack(o, o.inputs.at(0));
  const fs::path out = out_dir(o);
  const DatasetManifest m = load_manifest(o.inputs.at(1));
  std::vector<EvalDevice> devices;
  for (const auto& it : m.items) {
    if (it.split == Split::test) devices.push_back({it.id, it.params});
  }
  EvalReport r;
  if (o.mode == "forward" || o.mode == "forward-hand-drawn") {
    r = eval_forward(s.stack, devices, o.mode == "forward-hand-drawn", c.hand_drawn_seed());
  } else if (o.mode == "inverse") {
    if (devices.size() > c.inverse_targets) devices.resize(c.inverse_targets);
    r = eval_inverse(s.stack, devices, c.noise_sigma, c.noise_seed());
  } else {
    throw ConfigError("unknown --mode '" + o.mode + "' (forward, forward-hand-drawn, inverse)");
  }
  r.meta.n_train = m.n_train;
  r.meta.seed = s.meta.seed;
  r.meta.config_digest = s.meta.config_digest;
  emit_report(r, out);
  std::printf("%s: R2 log10 i_on %.4f  log10 i_off %.4f  (%zu devices, %d excluded)\n", r.meta.mode.c_str(),
              r.r2_ion, r.r2_ioff, r.records.size(), r.excluded);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // keep large training buffers on the heap instead of remapping them every step
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"Stacked-VAE structure <-> I_D-V_G mapping with an analytic device oracle"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub, bool needs_config) {
    if (needs_config) {
      sub->add_option("--config", o.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
      sub->add_option("--seed", o.seed, "Override the configuration seed");
    }
    sub->add_option("--out", o.out, "Output directory")->required();
    sub->add_option("--passes", o.passes, "Pass counts curve_pre,image_post,image_pre");
  };

  auto* gen = app.add_subcommand("gen", "Generate a dataset");
  common(gen, true);
  auto* train = app.add_subcommand("train", "Train both VAEs and fit both bridges");
  common(train, true);
  train->add_option("dataset", o.inputs, "Dataset directory")->required()->expected(1);
  auto* predict = app.add_subcommand("predict", "Forward path: structure image to curve");
  common(predict, false);
  predict->add_option("inputs", o.inputs, "STACK_DIR IMAGE.png")->required()->expected(2);
  auto* invert = app.add_subcommand("invert", "Inverse path: target curve to structure image");
  common(invert, false);
  invert->add_option("inputs", o.inputs, "STACK_DIR CURVE.csv")->required()->expected(2);
  auto* eval = app.add_subcommand("eval", "Score a stack on a dataset's test split");
  common(eval, true);
  eval->add_option("inputs", o.inputs, "STACK_DIR DATASET_DIR")->required()->expected(2);
  eval->add_option("--mode", o.mode, "forward | forward-hand-drawn | inverse");

  CLI11_PARSE(app, argc, argv);
  try {
    if (gen->parsed()) return cmd_gen(o);
    if (train->parsed()) return cmd_train(o);
    if (predict->parsed()) return cmd_predict(o);
    if (invert->parsed()) return cmd_invert(o);
    if (eval->parsed()) return cmd_eval(o);
  } catch (const std::exception& e) {
    std::cerr << "ivmap: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

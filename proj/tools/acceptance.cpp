// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance run on the seed-pinned desk-scale dataset. Prints one
// PASS/FAIL line per criterion and exits nonzero if any criterion fails.
#include <malloc.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "ivmap/config.hpp"
#include "ivmap/datastore.hpp"
#include "ivmap/errors.hpp"
#include "ivmap/evaluation.hpp"

namespace fs = std::filesystem;
using namespace ivmap;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("[%s] criterion %d: %s | %s\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// --- gradient checks ---------------------------------------------------------

Matrix normal_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

struct GradTally {
  long checked = 0;
  long bad = 0;
  double worst = 0.0;

  void compare(double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    const double rel = std::abs(analytic - numeric) / scale;
    worst = std::max(worst, rel);
    ++checked;
    if (rel > 1e-4) ++bad;
  }
};

// Perturbs every parameter of `net` and compares the central difference of
// `objective` with the analytic gradient.
void sweep(NetParams& net, const NetGrads& g, const std::function<double()>& objective, GradTally& t) {
  const double h = 1e-5;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto probe = [&](double& p, double analytic) {
      const double saved = p;
      p = saved + h;
      const double up = objective();
      p = saved - h;
      const double down = objective();
      p = saved;
      t.compare(analytic, (up - down) / (2 * h));
    };
    for (int i = 0; i < net.layers[l].weight.size(); ++i) probe(net.layers[l].weight.data()[i], g.weight[l].data()[i]);
    for (int i = 0; i < net.layers[l].bias.size(); ++i) probe(net.layers[l].bias[i], g.bias[l][i]);
  }
}

GradTally gradient_checks() {
  GradTally t;
  std::mt19937_64 rng(2024);
  const Activation acts[] = {Activation::relu, Activation::sigmoid, Activation::linear};
  for (Activation hidden : acts) {
    for (Activation out : acts) {
      const std::vector<LayerSpec> specs = {{6, 11, hidden}, {11, 7, hidden}, {7, 3, out}};
      NetParams net = init_params(specs, rng());
      for (auto& l : net.layers) l.bias = normal_matrix(static_cast<int>(l.bias.size()), 1, rng, 0.1).col(0);
      const Matrix x = normal_matrix(6, 4, rng);
      const Matrix w = normal_matrix(3, 4, rng);
      ForwardCache cache;
      forward(net, x, &cache);
      const BackwardResult res = backward(net, cache, w);
      auto obj = [&] { return (forward(net, x).array() * w.array()).sum(); };
      sweep(net, res.grads, obj, t);
      Matrix xp = x;
      for (int i = 0; i < x.size(); ++i) {
        xp.data()[i] = x.data()[i] + 1e-5;
        const double up = (forward(net, xp).array() * w.array()).sum();
        xp.data()[i] = x.data()[i] - 1e-5;
        const double down = (forward(net, xp).array() * w.array()).sum();
        xp.data()[i] = x.data()[i];
        t.compare(res.d_input.data()[i], (up - down) / 2e-5);
      }
    }
  }
  // full VAE objective (reconstruction + KL) with frozen reparameterization noise
  for (ReconLoss kind : {ReconLoss::mse, ReconLoss::bce}) {
    VaeModel m = make_vae({8, {9, 5}, 2, kind}, rng());
    for (auto* net : {&m.encoder, &m.decoder}) {
      for (auto& l : net->layers) l.bias = normal_matrix(static_cast<int>(l.bias.size()), 1, rng, 0.1).col(0);
    }
    std::uniform_real_distribution<double> u(0.05, 0.95);
    Matrix x(8, 5);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
    const Matrix eps = normal_matrix(2, 5, rng);
    const VaeLossGrad g = vae_loss_and_grads(m, x, eps, 0.6);
    auto obj = [&] { return vae_loss_and_grads(m, x, eps, 0.6).total; };
    sweep(m.encoder, g.encoder, obj, t);
    sweep(m.decoder, g.decoder, obj, t);
  }
  return t;
}

// --- closed forms ------------------------------------------------------------

struct ClosedForm {
  std::string name;
  double got;
  double want;
};

std::vector<ClosedForm> closed_forms() {
  const std::vector<double> t{1.0, 2.0, 3.0};
  return {
      {"KL(0,0)", kl_divergence(Vector::Zero(1), Vector::Zero(1)), 0.0},
      {"KL([1],[0])", kl_divergence(Vector::Ones(1), Vector::Zero(1)), 0.5},
      {"BCE([1],[0.5])", recon_loss(ReconLoss::bce, Vector::Ones(1), Vector::Constant(1, 0.5)), std::log(2.0)},
      {"C(33,3)", static_cast<double>(poly_feature_count(30)), 5456.0},
      {"|features(30)|", static_cast<double>(poly_features(Vector::Zero(30)).size()), 5456.0},
      {"R2 exact", r_squared(t, t), 1.0},
      {"R2 mean", r_squared(t, std::vector<double>{2.0, 2.0, 2.0}), 0.0},
      {"R2 [1,2,4]", r_squared(t, std::vector<double>{1.0, 2.0, 4.0}), 0.5},
  };
}

// --- helpers over the trained stack -------------------------------------------

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double log_ion(const IVCurve& c) { return std::log10(extract_fom(c).i_on); }

}  // namespace

int main(int argc, char** argv) {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"Acceptance run"};
  std::string work = "acceptance_work";
  std::string config_path;
  int image_epochs = 30;
  app.add_option("--work", work, "Scratch directory for the dataset, stack and reports");
  app.add_option("--config", config_path, "Run configuration (defaults to the desk-scale setup)");
  app.add_option("--image-epochs", image_epochs, "Image-VAE epochs when no config is given");
  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg;
    if (!config_path.empty()) {
      cfg = load_run_config(config_path);
    } else {
      cfg.image_vae.epochs = image_epochs;
    }
    validate(cfg);
    const fs::path root = work;
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string cfg_text = to_json(cfg);
    std::printf("config %s: %zu train / %zu test, seed %llu, image epochs %d, curve epochs %d\n",
                config_digest(cfg_text).c_str(), cfg.n_train, cfg.n_test,
                static_cast<unsigned long long>(cfg.seed), cfg.image_vae.epochs, cfg.curve_vae.epochs);
    std::fflush(stdout);

    // criteria that need no training
    {
      const GradTally g = gradient_checks();
      report(5, g.checked > 0 && g.bad == 0, "gradients match central differences (rel 1e-4)",
             std::to_string(g.checked) + " partials, " + std::to_string(g.bad) + " off, worst rel " +
                 fmt("%.2e", g.worst));
    }
    {
      bool ok = true;
      std::string detail;
      for (const auto& c : closed_forms()) {
        const bool hit = std::abs(c.got - c.want) <= 1e-12;
        ok = ok && hit;
        if (!hit) detail += c.name + "=" + fmt("%.15g", c.got) + " ";
      }
      report(6, ok, "closed-form values exact to 1e-12", ok ? "KL, BCE, feature count and R2 cases all exact" : detail);
    }
    {
      std::mt19937_64 rng(77);
      const int in = 4, out = 3;
      const Matrix truth = normal_matrix(out, static_cast<int>(poly_feature_count(in)), rng);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      Matrix xs(in, 400);
      for (int i = 0; i < xs.size(); ++i) xs.data()[i] = u(rng);
      const PolyBridge b = fit_bridge(xs, truth * poly_feature_matrix(xs), 0.0);
      const double rel = (b.raw_coefficients() - truth).norm() / truth.norm();
      report(7, rel < 1e-6, "cubic bridge recovers a known map with lambda = 0",
             "relative coefficient error " + fmt("%.3e", rel));
    }

    // desk-scale dataset and training
    const auto t_start = Clock::now();
    const fs::path data_dir = root / "dataset";
    generate_dataset(cfg.n_train, cfg.n_test, cfg.seed, data_dir);
    const Dataset data = load_dataset(data_dir);
    const double t_gen = seconds_since(t_start);

    std::vector<DeviceImage> train_images;
    std::vector<IVCurve> train_curves;
    std::vector<EvalDevice> test_devices;
    for (std::size_t i : data.indices(Split::train)) {
      train_images.push_back(data.images[i]);
      train_curves.push_back(data.curves[i]);
    }
    for (std::size_t i : data.indices(Split::test)) {
      test_devices.push_back({data.manifest.items[i].id, data.manifest.items[i].params});
    }

    const auto t_train0 = Clock::now();
    int last_logged = -1;
    const StackTraining trained =
        train_stack(image_matrix(train_images), curve_matrix(train_curves), cfg.stack_config(),
                    [&](const std::string& which, const EpochStats& e) {
                      if (which == "image" && (e.epoch % 10 == 9 || e.epoch == 0) && e.epoch != last_logged) {
                        last_logged = e.epoch;
                        std::printf("  image VAE epoch %d: loss %.2f (recon %.2f, kl %.2f), %.0f s\n", e.epoch + 1,
                                    e.total, e.recon, e.kl, seconds_since(t_train0));
                        std::fflush(stdout);
                      }
                    });
    const TrainedStack& stack = trained.stack;
    const double t_train = seconds_since(t_train0);

    const EvalReport fwd = eval_forward(stack, test_devices, false);
    const double t_total = seconds_since(t_start);
    report(1, fwd.r2_ion >= 0.90 && fwd.r2_ioff >= 0.90 && t_total <= 1800.0,
           "forward prediction, clean images: R2 >= 0.90 on both, <= 30 min",
           fmt("R2 i_on %.4f, R2 i_off %.4f", fwd.r2_ion, fwd.r2_ioff) + ", " +
               std::to_string(fwd.records.size()) + " test devices, " +
               fmt("%.0f s (data %.0f s, training %.0f s)", t_total, t_gen, t_train));

    const EvalReport hand = eval_forward(stack, test_devices, true, cfg.hand_drawn_seed());
    report(2, hand.r2_ion >= 0.85 && hand.r2_ioff >= 0.85, "forward prediction, hand-drawn images: R2 >= 0.85",
           fmt("R2 i_on %.4f, R2 i_off %.4f", hand.r2_ion, hand.r2_ioff));

    std::vector<EvalDevice> targets(test_devices.begin(),
                                    test_devices.begin() + std::min(cfg.inverse_targets, test_devices.size()));
    const EvalReport inv = eval_inverse(stack, targets, cfg.noise_sigma, cfg.noise_seed());
    report(3, inv.r2_ion >= 0.80 && inv.r2_ioff >= 0.85,
           "inverse design of noisy targets: R2 i_on >= 0.80, i_off >= 0.85",
           fmt("R2 i_on %.4f, R2 i_off %.4f", inv.r2_ion, inv.r2_ioff) + ", " + std::to_string(targets.size()) +
               " targets, " + std::to_string(inv.excluded) + " unreadable designs");

    {
      const double t_poly[] = {50, 75, 100, 125, 150};
      const double t_sub[] = {100, 125, 150, 175, 200};
      std::vector<double> spans;
      for (std::size_t k = 0; k < 20 && k < test_devices.size(); ++k) {
        const DeviceParams base = test_devices[k].params;
        double worst = 0.0;
        for (int sweep_sub = 0; sweep_sub < 2; ++sweep_sub) {
          std::vector<DeviceImage> imgs;
          for (int j = 0; j < 5; ++j) {
            DeviceParams p = base;
            (sweep_sub ? p.t_sub : p.t_poly) = sweep_sub ? t_sub[j] : t_poly[j];
            imgs.push_back(render(p));
          }
          double lo = 1e9, hi = -1e9;
          for (const auto& c : forward_predict(stack, imgs)) {
            lo = std::min(lo, log_ion(c));
            hi = std::max(hi, log_ion(c));
          }
          worst = std::max(worst, hi - lo);
        }
        spans.push_back(worst);
      }
      const double med = median(spans);
      report(4, med < 0.1, "weak-variable invariance: median i_on span over t_poly / t_sub sweeps < 0.1 dec",
             fmt("median span %.4f dec, max %.4f dec over %.0f base devices", med,
                 *std::max_element(spans.begin(), spans.end()), static_cast<double>(spans.size())));
    }

    {
      std::vector<std::string> notes;
      bool ok = true;
      auto need = [&](bool cond, const std::string& what) {
        if (!cond) {
          ok = false;
          notes.push_back(what);
        }
      };
      const auto params = sample_params(cfg.seed + 500, 500);
      int exact = 0;
      for (const auto& p : params) exact += extract_params(render(p)) == p;
      need(exact == 500, "extract(render) exact for " + std::to_string(exact) + "/500");

      bool data_ok = data.images.size() == cfg.n_train + cfg.n_test;
      for (std::size_t i = 0; data_ok && i < data.images.size(); ++i) {
        const DeviceParams& p = data.manifest.items[i].params;
        data_ok = data.images[i].pixels == render(p).pixels && data.curves[i] == simulate_iv(p);
      }
      need(data_ok, "dataset load differs from generation");
      const fs::path data_again = root / "dataset_again";
      generate_dataset(cfg.n_train, cfg.n_test, cfg.seed, data_again);
      bool same_tree = true;
      for (const auto& it : data.manifest.items) {
        same_tree = same_tree && slurp(data_dir / it.image_file) == slurp(data_again / it.image_file) &&
                    slurp(data_dir / it.curve_file) == slurp(data_again / it.curve_file);
      }
      same_tree = same_tree && slurp(data_dir / "manifest.json") == slurp(data_again / "manifest.json");
      need(same_tree, "regenerated dataset differs");
      fs::remove_all(data_again);

      const fs::path stack_dir = root / "stack";
      const StackMeta meta{cfg.seed, config_digest(cfg_text), cfg.fwd_lambda, cfg.inv_lambda};
      save_stack(stack_dir, stack, meta, &trained.optimizer);
      const LoadedStack loaded = load_stack(stack_dir);
      const fs::path stack_again = root / "stack_again";
      save_stack(stack_again, loaded.stack, loaded.meta, &trained.optimizer);
      bool ckpt_same = true;
      for (const auto& e : fs::directory_iterator(stack_dir / "models")) {
        ckpt_same = ckpt_same && slurp(e.path()) == slurp(stack_again / "models" / e.path().filename());
      }
      need(ckpt_same, "checkpoint rewrite differs");
      fs::remove_all(stack_again);

      bool paths_same = true;
      for (std::size_t k = 0; k < 10; ++k) {
        const DeviceParams& p = test_devices[k].params;
        paths_same = paths_same && forward_predict(loaded.stack, render(p)) == forward_predict(stack, render(p)) &&
                     inverse_design(loaded.stack, simulate_iv(p)).pixels == inverse_design(stack, simulate_iv(p)).pixels;
      }
      need(paths_same, "reloaded stack predicts differently");

      const EvalReport fwd_again = eval_forward(stack, test_devices, false);
      bool det = fwd_again.r2_ion == fwd.r2_ion && fwd_again.r2_ioff == fwd.r2_ioff;
      const EvalReport inv_again = eval_inverse(stack, targets, cfg.noise_sigma, cfg.noise_seed());
      det = det && inv_again.r2_ion == inv.r2_ion && inv_again.r2_ioff == inv.r2_ioff;

      // a small stack trained twice from the same seeds must agree bit for bit
      RunConfig small = cfg;
      small.image_vae = {{64}, 8, 3, 32, 1e-3, 0.2, 1e-3, 0.01};
      small.curve_vae.epochs = 20;
      const std::size_t n_small = 200;
      const Matrix xi = image_matrix(std::span<const DeviceImage>(train_images.data(), n_small));
      const Matrix xc = curve_matrix(std::span<const IVCurve>(train_curves.data(), n_small));
      const StackTraining a = train_stack(xi, xc, small.stack_config());
      const StackTraining b = train_stack(xi, xc, small.stack_config());
      const fs::path sa = root / "small_a", sb = root / "small_b";
      save_stack(sa, a.stack, meta, &a.optimizer);
      save_stack(sb, b.stack, meta, &b.optimizer);
      for (const auto& e : fs::directory_iterator(sa / "models")) {
        det = det && slurp(e.path()) == slurp(sb / "models" / e.path().filename());
      }
      fs::remove_all(sa);
      fs::remove_all(sb);
      need(det, "pipelines or training not bit-deterministic");

      report(8, ok, "round trips and determinism",
             ok ? "500/500 exact extractions; dataset, checkpoints, reload and retraining bit-identical"
                : [&] {
                    std::string s;
                    for (const auto& n : notes) s += n + "; ";
                    return s;
                  }());
    }

    {
      const std::size_t n = std::min<std::size_t>(100, test_devices.size());
      int closer = 0;
      for (std::size_t k = 0; k < n; ++k) {
        const IVCurve clean = simulate_iv(test_devices[k].params);
        const IVCurve noisy = add_curve_noise(clean, cfg.noise_sigma, cfg.noise_seed() + 1000 + k);
        const Matrix c = curve_matrix(std::vector<IVCurve>{clean});
        const Matrix y = curve_matrix(std::vector<IVCurve>{noisy});
        const Matrix d = autoencode(stack.curve_vae, y, 2);
        closer += (d - c).norm() < (y - c).norm();
      }
      const double frac = static_cast<double>(closer) / static_cast<double>(n);
      report(9, frac >= 0.80, "two curve-VAE passes move noisy curves closer to the clean source (>= 80%)",
             std::to_string(closer) + "/" + std::to_string(n) + " closer");
    }

    // supplementary figures, not scored
    emit_report(fwd, root / "report_forward");
    emit_report(hand, root / "report_forward_hand_drawn");
    emit_report(inv, root / "report_inverse");
    const EvalReport inv_clean = eval_inverse(stack, targets, 0.0, cfg.noise_seed());
    std::printf("info: inverse design with noise-free targets: R2 i_on %.4f, R2 i_off %.4f\n", inv_clean.r2_ion,
                inv_clean.r2_ioff);
    double tp = 0.0, tp2 = 0.0;
    for (const auto& r : inv.records) {
      tp += r.designed->t_poly;
      tp2 += r.designed->t_poly * r.designed->t_poly;
    }
    const double nrec = static_cast<double>(inv.records.size());
    std::printf("info: t_poly of designed structures: mean %.1f nm, std %.1f nm\n", tp / nrec,
                std::sqrt(std::max(0.0, tp2 / nrec - (tp / nrec) * (tp / nrec))));
    std::printf("info: reports written under %s\n", root.string().c_str());
  } catch (const std::exception& e) {
    std::printf("[FAIL] acceptance run aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures ? 1 : 0;
}

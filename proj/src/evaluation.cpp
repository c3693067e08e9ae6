// SPDX-License-Identifier: Apache-2.0
#include "ivmap/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ivmap/errors.hpp"
#include "json.hpp"

namespace ivmap {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void score(EvalReport& r) {
  std::vector<double> ion_t, ion_p, ioff_t, ioff_p;
  for (const auto& rec : r.records) {
    ion_t.push_back(rec.log_ion_true);
    ion_p.push_back(rec.log_ion_pred);
    ioff_t.push_back(rec.log_ioff_true);
    ioff_p.push_back(rec.log_ioff_pred);
  }
  if (r.records.size() < 2) throw DegenerateData("need at least two scored devices, got " + std::to_string(r.records.size()));
  r.r2_ion = r_squared(ion_t, ion_p);
  r.r2_ioff = r_squared(ioff_t, ioff_p);
}

void fill_fom(EvalRecord& rec) {
  const FiguresOfMerit t = extract_fom(rec.reference);
  const FiguresOfMerit p = extract_fom(rec.predicted);
  rec.log_ion_true = std::log10(t.i_on);
  rec.log_ioff_true = std::log10(t.i_off);
  rec.log_ion_pred = std::log10(p.i_on);
  rec.log_ioff_pred = std::log10(p.i_off);
}

// Round step (1, 2 or 5 times a power of ten) giving at most ~6 ticks.
double tick_step(double span) {
  const double raw = span / 6.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

struct Axis {
  double lo, hi;   // data range
  double p0, p1;   // pixel range
  double map(double v) const { return p0 + (v - lo) / (hi - lo) * (p1 - p0); }
};

std::pair<double, double> padded_range(double lo, double hi) {
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

void axis_ticks(std::ostringstream& os, const Axis& x, const Axis& y, double y_base, double x_base) {
  const double sx = tick_step(x.hi - x.lo);
  for (double v = std::ceil(x.lo / sx) * sx; v <= x.hi + 1e-12; v += sx) {
    const double px = x.map(v);
    os << "<line x1=\"" << fmt("%.2f", px) << "\" y1=\"" << fmt("%.2f", y_base) << "\" x2=\"" << fmt("%.2f", px)
       << "\" y2=\"" << fmt("%.2f", y_base + 4) << "\" stroke=\"#000\"/>\n";
    os << "<text x=\"" << fmt("%.2f", px) << "\" y=\"" << fmt("%.2f", y_base + 16)
       << "\" font-size=\"10\" text-anchor=\"middle\">" << fmt("%.4g", std::abs(v) < 1e-12 ? 0.0 : v) << "</text>\n";
  }
  const double sy = tick_step(y.hi - y.lo);
  for (double v = std::ceil(y.lo / sy) * sy; v <= y.hi + 1e-12; v += sy) {
    const double py = y.map(v);
    os << "<line x1=\"" << fmt("%.2f", x_base - 4) << "\" y1=\"" << fmt("%.2f", py) << "\" x2=\"" << fmt("%.2f", x_base)
       << "\" y2=\"" << fmt("%.2f", py) << "\" stroke=\"#000\"/>\n";
    os << "<text x=\"" << fmt("%.2f", x_base - 6) << "\" y=\"" << fmt("%.2f", py + 3)
       << "\" font-size=\"10\" text-anchor=\"end\">" << fmt("%.4g", std::abs(v) < 1e-12 ? 0.0 : v) << "</text>\n";
  }
}

void scatter_panel(std::ostringstream& os, const EvalReport& r, bool on, double left, double top, double size) {
  double lo = 1e300, hi = -1e300;
  for (const auto& rec : r.records) {
    for (double v : on ? std::array{rec.log_ion_true, rec.log_ion_pred}
                       : std::array{rec.log_ioff_true, rec.log_ioff_pred}) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  std::tie(lo, hi) = padded_range(lo, hi);
  const Axis x{lo, hi, left, left + size};
  const Axis y{lo, hi, top + size, top};
  const char* name = on ? "ion" : "ioff";

  os << "<rect x=\"" << fmt("%.2f", left) << "\" y=\"" << fmt("%.2f", top) << "\" width=\"" << fmt("%.2f", size)
     << "\" height=\"" << fmt("%.2f", size) << "\" fill=\"none\" stroke=\"#000\"/>\n";
  os << "<line class=\"guide\" x1=\"" << fmt("%.2f", x.map(lo)) << "\" y1=\"" << fmt("%.2f", y.map(lo)) << "\" x2=\""
     << fmt("%.2f", x.map(hi)) << "\" y2=\"" << fmt("%.2f", y.map(hi))
     << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
  axis_ticks(os, x, y, top + size, left);
  for (const auto& rec : r.records) {
    const double t = on ? rec.log_ion_true : rec.log_ioff_true;
    const double p = on ? rec.log_ion_pred : rec.log_ioff_pred;
    os << "<circle class=\"pt-" << name << "\" cx=\"" << fmt("%.2f", x.map(t)) << "\" cy=\"" << fmt("%.2f", y.map(p))
       << "\" r=\"3\" fill=\"#c0392b\" fill-opacity=\"0.7\"/>\n";
  }
  const double r2 = on ? r.r2_ion : r.r2_ioff;
  os << "<text x=\"" << fmt("%.2f", left + size / 2) << "\" y=\"" << fmt("%.2f", top - 6)
     << "\" font-size=\"12\" text-anchor=\"middle\">" << (on ? "log10 I_on" : "log10 I_off") << " (R2 = "
     << fmt("%.4f", r2) << ")</text>\n";
  os << "<text x=\"" << fmt("%.2f", left + size / 2) << "\" y=\"" << fmt("%.2f", top + size + 32)
     << "\" font-size=\"11\" text-anchor=\"middle\">oracle</text>\n";
  os << "<text x=\"" << fmt("%.2f", left - 40) << "\" y=\"" << fmt("%.2f", top + size / 2)
     << "\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 " << fmt("%.2f", left - 40) << " "
     << fmt("%.2f", top + size / 2) << ")\">predicted</text>\n";
}

void polyline(std::ostringstream& os, const IVCurve& c, const Axis& x, const Axis& y, const char* style) {
  os << "<polyline fill=\"none\" " << style << " points=\"";
  for (int i = 0; i < kCurvePoints; ++i) {
    if (i) os << ' ';
    os << fmt("%.2f", x.map(IVCurve::gate_voltage(i))) << ',' << fmt("%.2f", y.map(std::log10(c.currents[i])));
  }
  os << "\"/>\n";
}

}  // namespace

double r_squared(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) throw ShapeMismatch("r_squared inputs differ in length");
  if (y_true.size() < 2) throw ShapeMismatch("r_squared needs at least two points");
  double mean = 0.0;
  for (double v : y_true) mean += v;
  mean /= static_cast<double>(y_true.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    ss_tot += (y_true[i] - mean) * (y_true[i] - mean);
  }
  if (ss_tot == 0.0) throw DegenerateData("y_true has zero variance");
  return 1.0 - ss_res / ss_tot;
}

EvalReport eval_forward(const TrainedStack& s, std::span<const EvalDevice> devices, bool hand_drawn,
                        std::uint64_t hand_seed) {
  EvalReport r;
  r.meta.mode = hand_drawn ? "forward-hand-drawn" : "forward";
  r.meta.n_test = devices.size();
  std::vector<DeviceImage> images;
  images.reserve(devices.size());
  for (const auto& d : devices) {
    const DeviceImage img = render(d.params);
    images.push_back(hand_drawn ? perturb_hand_drawn(img, hand_seed + static_cast<std::uint64_t>(d.id)) : img);
  }
  const std::vector<IVCurve> pred = forward_predict(s, images);
  for (std::size_t i = 0; i < devices.size(); ++i) {
    EvalRecord rec;
    rec.device_id = devices[i].id;
    rec.params = devices[i].params;
    rec.reference = simulate_iv(devices[i].params);
    rec.predicted = pred[i];
    fill_fom(rec);
    r.records.push_back(std::move(rec));
  }
  score(r);
  return r;
}

EvalReport eval_inverse(const TrainedStack& s, std::span<const EvalDevice> devices, double sigma,
                        std::uint64_t noise_seed) {
  EvalReport r;
  r.meta.mode = "inverse";
  r.meta.n_test = devices.size();
  std::vector<IVCurve> targets;
  targets.reserve(devices.size());
  for (const auto& d : devices) {
    targets.push_back(add_curve_noise(simulate_iv(d.params), sigma, noise_seed + static_cast<std::uint64_t>(d.id)));
  }
  const std::vector<DeviceImage> designs = inverse_design(s, targets);
  for (std::size_t i = 0; i < devices.size(); ++i) {
    DeviceParams got;
    try {
      got = extract_params(designs[i]);
    } catch (const MalformedImage&) {
      ++r.excluded;
      continue;
    }
    EvalRecord rec;
    rec.device_id = devices[i].id;
    rec.params = devices[i].params;
    rec.reference = simulate_iv(devices[i].params);
    rec.noisy = targets[i];
    rec.designed = got;
    rec.predicted = simulate_iv(clamp_to_ranges(got));
    fill_fom(rec);
    r.records.push_back(std::move(rec));
  }
  score(r);
  return r;
}

void write_report_csv(std::ostream& os, const EvalReport& r) {
  os << "device_id,l_g,x_j,l_sp,t_poly,t_sub,log_ion_true,log_ion_pred,log_ioff_true,log_ioff_pred\n";
  for (const auto& rec : r.records) {
    const auto& p = rec.params;
    os << rec.device_id << ',' << fmt("%g", p.l_g) << ',' << fmt("%g", p.x_j) << ',' << fmt("%g", p.l_sp) << ','
       << fmt("%g", p.t_poly) << ',' << fmt("%g", p.t_sub) << ',' << fmt("%.10f", rec.log_ion_true) << ','
       << fmt("%.10f", rec.log_ion_pred) << ',' << fmt("%.10f", rec.log_ioff_true) << ','
       << fmt("%.10f", rec.log_ioff_pred) << '\n';
  }
}

std::string scatter_svg(const EvalReport& r) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"880\" height=\"450\" viewBox=\"0 0 880 450\" "
        "font-family=\"sans-serif\">\n";
  os << "<rect width=\"880\" height=\"450\" fill=\"#fff\"/>\n";
  scatter_panel(os, r, true, 70, 40, 340);
  scatter_panel(os, r, false, 510, 40, 340);
  os << "</svg>\n";
  return os.str();
}

std::string curve_overlay_svg(const EvalReport& r, std::size_t max_devices) {
  const std::size_t n = std::min(max_devices, r.records.size());
  const int cols = 3;
  const int rows = static_cast<int>((n + cols - 1) / cols);
  const double pw = 260, ph = 200, gap = 40;
  const double width = cols * (pw + gap) + gap;
  const double height = rows * (ph + gap) + gap + 20;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt("%.0f", width) << "\" height=\""
     << fmt("%.0f", height) << "\" viewBox=\"0 0 " << fmt("%.0f", width) << ' ' << fmt("%.0f", height)
     << "\" font-family=\"sans-serif\">\n";
  os << "<rect width=\"" << fmt("%.0f", width) << "\" height=\"" << fmt("%.0f", height) << "\" fill=\"#fff\"/>\n";
  os << "<text x=\"" << fmt("%.0f", gap) << "\" y=\"18\" font-size=\"11\">black: oracle, gray dashed: noisy target, "
        "red: predicted (log10 I_D vs V_G)</text>\n";
  for (std::size_t k = 0; k < n; ++k) {
    const auto& rec = r.records[k];
    const double left = gap + static_cast<double>(k % cols) * (pw + gap);
    const double top = 20 + gap + static_cast<double>(k / cols) * (ph + gap);
    double lo = 1e300, hi = -1e300;
    auto extend = [&](const IVCurve& c) {
      for (double v : c.currents) {
        lo = std::min(lo, std::log10(v));
        hi = std::max(hi, std::log10(v));
      }
    };
    extend(rec.reference);
    extend(rec.predicted);
    if (rec.noisy) extend(*rec.noisy);
    std::tie(lo, hi) = padded_range(lo, hi);
    const Axis x{0.0, IVCurve::gate_voltage(kCurvePoints - 1), left, left + pw};
    const Axis y{lo, hi, top + ph, top};
    os << "<rect x=\"" << fmt("%.2f", left) << "\" y=\"" << fmt("%.2f", top) << "\" width=\"" << fmt("%.0f", pw)
       << "\" height=\"" << fmt("%.0f", ph) << "\" fill=\"none\" stroke=\"#000\"/>\n";
    axis_ticks(os, x, y, top + ph, left);
    os << "<text x=\"" << fmt("%.2f", left + pw / 2) << "\" y=\"" << fmt("%.2f", top - 6)
       << "\" font-size=\"11\" text-anchor=\"middle\">device " << rec.device_id << "</text>\n";
    polyline(os, rec.reference, x, y, "stroke=\"#000\" stroke-width=\"1.5\"");
    if (rec.noisy) polyline(os, *rec.noisy, x, y, "stroke=\"#888\" stroke-dasharray=\"3 2\"");
    polyline(os, rec.predicted, x, y, "stroke=\"#c0392b\" stroke-width=\"1.5\"");
  }
  os << "</svg>\n";
  return os.str();
}

void emit_report(const EvalReport& r, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream os(out_dir / name, std::ios::binary);
    os << text;
    if (!os) throw IoError("failed writing " + (out_dir / name).string());
  };
  std::ostringstream csv;
  write_report_csv(csv, r);
  write("report.csv", csv.str());

  nlohmann::ordered_json j;
  j["mode"] = r.meta.mode;
  j["r2_ion"] = r.r2_ion;
  j["r2_ioff"] = r.r2_ioff;
  j["records"] = r.records.size();
  j["excluded"] = r.excluded;
  j["n_train"] = r.meta.n_train;
  j["n_test"] = r.meta.n_test;
  j["seed"] = r.meta.seed;
  j["config_digest"] = r.meta.config_digest;
  write("summary.json", j.dump(2) + "\n");

  if (r.records.empty()) return;
  write("scatter.svg", scatter_svg(r));
  write("curves.svg", curve_overlay_svg(r));
}

}  // namespace ivmap

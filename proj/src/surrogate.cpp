// SPDX-License-Identifier: Apache-2.0
#include "ivmap/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "ivmap/errors.hpp"

namespace ivmap {

namespace {

constexpr double kThermalVoltage = 0.0259;

bool within(double v, ParamRange r) { return v >= r.lo && v <= r.hi; }

double clamp_range(double v, ParamRange r) { return std::clamp(v, r.lo, r.hi); }

double sample_grid(std::mt19937_64& rng, ParamRange r) {
  const auto steps = static_cast<std::int64_t>(std::llround((r.hi - r.lo) / kPixelPitch));
  std::uniform_int_distribution<std::int64_t> pick(0, steps);
  return r.lo + kPixelPitch * static_cast<double>(pick(rng));
}

}  // namespace

bool in_range(const DeviceParams& p) {
  return within(p.l_g, kLgRange) && within(p.x_j, kXjRange) && within(p.l_sp, kLspRange) &&
         within(p.t_poly, kTpolyRange) && within(p.t_sub, kTsubRange);
}

bool renderable(const DeviceParams& p) {
  return in_range(p) && p.l_g + 2.0 * p.l_sp <= kMaxLateralExtent;
}

DeviceParams clamp_to_ranges(DeviceParams p) {
  p.l_g = clamp_range(p.l_g, kLgRange);
  p.x_j = clamp_range(p.x_j, kXjRange);
  p.l_sp = clamp_range(p.l_sp, kLspRange);
  p.t_poly = clamp_range(p.t_poly, kTpolyRange);
  p.t_sub = clamp_range(p.t_sub, kTsubRange);
  return p;
}

void validate(const IVCurve& c) {
  for (double i : c.currents) {
    if (!std::isfinite(i) || i <= 0.0) throw DomainError("curve current must be finite and > 0");
  }
}

std::vector<DeviceParams> sample_params(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::vector<DeviceParams> out;
  out.reserve(n);
  while (out.size() < n) {
    DeviceParams p;
    p.l_g = sample_grid(rng, kLgRange);
    p.x_j = sample_grid(rng, kXjRange);
    p.l_sp = sample_grid(rng, kLspRange);
    p.t_poly = sample_grid(rng, kTpolyRange);
    p.t_sub = sample_grid(rng, kTsubRange);
    if (p.l_g + 2.0 * p.l_sp <= kMaxLateralExtent) out.push_back(p);
  }
  return out;
}

IVCurve simulate_iv(const DeviceParams& p) {
  // EKV-style channel current with short-channel roll-off, spacer series
  // damping and a junction punch-through leak. t_poly and t_sub do not enter.
  const double l_eff = std::max(p.l_g - 0.6 * p.x_j, 2.0);
  const double severity = std::exp(-l_eff / (1.5 * p.x_j));
  const double v_th = 0.45 - 0.35 * severity;
  const double slope = 1.2 + 0.8 * severity;
  const double i_spec = 5e-6 * (100.0 / l_eff);
  const double damping = 1.0 + 0.3 * (p.l_sp / l_eff);
  const double ratio = p.x_j / p.l_g;
  const double leak = 1e-13 * std::exp(std::min(8.0 * std::max(0.0, ratio - 0.35), 12.0)) *
                      (1.0 + ratio * (110.0 - p.l_sp) / 110.0);

  IVCurve c;
  for (int i = 0; i < kCurvePoints; ++i) {
    const double v_g = IVCurve::gate_voltage(i);
    const double soft = std::log1p(std::exp((v_g - v_th) / (2.0 * slope * kThermalVoltage)));
    c.currents[i] = i_spec * soft * soft / damping + leak;
  }
  return c;
}

FiguresOfMerit extract_fom(const IVCurve& c) {
  return {c.currents.front(), c.currents.back()};
}

IVCurve add_curve_noise(const IVCurve& c, double sigma_dec, std::uint64_t seed) {
  if (sigma_dec < 0.0) throw DomainError("noise sigma must be >= 0");
  // The perturbation field is zero on the terminal points and smoothed in log
  // space, so sigma 0 reproduces the input bit for bit.
  IVCurve out = c;
  if (sigma_dec == 0.0) return out;
  std::array<double, kCurvePoints> eps{};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 2; i <= kCurvePoints - 3; ++i) eps[i] = sigma_dec * normal(rng);

  for (int i = 2; i <= kCurvePoints - 3; ++i) {
    const double smoothed = (eps[i - 1] + eps[i] + eps[i + 1]) / 3.0;
    out.currents[i] = c.currents[i] * std::pow(10.0, smoothed);
  }
  return out;
}

std::vector<double> normalize_curve(const IVCurve& c) {
  std::vector<double> y(kCurvePoints);
  for (int i = 0; i < kCurvePoints; ++i) {
    const double current = std::clamp(c.currents[i], 1e-16, 1e-1);
    y[i] = std::clamp((std::log10(current) - kLogCurrentFloor) / kLogCurrentSpan, 0.0, 1.0);
  }
  return y;
}

IVCurve denormalize_curve(const std::vector<double>& y) {
  if (y.size() != static_cast<std::size_t>(kCurvePoints)) {
    throw ShapeMismatch("normalized curve must have 51 values, got " + std::to_string(y.size()));
  }
  IVCurve c;
  for (int i = 0; i < kCurvePoints; ++i) {
    c.currents[i] = std::pow(10.0, y[i] * kLogCurrentSpan + kLogCurrentFloor);
  }
  return c;
}

void write_curve_csv(std::ostream& os, const IVCurve& c) {
  os << "vg,id\n";
  std::ostringstream line;
  line << std::scientific << std::setprecision(16);
  for (int i = 0; i < kCurvePoints; ++i) {
    line.str({});
    line << IVCurve::gate_voltage(i) << ',' << c.currents[i] << '\n';
    os << line.str();
  }
}

IVCurve read_curve_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("vg,id", 0) != 0) {
    throw DomainError("curve CSV must start with header 'vg,id'");
  }
  IVCurve c;
  int row = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    if (row >= kCurvePoints) throw DomainError("curve CSV has more than 51 rows");
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DomainError("curve CSV row without comma: " + line);
    try {
      c.currents[row] = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw DomainError("unparsable current in curve CSV: " + line);
    }
    ++row;
  }
  if (row != kCurvePoints) {
    throw DomainError("curve CSV needs 51 rows, found " + std::to_string(row));
  }
  validate(c);
  return c;
}

void save_curve_csv(const std::filesystem::path& path, const IVCurve& c) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_curve_csv(os, c);
  if (!os) throw IoError("failed writing " + path.string());
}

IVCurve load_curve_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_curve_csv(is);
}

}  // namespace ivmap

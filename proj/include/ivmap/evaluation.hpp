// SPDX-License-Identifier: Apache-2.0
//
// R^2 scoring of the two paths against the oracle, plus CSV/SVG reports.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ivmap/pipelines.hpp"

namespace ivmap {

/// 1 - SS_res / SS_tot. Throws ShapeMismatch on length mismatch or fewer
/// than two points, DegenerateData when y_true has zero variance.
double r_squared(std::span<const double> y_true, std::span<const double> y_pred);

struct EvalDevice {
  int id = 0;
  DeviceParams params;
};

struct EvalRecord {
  int device_id = 0;
  DeviceParams params;  // the source device
  double log_ion_true = 0.0;
  double log_ion_pred = 0.0;
  double log_ioff_true = 0.0;
  double log_ioff_pred = 0.0;
  IVCurve reference;             // oracle curve of the source device
  std::optional<IVCurve> noisy;  // inverse mode: the target actually fed in
  IVCurve predicted;             // forward: predicted curve; inverse: re-simulated design
  std::optional<DeviceParams> designed;
};

struct EvalMetadata {
  std::string mode;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
  std::string config_digest;
};

struct EvalReport {
  EvalMetadata meta;
  double r2_ion = 0.0;
  double r2_ioff = 0.0;
  std::vector<EvalRecord> records;
  int excluded = 0;  // designs that could not be read back
};

/// Renders each device (optionally hand-drawn with seed hand_seed + id),
/// predicts its curve and scores log10 i_on / i_off against the oracle.
EvalReport eval_forward(const TrainedStack& s, std::span<const EvalDevice> devices, bool hand_drawn,
                        std::uint64_t hand_seed = 0);

/// Noisy targets (sigma in decades, seed noise_seed + id) are inverse
/// designed; the design is read back, clamped to the parameter ranges and
/// re-simulated. Unreadable designs are excluded and counted.
EvalReport eval_inverse(const TrainedStack& s, std::span<const EvalDevice> devices, double sigma,
                        std::uint64_t noise_seed);

void write_report_csv(std::ostream& os, const EvalReport& r);
/// Two panels (i_on, i_off), predicted vs. true in log10 with a y = x guide.
std::string scatter_svg(const EvalReport& r);
/// Reference, noisy and predicted curves of the first `max_devices` records.
std::string curve_overlay_svg(const EvalReport& r, std::size_t max_devices = 6);

/// Writes report.csv, summary.json and, when records exist, scatter.svg and
/// curves.svg. Throws IoError.
void emit_report(const EvalReport& r, const std::filesystem::path& out_dir);

}  // namespace ivmap

// SPDX-License-Identifier: Apache-2.0
//
// Analytic planar-MOSFET oracle: parameter sampling, I_D-V_G generation,
// figure-of-merit extraction and curve noise. Stands in for a TCAD deck.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace ivmap {

inline constexpr int kCurvePoints = 51;
inline constexpr double kGateStep = 0.028;  // V between curve samples
inline constexpr double kDrainBias = 1.4;   // V
inline constexpr double kPixelPitch = 5.0;  // nm per pixel

/// Geometric device parameters, all in nm.
struct DeviceParams {
  double l_g = 0.0;     // gate length
  double x_j = 0.0;     // source/drain junction depth
  double l_sp = 0.0;    // spacer width
  double t_poly = 0.0;  // gate poly thickness
  double t_sub = 0.0;   // substrate thickness

  friend bool operator==(const DeviceParams&, const DeviceParams&) = default;
};

struct ParamRange {
  double lo;
  double hi;
};

inline constexpr ParamRange kLgRange{25, 290};
inline constexpr ParamRange kXjRange{10, 90};
inline constexpr ParamRange kLspRange{10, 110};
inline constexpr ParamRange kTpolyRange{50, 150};
inline constexpr ParamRange kTsubRange{100, 200};
/// l_g + 2 l_sp must not exceed this so the device fits the 80-pixel field.
inline constexpr double kMaxLateralExtent = 340.0;

bool in_range(const DeviceParams& p);
bool renderable(const DeviceParams& p);
/// Clamps every field into its range.
DeviceParams clamp_to_ranges(DeviceParams p);

/// Drain current (A, 1 um wide device) at V_G = 0.028 i, i = 0..50.
struct IVCurve {
  std::array<double, kCurvePoints> currents{};

  static double gate_voltage(int i) { return kGateStep * i; }
  friend bool operator==(const IVCurve&, const IVCurve&) = default;
};

/// Throws DomainError unless every current is finite and positive.
void validate(const IVCurve& c);

struct FiguresOfMerit {
  double i_off = 0.0;  // V_G = 0
  double i_on = 0.0;   // V_G = 1.4 V
};

/// Uniform sampling of each parameter over its range on the 5 nm grid,
/// rejecting draws that violate the lateral-fit constraint.
std::vector<DeviceParams> sample_params(std::uint64_t seed, std::size_t n);

IVCurve simulate_iv(const DeviceParams& p);

FiguresOfMerit extract_fom(const IVCurve& c);

inline constexpr double kDefaultNoiseDecades = 0.08;

/// Log-space multiplicative noise on the interior points 2..48, smoothed by a
/// 3-point moving average. Points 0, 1, 49 and 50 are returned untouched.
IVCurve add_curve_noise(const IVCurve& c, double sigma_dec, std::uint64_t seed);

/// Normalization window in A; log10 currents are mapped affinely onto [0, 1].
inline constexpr double kLogCurrentFloor = -14.0;
inline constexpr double kLogCurrentSpan = 12.0;

std::vector<double> normalize_curve(const IVCurve& c);
IVCurve denormalize_curve(const std::vector<double>& y);

/// CSV with header `vg,id` and 51 rows.
void write_curve_csv(std::ostream& os, const IVCurve& c);
IVCurve read_curve_csv(std::istream& is);
void save_curve_csv(const std::filesystem::path& path, const IVCurve& c);
IVCurve load_curve_csv(const std::filesystem::path& path);

}  // namespace ivmap

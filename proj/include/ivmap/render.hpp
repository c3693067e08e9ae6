// SPDX-License-Identifier: Apache-2.0
//
// 80x80 grayscale cross-section rasters of a planar MOSFET.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ivmap/surrogate.hpp"

namespace ivmap {

inline constexpr int kImageSide = 80;
inline constexpr int kImagePixels = kImageSide * kImageSide;

/// Row 0 is the top of the cross-section. 5 nm per pixel.
struct DeviceImage {
  std::array<std::uint8_t, kImagePixels> pixels{};

  std::uint8_t at(int row, int col) const { return pixels[row * kImageSide + col]; }
  std::uint8_t& at(int row, int col) { return pixels[row * kImageSide + col]; }

  /// Pixels scaled to [0, 1] for network input.
  std::vector<double> to_unit() const;

  friend bool operator==(const DeviceImage&, const DeviceImage&) = default;
};

enum class Region : std::uint8_t { background, substrate, source_drain, ldd, oxide, poly, spacer };

/// Per-pixel region labels; derived from parameters alone.
struct RegionMap {
  std::array<Region, kImagePixels> labels{};

  Region at(int row, int col) const { return labels[row * kImageSide + col]; }
  Region& at(int row, int col) { return labels[row * kImageSide + col]; }
};

namespace layout {
inline constexpr int kSubstrateTop = 34;
inline constexpr int kOxideRow = 33;
inline constexpr int kCenterColumn = 40;
inline constexpr int kJunctionProbeColumn = 2;
}  // namespace layout

namespace gray {
inline constexpr std::uint8_t kBackground = 0;
inline constexpr std::uint8_t kSpacer = 60;
inline constexpr std::uint8_t kSubstrate = 90;
inline constexpr std::uint8_t kLdd = 170;
inline constexpr std::uint8_t kSourceDrainTop = 200;
inline constexpr std::uint8_t kSourceDrainBottom = 150;
inline constexpr std::uint8_t kSourceDrainFlat = 180;  // hand-drawn, gradient lost
inline constexpr std::uint8_t kPoly = 230;
inline constexpr std::uint8_t kOxide = 255;
}  // namespace gray

/// Pixel geometry of a device. Column/row bounds are inclusive.
struct PixelGeometry {
  int gate_left = 0;
  int gate_right = 0;
  int spacer_px = 0;
  int poly_top = 0;        // first poly row; poly ends at kOxideRow - 1
  int substrate_bottom = 0;
  int junction_px = 0;     // S/D depth
  int ldd_px = 0;

  static PixelGeometry from_params(const DeviceParams& p);
};

RegionMap region_map(const DeviceParams& p);

DeviceImage render(const DeviceParams& p);

/// Imitates a hand-modified drawing: flat S/D shading, per-region gray
/// offsets in [-20, 20] and +-1 pixel boundary jitter.
DeviceImage perturb_hand_drawn(const DeviceImage& img, std::uint64_t seed);

/// Recovers the five parameters from a clean, hand-drawn or decoded raster.
/// Throws MalformedImage when no gate or no substrate is found.
DeviceParams extract_params(const DeviceImage& img);

/// Scales decoder outputs in [0, 1] to 8-bit levels, rounding half up.
DeviceImage quantize_decoded(std::span<const double> raw);

/// 8-bit grayscale PNG, 80x80, no alpha, no interlacing.
void save_png(const std::filesystem::path& path, const DeviceImage& img);
DeviceImage load_png(const std::filesystem::path& path);

}  // namespace ivmap

// SPDX-License-Identifier: Apache-2.0
#include "ivmap/render.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "ivmap/errors.hpp"

namespace ivmap {

namespace {

int to_px(double nm) { return static_cast<int>(std::lround(nm / kPixelPitch)); }

// Boundary positions for one raster. Vertical boundaries may vary per row and
// horizontal ones per column; a clean render uses the same value everywhere.
struct Boundaries {
  std::array<int, kImageSide> gate_left{};
  std::array<int, kImageSide> gate_right{};
  std::array<int, kImageSide> spacer_left{};   // outer edge, inclusive
  std::array<int, kImageSide> spacer_right{};  // outer edge, inclusive
  std::array<int, kImageSide> poly_top{};
  std::array<int, kImageSide> substrate_bottom{};
  std::array<int, kImageSide> junction_px{};
  std::array<int, kImageSide> ldd_px{};

  static Boundaries uniform(const PixelGeometry& g) {
    Boundaries b;
    b.gate_left.fill(g.gate_left);
    b.gate_right.fill(g.gate_right);
    b.spacer_left.fill(g.gate_left - g.spacer_px);
    b.spacer_right.fill(g.gate_right + g.spacer_px);
    b.poly_top.fill(g.poly_top);
    b.substrate_bottom.fill(g.substrate_bottom);
    b.junction_px.fill(g.junction_px);
    b.ldd_px.fill(g.ldd_px);
    return b;
  }
};

RegionMap paint_regions(const Boundaries& b) {
  using layout::kOxideRow;
  using layout::kSubstrateTop;
  RegionMap m;
  for (int r = 0; r < kImageSide; ++r) {
    for (int c = 0; c < kImageSide; ++c) {
      const bool in_gate = c >= b.gate_left[r] && c <= b.gate_right[r];
      const bool in_spacer =
          !in_gate && c >= b.spacer_left[r] && c <= b.spacer_right[r];
      Region region = Region::background;
      if (r < kSubstrateTop) {
        if (r >= b.poly_top[c]) {
          if (in_gate) {
            region = r == kOxideRow ? Region::oxide : Region::poly;
          } else if (in_spacer) {
            region = Region::spacer;
          }
        }
      } else if (r <= b.substrate_bottom[c]) {
        const int depth = r - kSubstrateTop;
        region = Region::substrate;
        if (!in_gate && !in_spacer && depth < b.junction_px[c]) {
          region = Region::source_drain;
        } else if (in_spacer && depth < b.ldd_px[c]) {
          region = Region::ldd;
        }
      }
      m.at(r, c) = region;
    }
  }
  return m;
}

std::uint8_t source_drain_level(int depth, int junction_px) {
  if (junction_px <= 1) return gray::kSourceDrainTop;
  const double span = gray::kSourceDrainTop - gray::kSourceDrainBottom;
  const double level = gray::kSourceDrainTop - span * depth / (junction_px - 1);
  return static_cast<std::uint8_t>(std::lround(level));
}

std::uint8_t flat_level(Region r) {
  switch (r) {
    case Region::background: return gray::kBackground;
    case Region::substrate: return gray::kSubstrate;
    case Region::source_drain: return gray::kSourceDrainFlat;
    case Region::ldd: return gray::kLdd;
    case Region::oxide: return gray::kOxide;
    case Region::poly: return gray::kPoly;
    case Region::spacer: return gray::kSpacer;
  }
  return 0;
}

// Ordinal classes used by extraction. The substrate surface splits the raster
// into an upper zone (background/spacer/gate stack) and a lower zone
// (background/substrate/doped silicon); each zone has its own level set.
enum Class : std::uint8_t { kEmpty = 0, kMid = 1, kHigh = 2 };

Class classify(int row, std::uint8_t v) {
  if (row < layout::kSubstrateTop) {
    // nearest of {0, 60, 230, 255}; poly and oxide merge into the gate stack
    if (v < 30) return kEmpty;
    if (v < 145) return kMid;
    return kHigh;
  }
  // nearest of {0, 90, [150, 200] S/D gradient, 170 LDD}; LDD and S/D merge
  if (v < 45) return kEmpty;
  if (v < 120) return kMid;
  return kHigh;
}

using ClassGrid = std::array<Class, kImagePixels>;

ClassGrid median_filter(const ClassGrid& in) {
  ClassGrid out{};
  for (int r = 0; r < kImageSide; ++r) {
    const bool upper = r < layout::kSubstrateTop;
    const int zone_lo = upper ? 0 : layout::kSubstrateTop;
    const int zone_hi = upper ? layout::kSubstrateTop - 1 : kImageSide - 1;
    for (int c = 0; c < kImageSide; ++c) {
      std::array<int, 3> counts{};
      for (int dr = -1; dr <= 1; ++dr) {
        const int rr = std::clamp(r + dr, zone_lo, zone_hi);
        for (int dc = -1; dc <= 1; ++dc) {
          const int cc = std::clamp(c + dc, 0, kImageSide - 1);
          ++counts[in[rr * kImageSide + cc]];
        }
      }
      // median of nine ordinal values
      out[r * kImageSide + c] = counts[0] >= 5 ? kEmpty : (counts[0] + counts[1] >= 5 ? kMid : kHigh);
    }
  }
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Run {
  int begin = 0;
  int end = -1;  // inclusive
  int length() const { return end - begin + 1; }
};

// Longest run of `cls` in one row of the upper zone.
Run longest_run(const ClassGrid& g, int row, Class cls) {
  Run best;
  int start = -1;
  for (int c = 0; c <= kImageSide; ++c) {
    const bool hit = c < kImageSide && g[row * kImageSide + c] == cls;
    if (hit && start < 0) start = c;
    if (!hit && start >= 0) {
      if (c - start > best.length()) best = {start, c - 1};
      start = -1;
    }
  }
  return best;
}

int run_down(const ClassGrid& g, int col, int from_row, auto pred) {
  int n = 0;
  for (int r = from_row; r < kImageSide && pred(g[r * kImageSide + col]); ++r) ++n;
  return n;
}

}  // namespace

std::vector<double> DeviceImage::to_unit() const {
  std::vector<double> x(kImagePixels);
  for (int i = 0; i < kImagePixels; ++i) x[i] = pixels[i] / 255.0;
  return x;
}

PixelGeometry PixelGeometry::from_params(const DeviceParams& p) {
  PixelGeometry g;
  const int gate_px = to_px(p.l_g);
  g.gate_left = layout::kCenterColumn - gate_px / 2;
  g.gate_right = g.gate_left + gate_px - 1;
  g.spacer_px = to_px(p.l_sp);
  g.poly_top = layout::kOxideRow - to_px(p.t_poly);
  g.substrate_bottom = layout::kSubstrateTop + to_px(p.t_sub) - 1;
  g.junction_px = to_px(p.x_j);
  g.ldd_px = std::max(1, static_cast<int>(std::lround(0.4 * p.x_j / kPixelPitch)));
  return g;
}

RegionMap region_map(const DeviceParams& p) {
  return paint_regions(Boundaries::uniform(PixelGeometry::from_params(p)));
}

DeviceImage render(const DeviceParams& p) {
  const PixelGeometry g = PixelGeometry::from_params(p);
  const RegionMap m = paint_regions(Boundaries::uniform(g));
  DeviceImage img;
  for (int r = 0; r < kImageSide; ++r) {
    for (int c = 0; c < kImageSide; ++c) {
      const Region region = m.at(r, c);
      img.at(r, c) = region == Region::source_drain
                         ? source_drain_level(r - layout::kSubstrateTop, g.junction_px)
                         : flat_level(region);
    }
  }
  return img;
}

DeviceImage perturb_hand_drawn(const DeviceImage& img, std::uint64_t seed) {
  const PixelGeometry g = PixelGeometry::from_params(extract_params(img));
  Boundaries b = Boundaries::uniform(g);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> jitter(-1, 1);
  std::uniform_int_distribution<int> offset(-20, 20);

  std::array<int, 7> region_offset{};
  for (int& o : region_offset) o = offset(rng);
  for (int i = 0; i < kImageSide; ++i) {
    b.gate_left[i] += jitter(rng);
    b.gate_right[i] += jitter(rng);
    b.spacer_left[i] += jitter(rng);
    b.spacer_right[i] += jitter(rng);
    b.poly_top[i] += jitter(rng);
    b.substrate_bottom[i] += jitter(rng);
    b.junction_px[i] = std::max(1, b.junction_px[i] + jitter(rng));
    b.ldd_px[i] = std::max(1, b.ldd_px[i] + jitter(rng));
  }

  const RegionMap m = paint_regions(b);
  DeviceImage out;
  for (int i = 0; i < kImagePixels; ++i) {
    const Region region = m.labels[i];
    const int level = flat_level(region) + region_offset[static_cast<int>(region)];
    out.pixels[i] = static_cast<std::uint8_t>(std::clamp(level, 0, 255));
  }
  return out;
}

DeviceParams extract_params(const DeviceImage& img) {
  ClassGrid raw{};
  for (int r = 0; r < kImageSide; ++r) {
    for (int c = 0; c < kImageSide; ++c) raw[r * kImageSide + c] = classify(r, img.at(r, c));
  }
  const ClassGrid g = median_filter(raw);

  // Gate stack rows and their longest runs.
  std::vector<double> gate_widths, spacer_left, spacer_right;
  Run widest;
  for (int r = 0; r < layout::kSubstrateTop; ++r) {
    const Run run = longest_run(g, r, kHigh);
    if (run.length() <= 0) continue;
    gate_widths.push_back(run.length());
    if (run.length() > widest.length()) widest = run;
    int left = 0;
    for (int c = run.begin - 1; c >= 0 && g[r * kImageSide + c] == kMid; --c) ++left;
    int right = 0;
    for (int c = run.end + 1; c < kImageSide && g[r * kImageSide + c] == kMid; ++c) ++right;
    spacer_left.push_back(left);
    spacer_right.push_back(right);
  }
  if (gate_widths.empty()) throw MalformedImage("no gate region detected");

  std::vector<double> substrate_depths;
  for (int c = 0; c < kImageSide; ++c) {
    substrate_depths.push_back(run_down(g, c, layout::kSubstrateTop, [](Class k) { return k != kEmpty; }));
  }
  const double t_sub_px = median(substrate_depths);
  if (t_sub_px <= 0.0) throw MalformedImage("no substrate region detected");

  // Gate stack height per column over the widest gate run, minus the oxide row.
  std::vector<double> stack_heights;
  for (int c = widest.begin; c <= widest.end; ++c) {
    int h = 0;
    for (int r = layout::kSubstrateTop - 1; r >= 0 && g[r * kImageSide + c] == kHigh; --r) ++h;
    if (h > 0) stack_heights.push_back(h - 1);
  }

  const double x_j_px = run_down(g, layout::kJunctionProbeColumn, layout::kSubstrateTop,
                                 [](Class k) { return k == kHigh; });

  DeviceParams p;
  p.l_g = kPixelPitch * median(gate_widths);
  p.l_sp = kPixelPitch * 0.5 * (median(spacer_left) + median(spacer_right));
  p.x_j = kPixelPitch * x_j_px;
  p.t_poly = kPixelPitch * median(stack_heights);
  p.t_sub = kPixelPitch * t_sub_px;
  return clamp_to_ranges(p);
}

DeviceImage quantize_decoded(std::span<const double> raw) {
  if (raw.size() != static_cast<std::size_t>(kImagePixels)) {
    throw ShapeMismatch("decoded image must have 6400 values, got " + std::to_string(raw.size()));
  }
  DeviceImage img;
  for (int i = 0; i < kImagePixels; ++i) {
    const double v = std::clamp(raw[i], 0.0, 1.0);
    img.pixels[i] = static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
  }
  return img;
}

void save_png(const std::filesystem::path& path, const DeviceImage& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = kImageSide;
  image.height = kImageSide;
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), kImageSide, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot write PNG " + path.string() + ": " + msg);
  }
}

DeviceImage load_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  }
  if (image.width != kImageSide || image.height != kImageSide) {
    png_image_free(&image);
    throw MalformedImage(path.string() + " is " + std::to_string(image.width) + "x" +
                         std::to_string(image.height) + ", expected 80x80");
  }
  image.format = PNG_FORMAT_GRAY;
  DeviceImage img;
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), kImageSide, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return img;
}

}  // namespace ivmap

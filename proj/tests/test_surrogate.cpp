// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "ivmap/errors.hpp"
#include "ivmap/surrogate.hpp"

using namespace ivmap;

namespace {

bool aligned(double v) { return std::fmod(v, kPixelPitch) == 0.0; }

DeviceParams dev(double l_g, double x_j, double l_sp, double t_poly = 100, double t_sub = 150) {
  return {l_g, x_j, l_sp, t_poly, t_sub};
}

}  // namespace

TEST_CASE("sample_params stays in range on the 5 nm grid") {
  const auto one = sample_params(7, 1);
  REQUIRE(one.size() == 1);
  CHECK(in_range(one[0]));
  CHECK(aligned(one[0].l_g));
  CHECK(aligned(one[0].x_j));
  CHECK(aligned(one[0].l_sp));
  CHECK(aligned(one[0].t_poly));
  CHECK(aligned(one[0].t_sub));

  CHECK(sample_params(7, 1000) == sample_params(7, 1000));

  const auto many = sample_params(3, 10000);
  double lo = 1e9, hi = -1e9;
  for (const auto& p : many) {
    lo = std::min(lo, p.l_g);
    hi = std::max(hi, p.l_g);
    CHECK(renderable(p));
  }
  CHECK(lo >= 25.0);
  CHECK(hi <= 290.0);
  // the grid extremes are all reachable at this sample size
  CHECK(lo == 25.0);
}

TEST_CASE("simulate_iv matches the independent oracle") {
  // Reference values from a separate float64 evaluation of the model formulas.
  const auto a = extract_fom(simulate_iv(dev(100, 50, 50, 100, 150)));
  CHECK(a.i_on == doctest::Approx(1.1304873928131435e-3).epsilon(1e-12));
  CHECK(a.i_off == doctest::Approx(2.010874584212188e-9).epsilon(1e-12));

  const auto b = extract_fom(simulate_iv(dev(250, 20, 30, 50, 100)));
  CHECK(b.i_off == doctest::Approx(1.1557689385398474e-12).epsilon(1e-12));
  CHECK(b.i_on == doctest::Approx(4.7272153477619517e-4).epsilon(1e-12));

  CHECK(simulate_iv(dev(100, 50, 50, 50, 100)) == simulate_iv(dev(100, 50, 50, 150, 200)));
}

TEST_CASE("weak parameters never change the curve") {
  for (const auto& p : sample_params(11, 50)) {
    const IVCurve ref = simulate_iv(p);
    for (double tp = 50; tp <= 150; tp += 25) {
      for (double ts = 100; ts <= 200; ts += 25) {
        CHECK(simulate_iv({p.l_g, p.x_j, p.l_sp, tp, ts}) == ref);
      }
    }
  }
}

TEST_CASE("i_on monotone in l_sp everywhere and in x_j on long channels") {
  const double grid[] = {10, 30, 50, 70, 90};
  for (double l_g : {40.0, 80.0, 120.0, 170.0, 200.0, 260.0}) {
    for (double x_j : grid) {
      double prev = INFINITY;
      for (double l_sp : grid) {
        const double on = extract_fom(simulate_iv(dev(l_g, x_j, l_sp))).i_on;
        CHECK(on <= prev);
        prev = on;
      }
    }
  }
  // The slope-factor rise can outpace L_eff shrinkage on short channels, so
  // strict monotonicity in x_j only holds once l_g >= 165 nm.
  for (double l_g : {170.0, 200.0, 230.0, 260.0, 290.0}) {
    for (double l_sp : grid) {
      double prev = 0.0;
      for (double x_j : grid) {
        const double on = extract_fom(simulate_iv(dev(l_g, x_j, l_sp))).i_on;
        CHECK(on >= prev);
        prev = on;
      }
    }
  }
  // Elsewhere the dip between neighbouring 5 nm steps stays below 3.2 %.
  for (double l_g = 25; l_g <= 160; l_g += 5) {
    for (double l_sp = 10; l_sp <= 110; l_sp += 5) {
      double prev = 0.0;
      for (double x_j = 10; x_j <= 90; x_j += 5) {
        const double on = extract_fom(simulate_iv(dev(l_g, x_j, l_sp))).i_on;
        CHECK(on >= 0.968 * prev);
        prev = on;
      }
    }
  }
}

TEST_CASE("i_off monotone non-increasing in l_g") {
  for (double x_j : {10.0, 30.0, 50.0, 70.0, 90.0}) {
    for (double l_sp : {10.0, 60.0, 110.0}) {
      double prev = INFINITY;
      for (int k = 0; k < 20; ++k) {
        const double l_g = 25.0 + k * 13.0;
        const double off = extract_fom(simulate_iv(dev(l_g, x_j, l_sp))).i_off;
        CHECK(off <= prev);
        prev = off;
      }
    }
  }
}

TEST_CASE("every sampled device switches and has a valid curve") {
  for (const auto& p : sample_params(5, 2000)) {
    const IVCurve c = simulate_iv(p);
    CHECK_NOTHROW(validate(c));
    const auto f = extract_fom(c);
    CHECK(std::log10(f.i_on / f.i_off) > 0.0);
  }
}

TEST_CASE("extract_fom reads the endpoints") {
  IVCurve flat;
  flat.currents.fill(1e-6);
  const auto f = extract_fom(flat);
  CHECK(f.i_off == 1e-6);
  CHECK(f.i_on == 1e-6);

  IVCurve rising;
  for (int i = 0; i < kCurvePoints; ++i) rising.currents[i] = 1e-9 * (i + 1);
  CHECK(extract_fom(rising).i_on > extract_fom(rising).i_off);

  const IVCurve c = simulate_iv(dev(100, 50, 50));
  CHECK(extract_fom(c).i_off == c.currents[0]);
  CHECK(extract_fom(c).i_on == c.currents[50]);
}

TEST_CASE("curve noise keeps terminal points and has the expected spread") {
  const IVCurve c = simulate_iv(dev(100, 50, 50));
  CHECK(add_curve_noise(c, 0.0, 1) == c);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const IVCurve n = add_curve_noise(c, 0.3, seed);
    CHECK(n.currents[0] == c.currents[0]);
    CHECK(n.currents[1] == c.currents[1]);
    CHECK(n.currents[49] == c.currents[49]);
    CHECK(n.currents[50] == c.currents[50]);
  }
  CHECK(add_curve_noise(c, 0.08, 9) == add_curve_noise(c, 0.08, 9));
  CHECK_THROWS_AS(add_curve_noise(c, -0.1, 0), DomainError);

  // Monte-Carlo: the 3-point average of iid N(0, s) has std s / sqrt(3).
  std::vector<double> d;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    d.push_back(std::log10(add_curve_noise(c, 0.08, seed).currents[25] / c.currents[25]));
  }
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / d.size();
  double var = 0.0;
  for (double v : d) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / (d.size() - 1));
  CHECK(sd == doctest::Approx(0.08 / std::sqrt(3.0)).epsilon(0.15));
}

TEST_CASE("normalize_curve affine map and inverse") {
  IVCurve c;
  c.currents.fill(1e-8);
  c.currents[0] = 1e-14;
  c.currents[1] = 1e-2;
  c.currents[2] = 1e-20;  // clamped
  const auto y = normalize_curve(c);
  CHECK(y[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(y[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(y[3] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(y[2] == 0.0);

  for (const auto& p : sample_params(2, 100)) {
    const IVCurve src = simulate_iv(p);
    bool inside = true;
    for (double i : src.currents) inside = inside && i > 1e-14 && i < 1e-2;
    if (!inside) continue;
    const IVCurve back = denormalize_curve(normalize_curve(src));
    for (int i = 0; i < kCurvePoints; ++i) {
      CHECK(back.currents[i] == doctest::Approx(src.currents[i]).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(denormalize_curve(std::vector<double>(50, 0.5)), ShapeMismatch);
}

TEST_CASE("curve CSV round trip is bit exact") {
  const IVCurve c = add_curve_noise(simulate_iv(dev(75, 35, 20)), 0.08, 4);
  std::stringstream ss;
  write_curve_csv(ss, c);
  const std::string text = ss.str();
  CHECK(text.rfind("vg,id\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 52);
  CHECK(read_curve_csv(ss) == c);

  std::stringstream bad("vg,id\n0,1e-9\n");
  CHECK_THROWS_AS(read_curve_csv(bad), DomainError);
}

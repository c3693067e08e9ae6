// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ivmap/errors.hpp"
#include "ivmap/evaluation.hpp"
#include "tiny_stack.hpp"

using namespace ivmap;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ivmap_" + name);
  fs::remove_all(p);
  return p;
}

EvalReport synthetic_report(int n) {
  EvalReport r;
  r.meta.mode = "forward";
  const auto params = sample_params(5, static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    EvalRecord rec;
    rec.device_id = i;
    rec.params = params[i];
    rec.reference = simulate_iv(params[i]);
    rec.predicted = add_curve_noise(rec.reference, 0.05, static_cast<std::uint64_t>(i));
    rec.log_ion_true = std::log10(rec.reference.currents[50]);
    rec.log_ion_pred = rec.log_ion_true + 0.01 * (i % 3);
    rec.log_ioff_true = std::log10(rec.reference.currents[0]);
    rec.log_ioff_pred = rec.log_ioff_true - 0.02 * (i % 2);
    r.records.push_back(rec);
  }
  r.r2_ion = 0.9;
  r.r2_ioff = 0.8;
  return r;
}

}  // namespace

TEST_CASE("r_squared hand cases") {
  const std::vector<double> t{1.0, 2.0, 3.0};
  CHECK(r_squared(t, t) == 1.0);
  CHECK(r_squared(t, std::vector<double>{2.0, 2.0, 2.0}) == 0.0);
  CHECK(std::abs(r_squared(t, std::vector<double>{1.0, 2.0, 4.0}) - 0.5) <= 1e-12);
  CHECK_THROWS_AS(r_squared(std::vector<double>{4.0, 4.0}, std::vector<double>{1.0, 2.0}), DegenerateData);
  CHECK_THROWS_AS(r_squared(t, std::vector<double>{1.0}), ShapeMismatch);
  CHECK_THROWS_AS(r_squared(std::vector<double>{1.0}, std::vector<double>{1.0}), ShapeMismatch);
}

TEST_CASE("report emission") {
  SUBCASE("empty report writes only the header") {
    const fs::path dir = fresh_dir("empty_report");
    EvalReport r;
    emit_report(r, dir);
    CHECK(slurp(dir / "report.csv") ==
          "device_id,l_g,x_j,l_sp,t_poly,t_sub,log_ion_true,log_ion_pred,log_ioff_true,log_ioff_pred\n");
    CHECK_FALSE(fs::exists(dir / "scatter.svg"));
    CHECK_FALSE(fs::exists(dir / "curves.svg"));
    fs::remove_all(dir);
  }
  SUBCASE("markers, determinism and self-contained svg") {
    const EvalReport r = synthetic_report(20);
    const fs::path a = fresh_dir("report_a");
    const fs::path b = fresh_dir("report_b");
    emit_report(r, a);
    emit_report(r, b);
    for (const char* f : {"report.csv", "summary.json", "scatter.svg", "curves.svg"}) {
      CHECK(slurp(a / f) == slurp(b / f));
    }
    const std::string scatter = slurp(a / "scatter.svg");
    CHECK(count(scatter, "class=\"pt-ion\"") == 20);
    CHECK(count(scatter, "class=\"pt-ioff\"") == 20);
    CHECK(count(scatter, "class=\"guide\"") == 2);
    for (const std::string& s : {scatter, slurp(a / "curves.svg")}) {
      CHECK(s.find("href") == std::string::npos);
      CHECK(s.find("url(") == std::string::npos);
      CHECK(s.find("@import") == std::string::npos);
    }
    CHECK(count(slurp(a / "report.csv"), "\n") == 21);
    CHECK(count(slurp(a / "curves.svg"), "<polyline") == 12);
    fs::remove_all(a);
    fs::remove_all(b);
  }
}

TEST_CASE("evaluation against the oracle") {
  const TrainedStack s = testing::tiny_stack().stack;
  std::vector<EvalDevice> devices;
  const auto params = sample_params(99, 12);
  for (int i = 0; i < 12; ++i) devices.push_back({i, params[i]});

  const EvalReport fwd = eval_forward(s, devices, false);
  CHECK(fwd.records.size() == 12);
  CHECK(fwd.r2_ion <= 1.0);
  CHECK(fwd.r2_ioff <= 1.0);
  CHECK(fwd.records[3].log_ion_true == std::log10(simulate_iv(params[3]).currents[50]));
  CHECK(fwd.meta.mode == "forward");

  const EvalReport hand = eval_forward(s, devices, true, 40);
  CHECK(hand.meta.mode == "forward-hand-drawn");
  CHECK(hand.records.size() == 12);
  const EvalReport hand_again = eval_forward(s, devices, true, 40);
  CHECK(hand.r2_ion == hand_again.r2_ion);

  const EvalReport inv = eval_inverse(s, devices, 0.08, 7);
  CHECK(inv.records.size() + static_cast<std::size_t>(inv.excluded) == 12);
  for (const auto& rec : inv.records) {
    REQUIRE(rec.noisy.has_value());
    CHECK(rec.noisy->currents[0] == rec.reference.currents[0]);
    CHECK(rec.noisy->currents[50] == rec.reference.currents[50]);
    CHECK(rec.designed.has_value());
  }

  CHECK_THROWS_AS(eval_forward(s, std::vector<EvalDevice>{}, false), DegenerateData);
  CHECK_THROWS_AS(eval_inverse(s, std::vector<EvalDevice>{}, 0.08, 1), DegenerateData);
}

// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "ivmap/errors.hpp"
#include "ivmap/pipelines.hpp"
#include "tiny_stack.hpp"

using namespace ivmap;

TEST_CASE("image and curve matrices") {
  const auto params = sample_params(2, 3);
  const DeviceImage img = render(params[0]);
  const Matrix m = image_matrix(std::vector<DeviceImage>{img});
  CHECK(m.rows() == kImagePixels);
  CHECK(m(0, 0) == img.pixels[0] / 255.0);
  const IVCurve c = simulate_iv(params[1]);
  const Matrix y = curve_matrix(std::vector<IVCurve>{c});
  CHECK(y(50, 0) == normalize_curve(c)[50]);
}

TEST_CASE("stacked paths") {
  const StackTraining t = testing::tiny_stack();
  const TrainedStack& s = t.stack;
  CHECK(t.image_trace.size() == 15);
  CHECK(t.curve_trace.size() == 60);
  CHECK(s.passes == PassCounts{2, 3, 1});
  CHECK(s.fwd_bridge.in_dim == 6);
  CHECK(s.fwd_bridge.out_dim == 4);
  CHECK(s.inv_bridge.in_dim == 4);
  CHECK(s.inv_bridge.out_dim == 6);

  const auto probe = sample_params(77, 4);
  SUBCASE("forward prediction is deterministic and well formed") {
    const DeviceImage img = render(probe[0]);
    const IVCurve a = forward_predict(s, img);
    const IVCurve b = forward_predict(s, img);
    CHECK(a == b);
    for (double v : a.currents) CHECK((std::isfinite(v) && v > 0.0));
    std::vector<DeviceImage> imgs;
    for (const auto& p : probe) imgs.push_back(render(p));
    CHECK(forward_predict(s, imgs).size() == 4);
  }
  SUBCASE("inverse design is deterministic") {
    const IVCurve target = simulate_iv(probe[1]);
    const DeviceImage a = inverse_design(s, target);
    CHECK(a.pixels == inverse_design(s, target).pixels);
    const DesignResult r = inverse_design_with_params(s, target);
    CHECK(r.image.pixels == a.pixels);
    CHECK((r.params.has_value() || !r.extract_error.empty()));
  }
  SUBCASE("pass counts change the result and zero passes are allowed") {
    TrainedStack z = s;
    z.passes = {0, 0, 0};
    const DeviceImage img = render(probe[2]);
    CHECK_NOTHROW(forward_predict(z, img));
    CHECK_NOTHROW(inverse_design(z, simulate_iv(probe[2])));
  }
  SUBCASE("validation") {
    TrainedStack bad = s;
    bad.passes.image_post = -1;
    CHECK_THROWS_AS(validate(bad), DomainError);
    bad = s;
    std::swap(bad.fwd_bridge, bad.inv_bridge);
    CHECK_THROWS_AS(validate(bad), ShapeMismatch);
    IVCurve broken = simulate_iv(probe[3]);
    broken.currents[10] = -1.0;
    CHECK_THROWS_AS(inverse_design(s, broken), DomainError);
  }
}

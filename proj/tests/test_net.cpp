// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "ivmap/errors.hpp"
#include "ivmap/net.hpp"

using namespace ivmap;

namespace {

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Scalar objective used by the finite-difference oracle.
double objective(const NetParams& net, const Matrix& x, const Matrix& w) {
  return (forward(net, x).array() * w.array()).sum();
}

bool close(double analytic, double numeric, double rel) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) <= rel * scale;
}

void gradient_check(Activation hidden, Activation out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<LayerSpec> specs = {{5, 16, hidden}, {16, 9, hidden}, {9, 4, out}};
  NetParams net = init_params(specs, seed);
  for (auto& l : net.layers) l.bias = random_matrix(l.bias.size(), 1, rng).col(0) * 0.1;
  const Matrix x = random_matrix(5, 3, rng);
  const Matrix w = random_matrix(4, 3, rng);

  ForwardCache cache;
  forward(net, x, &cache);
  const BackwardResult res = backward(net, cache, w);

  const double h = 1e-5;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    for (int i = 0; i < net.layers[l].weight.size(); ++i) {
      double& p = net.layers[l].weight.data()[i];
      const double saved = p;
      p = saved + h;
      const double up = objective(net, x, w);
      p = saved - h;
      const double down = objective(net, x, w);
      p = saved;
      CHECK(close(res.grads.weight[l].data()[i], (up - down) / (2 * h), 1e-4));
    }
    for (int i = 0; i < net.layers[l].bias.size(); ++i) {
      double& p = net.layers[l].bias[i];
      const double saved = p;
      p = saved + h;
      const double up = objective(net, x, w);
      p = saved - h;
      const double down = objective(net, x, w);
      p = saved;
      CHECK(close(res.grads.bias[l][i], (up - down) / (2 * h), 1e-4));
    }
  }
  Matrix xp = x;
  for (int i = 0; i < x.size(); ++i) {
    xp.data()[i] = x.data()[i] + h;
    const double up = objective(net, xp, w);
    xp.data()[i] = x.data()[i] - h;
    const double down = objective(net, xp, w);
    xp.data()[i] = x.data()[i];
    CHECK(close(res.d_input.data()[i], (up - down) / (2 * h), 1e-4));
  }
}

}  // namespace

TEST_CASE("init_params") {
  const std::vector<LayerSpec> specs = {{6400, 8, Activation::relu}, {8, 3, Activation::sigmoid}};
  const NetParams a = init_params(specs, 42);
  const NetParams b = init_params(specs, 42);
  CHECK(a.layers[0].weight == b.layers[0].weight);
  CHECK(a.layers[1].weight == b.layers[1].weight);
  CHECK(a.layers[0].weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 6400));
  CHECK(a.layers[1].weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 11));
  CHECK(a.layers[0].bias.isZero(0.0));
  CHECK(a.layers[1].bias.isZero(0.0));
  CHECK(a.parameter_count() == 6400 * 8 + 8 + 8 * 3 + 3);

  const std::vector<LayerSpec> broken = {{4, 8, Activation::relu}, {7, 3, Activation::linear}};
  CHECK_THROWS_AS(init_params(broken, 1), ShapeMismatch);
  CHECK_THROWS_AS(init_params(std::vector<LayerSpec>{}, 1), ShapeMismatch);
}

TEST_CASE("forward closed forms") {
  NetParams zero = init_params(std::vector<LayerSpec>{{3, 2, Activation::linear}}, 1);
  zero.layers[0].weight.setZero();
  CHECK(forward_single(zero, Vector::Ones(3)).isZero(0.0));

  NetParams relu = init_params(std::vector<LayerSpec>{{1, 1, Activation::relu}}, 1);
  relu.layers[0].weight(0, 0) = -1.0;
  CHECK(forward_single(relu, Vector::Constant(1, 2.0))(0) == 0.0);

  NetParams sig = init_params(std::vector<LayerSpec>{{1, 1, Activation::sigmoid}}, 1);
  sig.layers[0].weight(0, 0) = 0.0;
  CHECK(forward_single(sig, Vector::Constant(1, 123.0))(0) == 0.5);

  CHECK_THROWS_AS(forward_single(sig, Vector::Ones(2)), ShapeMismatch);
}

TEST_CASE("backward matches central differences for every activation") {
  gradient_check(Activation::relu, Activation::linear, 1);
  gradient_check(Activation::relu, Activation::sigmoid, 2);
  gradient_check(Activation::sigmoid, Activation::linear, 3);
  gradient_check(Activation::linear, Activation::relu, 4);
}

TEST_CASE("backward closed forms") {
  std::mt19937_64 rng(9);
  NetParams lin = init_params(std::vector<LayerSpec>{{4, 3, Activation::linear}}, 3);
  const Matrix x = random_matrix(4, 1, rng);
  ForwardCache cache;
  forward(lin, x, &cache);
  const Matrix d = random_matrix(3, 1, rng);
  const BackwardResult r = backward(lin, cache, d);
  CHECK((r.grads.weight[0] - d * x.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.grads.bias[0] == d.col(0));

  const BackwardResult z = backward(lin, cache, Matrix::Zero(3, 1));
  CHECK(z.grads.weight[0].isZero(0.0));
  CHECK(z.grads.bias[0].isZero(0.0));
  CHECK(z.d_input.isZero(0.0));

  CHECK_THROWS_AS(backward(lin, cache, Matrix::Zero(2, 1)), ShapeMismatch);
}

TEST_CASE("adam_step") {
  NetParams net = init_params(std::vector<LayerSpec>{{1, 1, Activation::linear}}, 5);
  const NetParams before = net;
  AdamState state = AdamState::fresh(net);
  adam_step(net, NetGrads::zeros_like(net), state);
  CHECK(net.layers[0].weight == before.layers[0].weight);
  CHECK(state.step == 1);

  // first step with g = 1: m_hat = v_hat = 1, so the move is lr / (1 + eps)
  net = before;
  state = AdamState::fresh(net, {0.001, 0.9, 0.999, 1e-8});
  NetGrads g = NetGrads::zeros_like(net);
  g.weight[0](0, 0) = 1.0;
  adam_step(net, g, state);
  CHECK(net.layers[0].weight(0, 0) - before.layers[0].weight(0, 0) ==
        doctest::Approx(-0.001 / (1.0 + 1e-8)).epsilon(1e-12));

  // alternating +-1 gradients: the parameter stays within a few steps of start
  net = before;
  state = AdamState::fresh(net);
  double lo = 1e9, hi = -1e9;
  for (int i = 0; i < 100; ++i) {
    g.weight[0](0, 0) = i % 2 == 0 ? 1.0 : -1.0;
    adam_step(net, g, state);
    const double drift = net.layers[0].weight(0, 0) - before.layers[0].weight(0, 0);
    lo = std::min(lo, drift);
    hi = std::max(hi, drift);
  }
  CHECK(hi - lo < 0.01);

  // zero learning rate is the identity
  net = before;
  state = AdamState::fresh(net, {0.0, 0.9, 0.999, 1e-8});
  adam_step(net, g, state);
  CHECK(net.layers[0].weight == before.layers[0].weight);
}

TEST_CASE("checkpoint round trip") {
  const std::vector<LayerSpec> specs = {{7, 5, Activation::relu}, {5, 2, Activation::sigmoid}};
  NetCheckpoint ckpt{init_params(specs, 11), {}, 11};
  ckpt.adam = AdamState::fresh(ckpt.params, {0.01, 0.8, 0.99, 1e-7});
  NetGrads g = NetGrads::zeros_like(ckpt.params);
  g.weight[0].setConstant(0.3);
  adam_step(ckpt.params, g, ckpt.adam);

  std::stringstream ss;
  write_checkpoint(ss, ckpt);
  const std::string bytes = ss.str();
  const NetCheckpoint back = read_checkpoint(ss);
  CHECK(back.seed == 11);
  CHECK(back.params.specs() == specs);
  for (std::size_t l = 0; l < specs.size(); ++l) {
    CHECK(back.params.layers[l].weight == ckpt.params.layers[l].weight);
    CHECK(back.params.layers[l].bias == ckpt.params.layers[l].bias);
    CHECK(back.adam.first_moment.weight[l] == ckpt.adam.first_moment.weight[l]);
    CHECK(back.adam.second_moment.weight[l] == ckpt.adam.second_moment.weight[l]);
  }
  CHECK(back.adam.step == 1);
  CHECK(back.adam.config.learning_rate == 0.01);

  std::stringstream again;
  write_checkpoint(again, back);
  CHECK(again.str() == bytes);

  std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(read_checkpoint(truncated), CorruptCheckpoint);

  std::string bumped = bytes;
  bumped[8] = 2;  // version field follows the 8-byte magic
  std::stringstream future(bumped);
  CHECK_THROWS_AS(read_checkpoint(future), VersionMismatch);
}

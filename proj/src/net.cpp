// SPDX-License-Identifier: Apache-2.0
#include "ivmap/net.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <string>

#include "ivmap/errors.hpp"

namespace ivmap {

namespace {

void apply_activation(Activation a, Matrix& z) {
  switch (a) {
    case Activation::relu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::sigmoid:
      z = (1.0 + (-z.array()).exp()).inverse().matrix();
      break;
    case Activation::linear:
      break;
  }
}

// dL/dz from dL/da, using the cached post-activation a.
Matrix activation_backward(Activation act, const Matrix& a, const Matrix& d_a) {
  switch (act) {
    case Activation::relu:
      return (a.array() > 0.0).select(d_a, 0.0);
    case Activation::sigmoid:
      return (d_a.array() * a.array() * (1.0 - a.array())).matrix();
    case Activation::linear:
      return d_a;
  }
  return d_a;
}

void check_chain(std::span<const LayerSpec> specs) {
  if (specs.empty()) throw ShapeMismatch("empty layer chain");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].fan_in < 1 || specs[i].fan_out < 1) {
      throw ShapeMismatch("layer " + std::to_string(i) + " has a zero dimension");
    }
    if (i > 0 && specs[i].fan_in != specs[i - 1].fan_out) {
      throw ShapeMismatch("layer " + std::to_string(i) + " fan_in " + std::to_string(specs[i].fan_in) +
                          " does not match previous fan_out " + std::to_string(specs[i - 1].fan_out));
    }
  }
}

// --- checkpoint encoding -----------------------------------------------------

constexpr std::array<char, 8> kMagic = {'I', 'V', 'M', 'A', 'P', 'N', 'E', 'T'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw CorruptCheckpoint("truncated checkpoint");
  return v;
}

void put_doubles(std::ostream& os, const double* data, std::size_t n) {
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

void get_doubles(std::istream& is, double* data, std::size_t n) {
  if (!is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)))) {
    throw CorruptCheckpoint("truncated checkpoint payload");
  }
}

void put_grads(std::ostream& os, const NetGrads& g) {
  for (std::size_t l = 0; l < g.weight.size(); ++l) {
    put_doubles(os, g.weight[l].data(), g.weight[l].size());
    put_doubles(os, g.bias[l].data(), g.bias[l].size());
  }
}

void get_grads(std::istream& is, NetGrads& g) {
  for (std::size_t l = 0; l < g.weight.size(); ++l) {
    get_doubles(is, g.weight[l].data(), g.weight[l].size());
    get_doubles(is, g.bias[l].data(), g.bias[l].size());
  }
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::linear: return "linear";
  }
  return "?";
}

std::vector<LayerSpec> dense_chain(std::span<const int> widths, Activation output) {
  if (widths.size() < 2) throw ShapeMismatch("a chain needs at least two widths");
  std::vector<LayerSpec> specs;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool last = i + 2 == widths.size();
    specs.push_back({widths[i], widths[i + 1], last ? output : Activation::relu});
  }
  check_chain(specs);
  return specs;
}

std::vector<LayerSpec> NetParams::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& l : layers) out.push_back(l.spec);
  return out;
}

std::size_t NetParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

NetParams init_params(std::span<const LayerSpec> specs, std::uint64_t seed) {
  check_chain(specs);
  std::mt19937_64 rng(seed);
  NetParams net;
  for (const auto& s : specs) {
    const double bound = s.activation == Activation::relu
                             ? std::sqrt(6.0 / s.fan_in)
                             : std::sqrt(6.0 / (s.fan_in + s.fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer{s, Matrix(s.fan_out, s.fan_in), Vector::Zero(s.fan_out)};
    // fill row-major so the draw order does not depend on Eigen's storage order
    for (int r = 0; r < s.fan_out; ++r) {
      for (int c = 0; c < s.fan_in; ++c) layer.weight(r, c) = dist(rng);
    }
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Matrix forward(const NetParams& net, const Matrix& x, ForwardCache* cache) {
  if (x.rows() != net.input_dim()) {
    throw ShapeMismatch("input has " + std::to_string(x.rows()) + " rows, network expects " +
                        std::to_string(net.input_dim()));
  }
  if (cache) {
    cache->activations.clear();
    cache->activations.reserve(net.layers.size() + 1);
    cache->activations.push_back(x);
  }
  Matrix a = x;
  for (const auto& layer : net.layers) {
    Matrix z = layer.weight * a;
    z.colwise() += layer.bias;
    apply_activation(layer.spec.activation, z);
    a = std::move(z);
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

Vector forward_single(const NetParams& net, const Vector& x) {
  const Matrix out = forward(net, Matrix(x), nullptr);
  return out.col(0);
}

NetGrads NetGrads::zeros_like(const NetParams& net) {
  NetGrads g;
  for (const auto& l : net.layers) {
    g.weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Vector::Zero(l.bias.size()));
  }
  return g;
}

BackwardResult backward(const NetParams& net, const ForwardCache& cache, const Matrix& d_out,
                        bool want_input_grad) {
  const std::size_t n = net.layers.size();
  if (cache.activations.size() != n + 1) throw ShapeMismatch("cache does not match network depth");
  const Matrix& out = cache.activations.back();
  if (d_out.rows() != out.rows() || d_out.cols() != out.cols()) {
    throw ShapeMismatch("output gradient shape does not match the forward output");
  }

  BackwardResult res;
  res.grads.weight.resize(n);
  res.grads.bias.resize(n);
  Matrix d_a = d_out;
  for (std::size_t k = n; k-- > 0;) {
    const DenseLayer& layer = net.layers[k];
    const Matrix d_z = activation_backward(layer.spec.activation, cache.activations[k + 1], d_a);
    res.grads.weight[k].noalias() = d_z * cache.activations[k].transpose();
    res.grads.bias[k] = d_z.rowwise().sum();
    if (k > 0 || want_input_grad) {
      Matrix next;
      next.noalias() = layer.weight.transpose() * d_z;
      d_a = std::move(next);
    }
  }
  if (want_input_grad) res.d_input = std::move(d_a);
  return res;
}

AdamState AdamState::fresh(const NetParams& net, AdamConfig config) {
  AdamState s;
  s.config = config;
  s.first_moment = NetGrads::zeros_like(net);
  s.second_moment = NetGrads::zeros_like(net);
  return s;
}

void adam_step(NetParams& net, const NetGrads& grads, AdamState& state) {
  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  const double step_size = c.learning_rate / correction1;
  const double sqrt_c2 = std::sqrt(correction2);

  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m.array() = c.beta1 * m.array() + (1.0 - c.beta1) * g.array();
    v.array() = c.beta2 * v.array() + (1.0 - c.beta2) * g.array().square();
    param.array() -= step_size * m.array() / (v.array().sqrt() / sqrt_c2 + c.epsilon);
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    update(net.layers[l].weight, grads.weight[l], state.first_moment.weight[l],
           state.second_moment.weight[l]);
    update(net.layers[l].bias, grads.bias[l], state.first_moment.bias[l], state.second_moment.bias[l]);
  }
}

void write_checkpoint(std::ostream& os, const NetCheckpoint& ckpt) {
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint64_t>(os, ckpt.seed);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.params.layers.size()));
  for (const auto& l : ckpt.params.layers) {
    put<std::int32_t>(os, l.spec.fan_in);
    put<std::int32_t>(os, l.spec.fan_out);
    put<std::uint8_t>(os, static_cast<std::uint8_t>(l.spec.activation));
  }
  for (const auto& l : ckpt.params.layers) {
    put_doubles(os, l.weight.data(), l.weight.size());
    put_doubles(os, l.bias.data(), l.bias.size());
  }
  const AdamConfig& c = ckpt.adam.config;
  put<double>(os, c.learning_rate);
  put<double>(os, c.beta1);
  put<double>(os, c.beta2);
  put<double>(os, c.epsilon);
  put<std::int64_t>(os, ckpt.adam.step);
  put_grads(os, ckpt.adam.first_moment);
  put_grads(os, ckpt.adam.second_moment);
  os.write(kMagic.data(), kMagic.size());
}

NetCheckpoint read_checkpoint(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw CorruptCheckpoint("bad magic; not a network checkpoint");
  }
  const auto version = get<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw VersionMismatch("checkpoint version " + std::to_string(version) + ", this build reads " +
                          std::to_string(kCheckpointVersion));
  }
  NetCheckpoint ckpt;
  ckpt.seed = get<std::uint64_t>(is);
  const auto depth = get<std::uint32_t>(is);
  if (depth == 0 || depth > 64) throw CorruptCheckpoint("implausible layer count");
  std::vector<LayerSpec> specs;
  for (std::uint32_t i = 0; i < depth; ++i) {
    LayerSpec s;
    s.fan_in = get<std::int32_t>(is);
    s.fan_out = get<std::int32_t>(is);
    const auto act = get<std::uint8_t>(is);
    if (act > 2) throw CorruptCheckpoint("unknown activation code");
    s.activation = static_cast<Activation>(act);
    if (s.fan_in < 1 || s.fan_out < 1 || s.fan_in > (1 << 20) || s.fan_out > (1 << 20)) {
      throw CorruptCheckpoint("implausible layer dimensions");
    }
    specs.push_back(s);
  }
  try {
    check_chain(specs);
  } catch (const ShapeMismatch& e) {
    throw CorruptCheckpoint(e.what());
  }
  for (const auto& s : specs) {
    DenseLayer layer{s, Matrix(s.fan_out, s.fan_in), Vector(s.fan_out)};
    get_doubles(is, layer.weight.data(), layer.weight.size());
    get_doubles(is, layer.bias.data(), layer.bias.size());
    ckpt.params.layers.push_back(std::move(layer));
  }
  AdamConfig c;
  c.learning_rate = get<double>(is);
  c.beta1 = get<double>(is);
  c.beta2 = get<double>(is);
  c.epsilon = get<double>(is);
  ckpt.adam = AdamState::fresh(ckpt.params, c);
  ckpt.adam.step = get<std::int64_t>(is);
  get_grads(is, ckpt.adam.first_moment);
  get_grads(is, ckpt.adam.second_moment);
  std::array<char, 8> trailer{};
  if (!is.read(trailer.data(), trailer.size()) || trailer != kMagic) {
    throw CorruptCheckpoint("missing checkpoint trailer");
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const NetCheckpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_checkpoint(os, ckpt);
  if (!os) throw IoError("failed writing " + path.string());
}

NetCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_checkpoint(is);
}

}  // namespace ivmap

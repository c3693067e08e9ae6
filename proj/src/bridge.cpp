// SPDX-License-Identifier: Apache-2.0
#include "ivmap/bridge.hpp"

#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "ivmap/errors.hpp"

namespace ivmap {

namespace {

constexpr std::array<char, 8> kMagic = {'I', 'V', 'M', 'A', 'P', 'P', 'R', 'B'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw CorruptCheckpoint("truncated bridge");
  return v;
}

void put_block(std::ostream& os, const double* p, Eigen::Index n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void get_block(std::istream& is, double* p, Eigen::Index n) {
  if (!is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)))) {
    throw CorruptCheckpoint("truncated bridge payload");
  }
}

// Writes the monomials of one sample into `out` (length feature_count).
template <typename In, typename Out>
void fill_features(const In& x, Out&& out) {
  const Eigen::Index n = x.size();
  Eigen::Index k = 0;
  out[k++] = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) out[k++] = x[i];
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) out[k++] = x[i] * x[j];
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double xij = x[i] * x[j];
      for (Eigen::Index l = j; l < n; ++l) out[k++] = xij * x[l];
    }
  }
}

Matrix standardized_features(const PolyBridge& b, const Matrix& xs) {
  Matrix phi = poly_feature_matrix(xs);
  phi.colwise() -= b.feature_mean;
  phi.array().colwise() /= b.feature_std.array();
  return phi;
}

void check_input(const PolyBridge& b, Eigen::Index rows) {
  if (rows != b.in_dim) {
    throw ShapeMismatch("bridge expects " + std::to_string(b.in_dim) + " inputs, got " + std::to_string(rows));
  }
}

}  // namespace

std::int64_t poly_feature_count(int in_dim) {
  const std::int64_t n = in_dim;
  return (n + 3) * (n + 2) * (n + 1) / 6;
}

Vector poly_features(const Vector& x) {
  Vector out(poly_feature_count(static_cast<int>(x.size())));
  fill_features(x, out);
  return out;
}

Matrix poly_feature_matrix(const Matrix& xs) {
  Matrix out(poly_feature_count(static_cast<int>(xs.rows())), xs.cols());
  for (Eigen::Index c = 0; c < xs.cols(); ++c) fill_features(xs.col(c), out.col(c));
  return out;
}

Matrix PolyBridge::raw_coefficients() const {
  Matrix raw = coef;
  for (Eigen::Index j = 1; j < coef.cols(); ++j) {
    raw.col(j) = coef.col(j) / feature_std[j];
    raw.col(0) -= raw.col(j) * feature_mean[j];
  }
  return raw;
}

PolyBridge fit_bridge(const Matrix& xs, const Matrix& ys, double lambda) {
  if (xs.cols() != ys.cols()) throw ShapeMismatch("bridge inputs and targets differ in sample count");
  if (xs.cols() < 1 || xs.rows() < 1 || ys.rows() < 1) throw ShapeMismatch("bridge fit needs data");
  if (!(lambda >= 0.0)) throw DomainError("ridge weight must be >= 0");
  if (!xs.allFinite() || !ys.allFinite()) throw DomainError("bridge data contains non-finite values");

  PolyBridge b;
  b.in_dim = static_cast<int>(xs.rows());
  b.out_dim = static_cast<int>(ys.rows());
  b.lambda = lambda;

  Matrix phi = poly_feature_matrix(xs);
  const Eigen::Index f = phi.rows();
  const double n = static_cast<double>(phi.cols());
  b.feature_mean = phi.rowwise().mean();
  b.feature_std = ((phi.colwise() - b.feature_mean).array().square().rowwise().sum() / n).sqrt().matrix();
  b.feature_mean[0] = 0.0;
  b.feature_std[0] = 1.0;
  for (Eigen::Index j = 1; j < f; ++j) {
    if (!(b.feature_std[j] > 1e-12 * (1.0 + std::abs(b.feature_mean[j])))) b.feature_std[j] = 1.0;
  }
  phi.colwise() -= b.feature_mean;
  phi.array().colwise() /= b.feature_std.array();

  Matrix gram = Matrix::Zero(f, f);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(phi);
  gram.diagonal().array() += lambda;
  if (!gram.allFinite()) throw SingularSystem("normal matrix has non-finite entries");
  const Matrix rhs = phi * ys.transpose();  // f x out
  phi.resize(0, 0);

  Eigen::LLT<Matrix, Eigen::Lower> llt(gram);
  double jitter = 1e-12 * std::max(1.0, gram.diagonal().mean());
  for (int attempt = 0; llt.info() != Eigen::Success; ++attempt) {
    if (attempt == 6) throw SingularSystem("normal matrix is not positive definite after jitter");
    gram.diagonal().array() += jitter;
    llt.compute(gram);
    jitter *= 100.0;
  }
  b.coef = llt.solve(rhs).transpose();
  if (!b.coef.allFinite()) throw SingularSystem("bridge solve produced non-finite coefficients");
  return b;
}

Vector predict(const PolyBridge& b, const Vector& x) {
  check_input(b, x.size());
  const Vector phi = ((poly_features(x) - b.feature_mean).array() / b.feature_std.array()).matrix();
  return b.coef * phi;
}

Matrix predict_batch(const PolyBridge& b, const Matrix& xs) {
  check_input(b, xs.rows());
  return b.coef * standardized_features(b, xs);
}

double residual_sum_squares(const PolyBridge& b, const Matrix& xs, const Matrix& ys) {
  return (predict_batch(b, xs) - ys).squaredNorm();
}

void write_bridge(std::ostream& os, const PolyBridge& b) {
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kBridgeVersion);
  put<std::int32_t>(os, b.in_dim);
  put<std::int32_t>(os, b.out_dim);
  put<double>(os, b.lambda);
  put_block(os, b.feature_mean.data(), b.feature_mean.size());
  put_block(os, b.feature_std.data(), b.feature_std.size());
  put_block(os, b.coef.data(), b.coef.size());
  os.write(kMagic.data(), kMagic.size());
  if (!os) throw IoError("failed writing bridge");
}

PolyBridge read_bridge(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw CorruptCheckpoint("bad magic; not a bridge");
  const auto version = get<std::uint32_t>(is);
  if (version != kBridgeVersion) {
    throw VersionMismatch("bridge version " + std::to_string(version) + ", this build reads " +
                          std::to_string(kBridgeVersion));
  }
  PolyBridge b;
  b.in_dim = get<std::int32_t>(is);
  b.out_dim = get<std::int32_t>(is);
  if (b.in_dim < 1 || b.in_dim > 4096 || b.out_dim < 1 || b.out_dim > 1 << 20) {
    throw CorruptCheckpoint("implausible bridge dimensions");
  }
  b.lambda = get<double>(is);
  const auto f = static_cast<Eigen::Index>(b.feature_count());
  b.feature_mean.resize(f);
  b.feature_std.resize(f);
  b.coef.resize(b.out_dim, f);
  get_block(is, b.feature_mean.data(), f);
  get_block(is, b.feature_std.data(), f);
  get_block(is, b.coef.data(), b.coef.size());
  std::array<char, 8> trailer{};
  if (!is.read(trailer.data(), trailer.size()) || trailer != kMagic) throw CorruptCheckpoint("missing bridge trailer");
  return b;
}

}  // namespace ivmap

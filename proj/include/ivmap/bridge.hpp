// SPDX-License-Identifier: Apache-2.0
//
// Cubic polynomial ridge regression between latent spaces.
#pragma once

#include <cstdint>
#include <iosfwd>

#include "ivmap/net.hpp"

namespace ivmap {

inline constexpr int kBridgeDegree = 3;

/// C(n + 3, 3): monomials of total degree <= 3 in n variables.
std::int64_t poly_feature_count(int in_dim);

/// All monomials of degree <= 3, graded-lexicographic, constant first.
/// For (x, y): 1; x, y; x^2, xy, y^2; x^3, x^2y, xy^2, y^3.
Vector poly_features(const Vector& x);
/// Column-wise features of a batch (in_dim x n) -> (feature_count x n).
Matrix poly_feature_matrix(const Matrix& xs);

struct PolyBridge {
  int in_dim = 0;
  int out_dim = 0;
  double lambda = 0.0;
  Vector feature_mean;  // entry 0 (constant) is 0
  Vector feature_std;   // entry 0 (constant) is 1
  Matrix coef;          // out_dim x feature_count, acts on standardized features

  std::int64_t feature_count() const { return poly_feature_count(in_dim); }
  /// Coefficients on the raw monomials, with standardization folded in.
  Matrix raw_coefficients() const;
};

/// Ridge fit on standardized features through the normal equations. xs and
/// ys hold one sample per column. Throws SingularSystem when the regularized
/// normal matrix stays indefinite after jitter.
PolyBridge fit_bridge(const Matrix& xs, const Matrix& ys, double lambda);

Vector predict(const PolyBridge& b, const Vector& x);
Matrix predict_batch(const PolyBridge& b, const Matrix& xs);

/// Sum of squared residuals of the bridge on (xs, ys).
double residual_sum_squares(const PolyBridge& b, const Matrix& xs, const Matrix& ys);

inline constexpr std::uint32_t kBridgeVersion = 1;

void write_bridge(std::ostream& os, const PolyBridge& b);
/// Throws VersionMismatch or CorruptCheckpoint.
PolyBridge read_bridge(std::istream& is);

}  // namespace ivmap

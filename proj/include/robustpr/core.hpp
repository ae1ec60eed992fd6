#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "robustpr/measurement_operator.hpp"
#include "robustpr/types.hpp"

namespace robustpr {

/// sgn(t) = t/|t|, with sgn(0) = 0. The zero case drops the corresponding
/// term from the subgradient; under Gaussian sampling a_i^T x = 0 is a
/// measure-zero event, so any value in [-1, 1] would do.
inline double sign(double t) {
  if (t > 0.0) return 1.0;
  if (t < 0.0) return -1.0;
  return 0.0;
}

/// floor(fraction * m) with a 1e-9 absolute nudge that absorbs the binary
/// representation of decimal fractions (0.3 * 1000 is 299.999...94 as a
/// double, intended 300). Still a true floor for anything genuinely below an
/// integer. Result clamped to [0, m].
inline Index floor_count(double fraction, Index m) {
  const double scaled = fraction * static_cast<double>(m) + 1e-9;
  const Index k = static_cast<Index>(std::floor(scaled));
  return std::clamp<Index>(k, 0, m);
}

/// Keeps the s entries of largest magnitude and zeroes the rest. Ties at the
/// cut magnitude are broken toward lower indices so that exactly s entries
/// are retained (equivalent to a stable sort by (-|w_i|, i), keep first s).
inline Vector hard_threshold(const Vector& w, SparsityBudget s) {
  const Index m = w.size();
  if (s.count < 0 || s.count > m)
    throw std::invalid_argument("hard_threshold: budget exceeds vector length");
  Vector out = Vector::Zero(m);
  if (s.count == 0) return out;
  if (s.count == m) return w;

  std::vector<Index> idx(static_cast<std::size_t>(m));
  std::iota(idx.begin(), idx.end(), Index{0});
  const auto better = [&w](Index i, Index j) {
    const double ai = std::abs(w[i]);
    const double aj = std::abs(w[j]);
    if (ai != aj) return ai > aj;
    return i < j;
  };
  std::nth_element(idx.begin(), idx.begin() + s.count, idx.end(), better);
  for (Index k = 0; k < s.count; ++k) out[idx[static_cast<std::size_t>(k)]] = w[idx[static_cast<std::size_t>(k)]];
  return out;
}

/// Distance modulo the unrecoverable global sign:
/// min(||x - x*||_2, ||x + x*||_2).
inline double dist(const Vector& x, const Vector& x_star) {
  if (x.size() != x_star.size())
    throw std::invalid_argument("dist: dimension mismatch");
  return std::min((x - x_star).norm(), (x + x_star).norm());
}

/// Distance modulo a global phase: min over phi of ||e^{-j phi} x - x*||_2,
/// which equals sqrt(||x||^2 + ||x*||^2 - 2|<x, x*>|). Evaluated by rotating
/// x onto the optimal phase and subtracting, which stays accurate near zero
/// where the closed form cancels catastrophically. On real inputs this is at
/// most the two-point real dist.
inline double dist_complex(const ComplexVector& x, const ComplexVector& x_star) {
  if (x.size() != x_star.size())
    throw std::invalid_argument("dist_complex: dimension mismatch");
  const std::complex<double> c = x_star.dot(x);  // <x*, x>, conjugate-linear in x*
  const double mag = std::abs(c);
  if (mag == 0.0) return std::sqrt(x.squaredNorm() + x_star.squaredNorm());
  const std::complex<double> rot = std::conj(c) / mag;  // e^{-j phi*}
  return (rot * x - x_star).norm();
}

/// (1/2m) sum_i (y_i - |a_i^T x| - eta_i)^2.
template <MeasurementOperator Op>
double loss(const Vector& x, const Vector& eta, const Vector& y, const Op& a) {
  if (x.size() != a.cols()) throw std::invalid_argument("loss: x has wrong dimension");
  if (y.size() != a.rows() || eta.size() != a.rows())
    throw std::invalid_argument("loss: y/eta have wrong dimension");
  const Vector residual = y - a.apply(x) - eta;
  return residual.squaredNorm() / (2.0 * static_cast<double>(a.rows()));
}

}  // namespace robustpr

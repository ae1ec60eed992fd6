#pragma once

#include <chrono>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "robustpr/core.hpp"
#include "robustpr/rng.hpp"
#include "robustpr/solver.hpp"
#include "robustpr/types.hpp"

namespace robustpr {

/// K diagonal phase masks with entries from {1, -1, j, -j}. The measurement
/// map stacks |unitary-DFT(D^(k) x)| over k, for m = n*K observations.
struct CdpMaskSet {
  Index n = 0;
  std::vector<ComplexVector> masks;
  std::uint64_t seed = 0;

  Index modulations() const { return static_cast<Index>(masks.size()); }
  Index measurements() const { return n * modulations(); }
};

inline CdpMaskSet build_masks(Index n, Index k, std::uint64_t seed) {
  if (n < 1 || k < 1) throw std::invalid_argument("build_masks: n and K must be positive");
  static constexpr std::complex<double> kSymbols[4] = {
      {1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0}};
  auto eng = rng::engine(seed);
  std::uniform_int_distribution<int> pick(0, 3);
  CdpMaskSet set;
  set.n = n;
  set.seed = seed;
  set.masks.reserve(static_cast<std::size_t>(k));
  for (Index j = 0; j < k; ++j) {
    ComplexVector mask(n);
    for (Index i = 0; i < n; ++i) mask[i] = kSymbols[pick(eng)];
    set.masks.push_back(std::move(mask));
  }
  return set;
}

namespace detail {

// One FFT engine per thread; Eigen::FFT caches plans per size internally.
inline Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> fft;
  return fft;
}

}  // namespace detail

/// Unitary DFT (1/sqrt(n) scaling, norm-preserving).
inline ComplexVector unitary_dft(const ComplexVector& v) {
  if (v.size() <= 1) return v;  // kissfft rejects length-1 transforms
  ComplexVector out;
  detail::fft_engine().fwd(out, v);
  return out / std::sqrt(static_cast<double>(v.size()));
}

/// Unitary inverse DFT.
inline ComplexVector unitary_idft(const ComplexVector& v) {
  if (v.size() <= 1) return v;
  ComplexVector out;
  detail::fft_engine().inv(out, v);
  return out * std::sqrt(static_cast<double>(v.size()));
}

namespace detail {

// Measurement rows use the plain (unnormalized) DFT matrix, whose rows have
// squared norm n. That matches the Gaussian model's E||a_i||^2 = n, so the
// (mu/m)-scaled update and the lambda0 magnitude estimate carry over with
// the same constants; under the unitary convention the rows have unit norm
// and the descent stalls at a (1 - mu/n) contraction.
inline ComplexVector dft_rows(const ComplexVector& v) {
  if (v.size() <= 1) return v;
  ComplexVector out;
  fft_engine().fwd(out, v);
  return out;
}

// F^H w = n * F^{-1} w.
inline ComplexVector dft_rows_adjoint(const ComplexVector& v) {
  if (v.size() <= 1) return v;
  ComplexVector out;
  fft_engine().inv(out, v);
  return out * static_cast<double>(v.size());
}

}  // namespace detail

/// The stacked complex linear part: block k is DFT(D^(k) * x).
inline ComplexVector cdp_forward_linear(const ComplexVector& x, const CdpMaskSet& masks) {
  if (x.size() != masks.n) throw std::invalid_argument("cdp_forward_linear: x has wrong dimension");
  ComplexVector out(masks.measurements());
  for (Index k = 0; k < masks.modulations(); ++k)
    out.segment(k * masks.n, masks.n) =
        detail::dft_rows(masks.masks[static_cast<std::size_t>(k)].cwiseProduct(x));
  return out;
}

/// Amplitude measurements |F D^(k) x| stacked over k.
inline Vector cdp_forward(const ComplexVector& x, const CdpMaskSet& masks) {
  return cdp_forward_linear(x, masks).cwiseAbs();
}

/// Complex inner product for one measurement row, computed by transforming
/// the relevant block (rows are never materialized).
inline std::complex<double> cdp_row_inner(Index i, const ComplexVector& x, const CdpMaskSet& masks) {
  if (i < 0 || i >= masks.measurements())
    throw std::out_of_range("cdp_row_inner: index out of range");
  if (x.size() != masks.n) throw std::invalid_argument("cdp_row_inner: x has wrong dimension");
  const Index k = i / masks.n;
  const ComplexVector block =
      detail::dft_rows(masks.masks[static_cast<std::size_t>(k)].cwiseProduct(x));
  return block[i % masks.n];
}

/// (1/m) sum_i w_i a_i, i.e. (1/m) * B^H w with B the stacked linear part:
/// block k contributes conj(D^(k)) * F^H(w_k).
inline ComplexVector cdp_adjoint_weighted(const ComplexVector& w, const CdpMaskSet& masks) {
  if (w.size() != masks.measurements())
    throw std::invalid_argument("cdp_adjoint_weighted: w has wrong dimension");
  ComplexVector acc = ComplexVector::Zero(masks.n);
  for (Index k = 0; k < masks.modulations(); ++k) {
    const ComplexVector block = detail::dft_rows_adjoint(w.segment(k * masks.n, masks.n));
    acc += masks.masks[static_cast<std::size_t>(k)].conjugate().cwiseProduct(block);
  }
  return acc / static_cast<double>(masks.measurements());
}

/// Hermitian PSD map v -> (1/m) sum_i d_i a_i a_i^H v, matrix-free through
/// one forward and one adjoint pass.
struct CdpSpectralMap {
  const CdpMaskSet* masks;
  Vector weights;  // yhat_i^2

  ComplexVector operator()(const ComplexVector& v) const {
    ComplexVector u = cdp_forward_linear(v, *masks);
    for (Index i = 0; i < u.size(); ++i) u[i] *= weights[i];
    return cdp_adjoint_weighted(u, *masks);  // (1/m) sum_i w_i (a_i^H v) a_i
  }
};

inline CdpSpectralMap build_cdp_spectral_operator(const CdpMaskSet& masks, const Vector& y_hat) {
  if (y_hat.size() != masks.measurements())
    throw std::invalid_argument("build_cdp_spectral_operator: y_hat has wrong dimension");
  return CdpSpectralMap{&masks, y_hat.cwiseProduct(y_hat)};
}

/// Sparse additive corruption for CDP observations: floor(fraction * m)
/// uniformly chosen entries, magnitudes uniform in (0, magnitude_cap] with
/// random sign.
inline Vector sample_cdp_corruption(Index m, double fraction, double magnitude_cap,
                                    std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("sample_cdp_corruption: m must be positive");
  if (fraction < 0.0 || fraction >= 1.0)
    throw std::invalid_argument("sample_cdp_corruption: fraction must lie in [0, 1)");
  if (magnitude_cap < 0.0)
    throw std::invalid_argument("sample_cdp_corruption: magnitude_cap must be nonnegative");
  Vector eta = Vector::Zero(m);
  const Index count = floor_count(fraction, m);
  if (count == 0) return eta;
  auto eng = rng::engine(seed);
  std::vector<Index> idx(static_cast<std::size_t>(m));
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Index> pick(i, m - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(eng))]);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> coin(0, 1);
  for (Index i = 0; i < count; ++i) {
    const double magnitude = (1.0 - unit(eng)) * magnitude_cap;  // in (0, cap]
    eta[idx[static_cast<std::size_t>(i)]] = coin(eng) ? magnitude : -magnitude;
  }
  return eta;
}

struct CdpSolveResult {
  ComplexVector x_hat;
  Vector eta_hat;
  int iterations_run = 0;
  bool converged = false;
  std::vector<IterationRecord> history;
  double lambda0 = 0.0;
  ComplexVector x0;
  bool degenerate_spectrum = false;
};

/// The complex variant of the two-stage solver over the CDP operator.
/// Identical structure: Stage I thresholds y, estimates lambda0, power-
/// iterates the capped-weight Hermitian spectral map; Stage II alternates
/// the eta threshold on the real residual with a Wirtinger step whose row
/// weights are (|a_i^H x| + eta_i - y_i) * a_i^H x / |a_i^H x|.
inline CdpSolveResult cdp_solve(const Vector& y, const CdpMaskSet& masks, const SolverConfig& cfg,
                                const ComplexVector* ground_truth = nullptr) {
  validate(cfg);
  const Index m = masks.measurements();
  if (y.size() != m) throw std::invalid_argument("cdp_solve: y has wrong dimension");
  if (ground_truth && ground_truth->size() != masks.n)
    throw std::invalid_argument("cdp_solve: ground truth has wrong dimension");

  const SparsityBudget budget{floor_count(cfg.alpha_hat, m)};
  CdpSolveResult result;

  // Stage I.
  Vector eta = hard_threshold(y, budget);
  const Vector y_hat = y - eta;
  result.lambda0 = estimate_magnitude(y_hat);
  const double cap = kInitWeightCap * result.lambda0;
  const auto spectral = build_cdp_spectral_operator(masks, y.cwiseAbs().cwiseMin(cap));
  const auto top = power_iteration<ComplexVector>(spectral, masks.n, cfg.power_iters,
                                                  rng::derive(cfg.seed, rng::kPowerStart));
  result.degenerate_spectrum = top.degenerate;
  ComplexVector x = result.lambda0 * top.vector;
  result.x0 = x;

  result.history.reserve(static_cast<std::size_t>(cfg.max_iters) + 1);
  const auto record = [&](int t, const ComplexVector& state_x, const Vector& state_eta) {
    IterationRecord rec;
    rec.t = t;
    const Vector residual = y - cdp_forward(state_x, masks) - state_eta;
    rec.loss = residual.squaredNorm() / (2.0 * static_cast<double>(m));
    if (ground_truth) rec.dist = dist_complex(state_x, *ground_truth);
    result.history.push_back(rec);
  };
  record(0, x, eta);

  // Stage II.
  for (int t = 0; t < cfg.max_iters; ++t) {
    const ComplexVector inner = cdp_forward_linear(x, masks);
    const Vector amps = inner.cwiseAbs();
    eta = hard_threshold(y - amps, budget);
    ComplexVector w(m);
    for (Index i = 0; i < m; ++i) {
      if (amps[i] == 0.0) {
        w[i] = 0.0;  // sgn(0) = 0: drop the nondifferentiable term
      } else {
        w[i] = (amps[i] + eta[i] - y[i]) * (inner[i] / amps[i]);
      }
    }
    x -= cfg.step_size * cdp_adjoint_weighted(w, masks);
    if (!x.allFinite()) throw divergence_error(t + 1);
    record(t + 1, x, eta);
  }

  result.iterations_run = cfg.max_iters;
  result.converged = ground_truth != nullptr && result.history.back().dist <= cfg.success_tol;
  result.x_hat = std::move(x);
  result.eta_hat = std::move(eta);
  return result;
}

}  // namespace robustpr

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "robustpr/core.hpp"
#include "robustpr/rng.hpp"
#include "robustpr/types.hpp"

namespace robustpr {

/// Dense Gaussian measurement ensemble: m rows drawn i.i.d. from N(0, I_n).
/// Immutable after construction; regenerating with the same seed is
/// bit-identical.
struct GaussianEnsemble {
  RowMatrix entries;
  std::uint64_t seed = 0;

  Index rows() const { return entries.rows(); }
  Index cols() const { return entries.cols(); }
};

/// Sparse corruption: fraction of affected measurements and the magnitude of
/// each nonzero, in multiples of ||x*||_2.
struct CorruptionSpec {
  double fraction = 0.0;
  double magnitude_scale = 0.5;
};

/// Bounded random noise, entries i.i.d. U(0, level).
struct NoiseSpec {
  double level = 0.0;
};

struct GroundTruth {
  Vector x_star;
  Vector y_star;    // |A x*|
  Vector eta_star;  // sparse corruption
  Vector eps;       // bounded noise
};

struct ObservationSet {
  Vector y;
  std::optional<GroundTruth> ground_truth;
};

inline Vector sample_signal(Index n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_signal: n must be positive");
  auto eng = rng::engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector x(n);
  for (Index i = 0; i < n; ++i) x[i] = normal(eng);
  return x;
}

inline GaussianEnsemble sample_ensemble(Index n, Index m, std::uint64_t seed) {
  if (n < 1 || m < 1) throw std::invalid_argument("sample_ensemble: dimensions must be positive");
  auto eng = rng::engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  GaussianEnsemble ens;
  ens.seed = seed;
  ens.entries.resize(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) ens.entries(i, j) = normal(eng);
  return ens;
}

/// Exactly floor(fraction * m) nonzeros on a uniformly random support; each
/// nonzero is magnitude_scale * x_norm with a uniform random sign.
inline Vector sample_corruption(Index m, const CorruptionSpec& spec, double x_norm,
                                std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("sample_corruption: m must be positive");
  if (spec.fraction < 0.0 || spec.fraction >= 1.0)
    throw std::invalid_argument("sample_corruption: fraction must lie in [0, 1)");
  if (spec.magnitude_scale < 0.0)
    throw std::invalid_argument("sample_corruption: magnitude_scale must be nonnegative");

  Vector eta = Vector::Zero(m);
  const Index k = floor_count(spec.fraction, m);
  if (k == 0) return eta;

  auto eng = rng::engine(seed);
  // Partial Fisher-Yates: the first k slots end up a uniform k-subset.
  std::vector<Index> idx(static_cast<std::size_t>(m));
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index i = 0; i < k; ++i) {
    std::uniform_int_distribution<Index> pick(i, m - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(eng))]);
  }
  const double magnitude = spec.magnitude_scale * x_norm;
  std::uniform_int_distribution<int> coin(0, 1);
  for (Index i = 0; i < k; ++i)
    eta[idx[static_cast<std::size_t>(i)]] = coin(eng) ? magnitude : -magnitude;
  return eta;
}

/// i.i.d. U(0, level). Implemented as level * U(0, 1) so that across noise
/// levels with the same seed the realizations scale exactly — paired
/// comparisons differ only through the level.
inline Vector sample_noise(Index m, const NoiseSpec& spec, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("sample_noise: m must be positive");
  if (spec.level < 0.0) throw std::invalid_argument("sample_noise: level must be nonnegative");
  auto eng = rng::engine(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector eps(m);
  for (Index i = 0; i < m; ++i) eps[i] = spec.level * unit(eng);
  return eps;
}

/// y_i = |a_i^T x*| + eta*_i + eps_i, evaluated as (y*_i + eta*_i) + eps_i.
/// The association is fixed: recomputing it from the stored ground-truth
/// components reproduces y bit for bit.
inline ObservationSet compose_observations(const GaussianEnsemble& a, const Vector& x_star,
                                           const Vector& eta_star, const Vector& eps) {
  if (x_star.size() != a.cols())
    throw std::invalid_argument("compose_observations: x* has wrong dimension");
  if (eta_star.size() != a.rows() || eps.size() != a.rows())
    throw std::invalid_argument("compose_observations: eta*/eps have wrong dimension");

  GroundTruth gt;
  gt.x_star = x_star;
  gt.y_star = (a.entries * x_star).cwiseAbs();
  gt.eta_star = eta_star;
  gt.eps = eps;

  ObservationSet obs;
  obs.y.resize(a.rows());
  for (Index i = 0; i < a.rows(); ++i) obs.y[i] = (gt.y_star[i] + eta_star[i]) + eps[i];
  obs.ground_truth = std::move(gt);
  return obs;
}

// ---------------------------------------------------------------------------
// Binary replay container: observation set plus the generation metadata
// needed to rebuild the ensemble from its seed. Little-endian, versioned.
// ---------------------------------------------------------------------------

struct ReplayMetadata {
  std::uint64_t n = 0;
  std::uint64_t m = 0;
  std::uint64_t seed = 0;
  double alpha = 0.0;
  double magnitude_scale = 0.0;
  double noise_p = 0.0;
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(os, bits);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& is) {
  const std::uint64_t bits = get_u64(is);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

inline void put_vector(std::ostream& os, const Vector& v) {
  put_u64(os, static_cast<std::uint64_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) put_f64(os, v[i]);
}

inline Vector get_vector(std::istream& is) {
  const auto n = static_cast<Index>(get_u64(is));
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = get_f64(is);
  return v;
}

inline constexpr std::uint32_t kReplayMagic = 0x52504f42;  // "BOPR" little-endian
inline constexpr std::uint32_t kReplayVersion = 1;

}  // namespace detail

inline void save_observation_set(const std::string& path, const ObservationSet& obs,
                                 const ReplayMetadata& meta) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_observation_set: cannot open " + path);
  detail::put_u32(os, detail::kReplayMagic);
  detail::put_u32(os, detail::kReplayVersion);
  detail::put_u64(os, meta.n);
  detail::put_u64(os, meta.m);
  detail::put_u64(os, meta.seed);
  detail::put_f64(os, meta.alpha);
  detail::put_f64(os, meta.magnitude_scale);
  detail::put_f64(os, meta.noise_p);
  detail::put_u32(os, obs.ground_truth.has_value() ? 1u : 0u);
  detail::put_vector(os, obs.y);
  if (obs.ground_truth) {
    detail::put_vector(os, obs.ground_truth->x_star);
    detail::put_vector(os, obs.ground_truth->y_star);
    detail::put_vector(os, obs.ground_truth->eta_star);
    detail::put_vector(os, obs.ground_truth->eps);
  }
  if (!os) throw std::runtime_error("save_observation_set: write failed for " + path);
}

inline std::pair<ObservationSet, ReplayMetadata> load_observation_set(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_observation_set: cannot open " + path);
  if (detail::get_u32(is) != detail::kReplayMagic)
    throw std::runtime_error("load_observation_set: bad magic in " + path);
  if (detail::get_u32(is) != detail::kReplayVersion)
    throw std::runtime_error("load_observation_set: unsupported version in " + path);
  ReplayMetadata meta;
  meta.n = detail::get_u64(is);
  meta.m = detail::get_u64(is);
  meta.seed = detail::get_u64(is);
  meta.alpha = detail::get_f64(is);
  meta.magnitude_scale = detail::get_f64(is);
  meta.noise_p = detail::get_f64(is);
  const bool has_gt = detail::get_u32(is) != 0;
  ObservationSet obs;
  obs.y = detail::get_vector(is);
  if (has_gt) {
    GroundTruth gt;
    gt.x_star = detail::get_vector(is);
    gt.y_star = detail::get_vector(is);
    gt.eta_star = detail::get_vector(is);
    gt.eps = detail::get_vector(is);
    obs.ground_truth = std::move(gt);
  }
  if (!is) throw std::runtime_error("load_observation_set: truncated file " + path);
  return {std::move(obs), meta};
}

}  // namespace robustpr

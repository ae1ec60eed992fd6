#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "robustpr/measure.hpp"
#include "robustpr/solver.hpp"
#include "robustpr/types.hpp"

namespace robustpr::bench {

enum class Algorithm { robust_wf, rwf };

inline const char* to_string(Algorithm a) {
  return a == Algorithm::robust_wf ? "robust_wf" : "rwf";
}

inline Algorithm parse_algorithm(const std::string& name) {
  if (name == "robust_wf" || name == "robust-wf") return Algorithm::robust_wf;
  if (name == "rwf") return Algorithm::rwf;
  throw std::invalid_argument("unknown algorithm: " + name);
}

/// One synthetic trial: model parameters plus the solver configuration.
/// trial_seed doubles as the sweep root seed when a TrialSpec serves as a
/// sweep base.
struct TrialSpec {
  Index n = 100;
  Index m = 1000;
  double alpha = 0.0;
  double magnitude_scale = 0.5;
  double noise_p = 0.0;
  Algorithm algorithm = Algorithm::robust_wf;
  SolverConfig cfg;
  std::uint64_t trial_seed = 0;
  bool collect_trace = false;
};

struct TrialOutcome {
  double final_rel_error = std::numeric_limits<double>::quiet_NaN();
  double final_dist = std::numeric_limits<double>::quiet_NaN();
  double signal_norm = 0.0;
  bool success = false;
  int iterations = 0;
  std::vector<double> trace;  // per-iteration relative error, when requested
  double wall_time_ms = 0.0;
  std::string error;  // nonempty when the solver failed; never a crash
};

/// Runs all substream derivation, generation, solving, and evaluation for
/// one trial. Pure function of its TrialSpec.
inline TrialOutcome run_trial(const TrialSpec& spec) {
  TrialOutcome out;
  const auto started = std::chrono::steady_clock::now();
  try {
    const auto ensemble = sample_ensemble(spec.n, spec.m, rng::derive(spec.trial_seed, rng::kEnsemble));
    const Vector x_star = sample_signal(spec.n, rng::derive(spec.trial_seed, rng::kSignal));
    const Vector eta_star =
        sample_corruption(spec.m, {spec.alpha, spec.magnitude_scale}, x_star.norm(),
                          rng::derive(spec.trial_seed, rng::kCorruption));
    const Vector eps =
        sample_noise(spec.m, {spec.noise_p}, rng::derive(spec.trial_seed, rng::kNoise));
    const auto obs = compose_observations(ensemble, x_star, eta_star, eps);

    const DenseOperator op(ensemble.entries);
    SolverConfig cfg = spec.cfg;
    cfg.seed = rng::derive(spec.trial_seed, rng::kSolver);
    const SolverResult result = spec.algorithm == Algorithm::rwf
                                    ? rwf_solve(obs.y, op, cfg, &x_star)
                                    : solve(obs.y, op, cfg, &x_star);

    out.signal_norm = x_star.norm();
    out.final_dist = result.history.back().dist;
    out.final_rel_error = out.final_dist / out.signal_norm;
    out.success = result.converged;
    out.iterations = result.iterations_run;
    if (spec.collect_trace) {
      out.trace.reserve(result.history.size());
      for (const auto& rec : result.history) out.trace.push_back(rec.dist / out.signal_norm);
    }
  } catch (const std::exception& e) {
    out.error = e.what();
    out.success = false;
  }
  out.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return out;
}

/// Static-free worker pool: workers pull indices from a shared counter, each
/// index is processed exactly once, results land in caller-owned slots, so
/// output is deterministic for any worker count.
template <typename Fn>
void parallel_for_index(Index count, int workers, Fn&& fn) {
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  if (workers == 1 || count <= 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto body = [&] {
    for (Index i; (i = next.fetch_add(1)) < count;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int spawn = static_cast<int>(std::min<Index>(workers, count));
  pool.reserve(static_cast<std::size_t>(spawn));
  for (int w = 0; w < spawn; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct SweepRow {
  std::string axis;
  double axis_value = 0.0;
  std::string algorithm;
  Index n = 0;
  Index m = 0;
  double alpha = 0.0;
  double alpha_hat = 0.0;
  double noise_p = 0.0;
  int reps = 0;
  double success_rate = 0.0;
  double mean_rel_error = 0.0;
  double median_rel_error = 0.0;
};

struct SweepTable {
  std::string axis;
  std::vector<SweepRow> rows;
};

namespace detail {

// Lower-median convention for even counts.
inline double lower_median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  return values[(values.size() - 1) / 2];
}

inline SweepRow aggregate_cell(const std::string& axis, double axis_value, const TrialSpec& spec,
                               double alpha_hat, const std::vector<TrialOutcome>& outcomes) {
  SweepRow row;
  row.axis = axis;
  row.axis_value = axis_value;
  row.algorithm = to_string(spec.algorithm);
  row.n = spec.n;
  row.m = spec.m;
  row.alpha = spec.alpha;
  row.alpha_hat = alpha_hat;
  row.noise_p = spec.noise_p;
  row.reps = static_cast<int>(outcomes.size());
  int successes = 0;
  double sum = 0.0;
  std::vector<double> rels;
  rels.reserve(outcomes.size());
  for (const auto& o : outcomes) {
    if (o.success) ++successes;
    sum += o.final_rel_error;
    rels.push_back(o.final_rel_error);
  }
  row.success_rate = static_cast<double>(successes) / static_cast<double>(outcomes.size());
  row.mean_rel_error = sum / static_cast<double>(outcomes.size());
  row.median_rel_error = lower_median(std::move(rels));
  return row;
}

}  // namespace detail

/// Success-rate sweep over the corruption fraction. Per cell, reps trials;
/// the budget follows alpha_hat = 2*alpha unless overridden. Trial k of every
/// cell derives its substreams from (root, cell, k) with the algorithm left
/// out, so robust/baseline sweeps over the same root are paired trial for
/// trial.
inline SweepTable sweep_alpha(const std::vector<double>& alphas, int reps, const TrialSpec& base,
                              int workers = 0,
                              std::optional<double> alpha_hat_override = std::nullopt) {
  if (reps < 1) throw std::invalid_argument("sweep_alpha: reps must be positive");
  if (alphas.empty()) throw std::invalid_argument("sweep_alpha: empty axis");
  const Index cells = static_cast<Index>(alphas.size());
  std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(cells * reps));
  parallel_for_index(cells * reps, workers, [&](Index job) {
    const Index cell = job / reps;
    const Index rep = job % reps;
    TrialSpec spec = base;
    spec.alpha = alphas[static_cast<std::size_t>(cell)];
    spec.cfg.alpha_hat = alpha_hat_override.value_or(2.0 * spec.alpha);
    spec.trial_seed = rng::derive(base.trial_seed, static_cast<std::uint64_t>(cell),
                                  static_cast<std::uint64_t>(rep));
    spec.collect_trace = false;
    outcomes[static_cast<std::size_t>(job)] = run_trial(spec);
  });

  SweepTable table;
  table.axis = "alpha";
  for (Index cell = 0; cell < cells; ++cell) {
    TrialSpec spec = base;
    spec.alpha = alphas[static_cast<std::size_t>(cell)];
    const double alpha_hat = alpha_hat_override.value_or(2.0 * spec.alpha);
    const std::vector<TrialOutcome> slice(outcomes.begin() + cell * reps,
                                          outcomes.begin() + (cell + 1) * reps);
    table.rows.push_back(detail::aggregate_cell("alpha", spec.alpha, spec, alpha_hat, slice));
  }
  return table;
}

/// Success-rate sweep over the sample size m at fixed n and alpha.
inline SweepTable sweep_m(const std::vector<Index>& ms, int reps, const TrialSpec& base,
                          int workers = 0,
                          std::optional<double> alpha_hat_override = std::nullopt) {
  if (reps < 1) throw std::invalid_argument("sweep_m: reps must be positive");
  if (ms.empty()) throw std::invalid_argument("sweep_m: empty axis");
  const Index cells = static_cast<Index>(ms.size());
  std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(cells * reps));
  parallel_for_index(cells * reps, workers, [&](Index job) {
    const Index cell = job / reps;
    const Index rep = job % reps;
    TrialSpec spec = base;
    spec.m = ms[static_cast<std::size_t>(cell)];
    spec.cfg.alpha_hat = alpha_hat_override.value_or(2.0 * spec.alpha);
    spec.trial_seed = rng::derive(base.trial_seed, static_cast<std::uint64_t>(cell),
                                  static_cast<std::uint64_t>(rep));
    spec.collect_trace = false;
    outcomes[static_cast<std::size_t>(job)] = run_trial(spec);
  });

  SweepTable table;
  table.axis = "m";
  for (Index cell = 0; cell < cells; ++cell) {
    TrialSpec spec = base;
    spec.m = ms[static_cast<std::size_t>(cell)];
    const double alpha_hat = alpha_hat_override.value_or(2.0 * spec.alpha);
    const std::vector<TrialOutcome> slice(outcomes.begin() + cell * reps,
                                          outcomes.begin() + (cell + 1) * reps);
    table.rows.push_back(
        detail::aggregate_cell("m", static_cast<double>(spec.m), spec, alpha_hat, slice));
  }
  return table;
}

struct TraceSet {
  std::string algorithm;
  std::vector<std::pair<double, std::vector<double>>> traces;  // (noise level, rel error per iter)
};

/// Per-iteration relative-error traces across noise levels. Every level runs
/// from the same trial seed, so the ensemble/signal/corruption realizations
/// are identical and the noise draws scale exactly with p. The budget follows
/// the same alpha_hat = 2*alpha policy as the sweeps unless overridden.
inline TraceSet convergence_trace(const TrialSpec& base, const std::vector<double>& levels,
                                  int workers = 0,
                                  std::optional<double> alpha_hat_override = std::nullopt) {
  if (levels.empty()) throw std::invalid_argument("convergence_trace: empty level set");
  TraceSet set;
  set.algorithm = to_string(base.algorithm);
  set.traces.resize(levels.size());
  parallel_for_index(static_cast<Index>(levels.size()), workers, [&](Index i) {
    TrialSpec spec = base;
    spec.noise_p = levels[static_cast<std::size_t>(i)];
    spec.cfg.alpha_hat = alpha_hat_override.value_or(2.0 * spec.alpha);
    spec.collect_trace = true;
    spec.trial_seed = rng::derive(base.trial_seed, 0, 0);
    const TrialOutcome out = run_trial(spec);
    set.traces[static_cast<std::size_t>(i)] = {spec.noise_p, out.trace};
  });
  return set;
}

// ---------------------------------------------------------------------------
// CSV persistence. Floats carry 17 significant digits so re-reading
// reproduces the table exactly and files are byte-stable across runs.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline constexpr const char* kSweepHeader =
    "axis,axis_value,algorithm,n,m,alpha,alpha_hat,noise_p,reps,success_rate,mean_rel_error,"
    "median_rel_error";

inline void write_sweep_csv(std::ostream& os, const SweepTable& table) {
  os << kSweepHeader << '\n';
  for (const auto& r : table.rows) {
    os << r.axis << ',' << format_double(r.axis_value) << ',' << r.algorithm << ',' << r.n << ','
       << r.m << ',' << format_double(r.alpha) << ',' << format_double(r.alpha_hat) << ','
       << format_double(r.noise_p) << ',' << r.reps << ',' << format_double(r.success_rate) << ','
       << format_double(r.mean_rel_error) << ',' << format_double(r.median_rel_error) << '\n';
  }
}

inline void emit_sweep_csv(const SweepTable& table, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("emit_sweep_csv: cannot open " + path);
  write_sweep_csv(os, table);
  if (!os) throw std::runtime_error("emit_sweep_csv: write failed for " + path);
}

inline SweepTable read_sweep_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_sweep_csv: cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line != kSweepHeader)
    throw std::runtime_error("read_sweep_csv: bad header in " + path);
  SweepTable table;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    SweepRow row;
    const auto next = [&]() -> std::string {
      if (!std::getline(ls, field, ',')) throw std::runtime_error("read_sweep_csv: short row");
      return field;
    };
    row.axis = next();
    row.axis_value = std::stod(next());
    row.algorithm = next();
    row.n = static_cast<Index>(std::stoll(next()));
    row.m = static_cast<Index>(std::stoll(next()));
    row.alpha = std::stod(next());
    row.alpha_hat = std::stod(next());
    row.noise_p = std::stod(next());
    row.reps = static_cast<int>(std::stol(next()));
    row.success_rate = std::stod(next());
    row.mean_rel_error = std::stod(next());
    row.median_rel_error = std::stod(next());
    table.rows.push_back(std::move(row));
  }
  if (!table.rows.empty()) table.axis = table.rows.front().axis;
  return table;
}

inline constexpr const char* kTraceHeader = "algorithm,noise_p,iter,rel_error";

inline void write_trace_csv(std::ostream& os, const TraceSet& set) {
  os << kTraceHeader << '\n';
  for (const auto& [level, trace] : set.traces)
    for (std::size_t t = 0; t < trace.size(); ++t)
      os << set.algorithm << ',' << format_double(level) << ',' << t << ','
         << format_double(trace[t]) << '\n';
}

inline void emit_trace_csv(const TraceSet& set, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("emit_trace_csv: cannot open " + path);
  write_trace_csv(os, set);
  if (!os) throw std::runtime_error("emit_trace_csv: write failed for " + path);
}

/// Companion gnuplot script referencing an emitted CSV. Plumbing only.
inline void emit_plot_script(const std::string& csv_path, const std::string& script_path,
                             const std::string& kind) {
  std::ofstream os(script_path);
  if (!os) throw std::runtime_error("emit_plot_script: cannot open " + script_path);
  os << "set datafile separator ','\n";
  os << "set key outside\n";
  if (kind == "sweep") {
    os << "set xlabel 'axis value'\nset ylabel 'success rate'\nset yrange [-0.05:1.05]\n";
    os << "plot '" << csv_path << "' every ::1 using 2:10 with linespoints title 'success rate'\n";
  } else {
    os << "set xlabel 'iteration'\nset ylabel 'relative error'\nset logscale y\n";
    os << "plot '" << csv_path << "' every ::1 using 3:4 with lines title 'relative error'\n";
  }
  if (!os) throw std::runtime_error("emit_plot_script: write failed for " + script_path);
}

}  // namespace robustpr::bench

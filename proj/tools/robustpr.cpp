// Command-line front end: single trials, Monte-Carlo sweeps, convergence
// traces, and CDP image recovery, with manifests for exact replay.
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "robustpr/bench.hpp"
#include "robustpr/image.hpp"
#include "robustpr/image_recover.hpp"
#include "robustpr/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct SolverFlags {
  double alpha = 0.0;
  double alpha_hat = 0.0;  // resolved after parse; default 2*alpha
  bool alpha_hat_given = false;
  double corrupt_scale = 0.5;
  double noise_p = 0.0;
  double mu = 0.8;
  int iters = 250;
  int power_iters = 200;
  double tol = 1e-8;
  std::uint64_t seed = 0;
  std::string algo = "robust-wf";
  std::string out_dir;
  int threads = 0;
};

void add_solver_flags(CLI::App* cmd, SolverFlags& f, bool with_model) {
  if (with_model) {
    cmd->add_option("--alpha", f.alpha, "Corruption fraction")
        ->check(CLI::Range(0.0, 0.999))
        ->capture_default_str();
    cmd->add_option("--corrupt-scale", f.corrupt_scale,
                    "Corruption magnitude in multiples of ||x*||")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("--noise-p", f.noise_p, "Uniform noise level p, entries ~ U(0,p)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("--algo", f.algo, "Algorithm: robust-wf | rwf")
        ->check(CLI::IsMember({"robust-wf", "rwf"}))
        ->capture_default_str();
  }
  cmd->add_option("--alpha-hat", f.alpha_hat,
                  "Sparsity budget fraction (default: 2*alpha)")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--mu", f.mu, "Step size")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--iters", f.iters, "Gradient iterations T")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--power-iters", f.power_iters, "Power iterations in Stage I")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--tol", f.tol, "Success tolerance on dist(x, x*)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--seed", f.seed, "Root seed")
      ->envname("ROBUSTPR_SEED")
      ->capture_default_str();
  cmd->add_option("--out", f.out_dir, "Output directory (default ./out/<timestamp>-<command>)");
  cmd->add_option("--threads", f.threads, "Worker cap, 0 = machine parallelism")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  // Handled by expand_config_args before parsing; registered here so the
  // option is accepted and shows up in --help.
  cmd->add_option("--config", "Flat key=value config file; command-line flags override")
      ->option_text("FILE");
}

// Reads a flat key=value config file (keys are long option names without the
// leading dashes, '#' comments allowed) and appends the corresponding flags
// to the command line. Flags already present on the command line win.
std::vector<std::string> expand_config_args(const std::vector<std::string>& argv) {
  std::string config_path;
  for (std::size_t i = 1; i < argv.size(); ++i) {
    if (argv[i] == "--config" && i + 1 < argv.size()) config_path = argv[i + 1];
    else if (argv[i].rfind("--config=", 0) == 0) config_path = argv[i].substr(9);
  }
  std::vector<std::string> expanded = argv;
  if (config_path.empty()) return expanded;

  std::ifstream is(config_path);
  if (!is) throw std::runtime_error("cannot open config file: " + config_path);
  const auto given = [&argv](const std::string& flag) {
    for (const auto& a : argv)
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
  };
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || key == "config") continue;
    const std::string flag = "--" + key;
    if (given(flag)) continue;
    expanded.push_back(flag);
    expanded.push_back(value);
  }
  return expanded;
}

robustpr::SolverConfig solver_config(const SolverFlags& f) {
  robustpr::SolverConfig cfg;
  cfg.step_size = f.mu;
  cfg.max_iters = f.iters;
  cfg.power_iters = f.power_iters;
  cfg.alpha_hat = f.alpha_hat;
  cfg.success_tol = f.tol;
  cfg.seed = f.seed;
  return cfg;
}

std::string utc_timestamp(const char* format) {
  const std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[64];
  std::strftime(buf, sizeof(buf), format, &tm_utc);
  return buf;
}

fs::path prepare_out_dir(SolverFlags& f, const std::string& command) {
  fs::path dir = f.out_dir.empty()
                     ? fs::path("out") / (utc_timestamp("%Y%m%d-%H%M%S") + "-" + command)
                     : fs::path(f.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string());
  f.out_dir = dir.string();
  return dir;
}

// The manifest is written before any computation: command line, resolved
// configuration, and planned outputs suffice to replay the run.
void write_manifest(const fs::path& dir, const std::string& command,
                    const std::vector<std::string>& argv, const json& config,
                    std::uint64_t root_seed, const std::vector<std::string>& outputs) {
  json manifest;
  manifest["artifact_version"] = robustpr::kArtifactVersion;
  manifest["command"] = command;
  manifest["argv"] = argv;
  manifest["created_utc"] = utc_timestamp("%Y-%m-%dT%H:%M:%SZ");
  manifest["root_seed"] = root_seed;
  manifest["config"] = config;
  manifest["outputs"] = outputs;
  std::ofstream os(dir / "manifest.json");
  if (!os) throw std::runtime_error("cannot write manifest in " + dir.string());
  os << manifest.dump(2) << "\n";
  if (!os) throw std::runtime_error("manifest write failed in " + dir.string());
}

json common_config(const SolverFlags& f) {
  json c;
  c["alpha"] = f.alpha;
  c["alpha_hat"] = f.alpha_hat;
  c["corrupt_scale"] = f.corrupt_scale;
  c["noise_p"] = f.noise_p;
  c["mu"] = f.mu;
  c["iters"] = f.iters;
  c["power_iters"] = f.power_iters;
  c["tol"] = f.tol;
  c["seed"] = f.seed;
  c["algo"] = f.algo;
  c["threads"] = f.threads;
  c["out"] = f.out_dir;
  return c;
}

std::vector<std::string> capture_argv(int argc, char** argv) {
  return std::vector<std::string>(argv, argv + argc);
}

// ---------------------------------------------------------------------------

int run_trial_command(const std::vector<std::string>& argv, SolverFlags& f, robustpr::Index n,
                      robustpr::Index m) {
  const fs::path dir = prepare_out_dir(f, "trial");
  json config = common_config(f);
  config["n"] = n;
  config["m"] = m;
  write_manifest(dir, "trial", argv, config, f.seed, {"trace.csv"});

  robustpr::bench::TrialSpec spec;
  spec.n = n;
  spec.m = m;
  spec.alpha = f.alpha;
  spec.magnitude_scale = f.corrupt_scale;
  spec.noise_p = f.noise_p;
  spec.algorithm = robustpr::bench::parse_algorithm(f.algo);
  spec.cfg = solver_config(f);
  spec.trial_seed = f.seed;
  spec.collect_trace = true;

  const auto outcome = robustpr::bench::run_trial(spec);

  robustpr::bench::TraceSet set;
  set.algorithm = robustpr::bench::to_string(spec.algorithm);
  set.traces.push_back({spec.noise_p, outcome.trace});
  robustpr::bench::emit_trace_csv(set, (dir / "trace.csv").string());

  if (!outcome.error.empty())
    std::cout << "trial: solver error (" << outcome.error << ")";
  else
    std::cout << "trial: success=" << (outcome.success ? 1 : 0)
              << " rel_error=" << robustpr::bench::format_double(outcome.final_rel_error);
  std::cout << " -> " << dir.string() << "\n";
  return 0;  // recovery failure is data, not an error
}

int run_sweep_command(const std::vector<std::string>& argv, SolverFlags& f,
                      const std::string& axis, double from, double to, double step, int reps,
                      robustpr::Index n, robustpr::Index m, bool m_given,
                      std::optional<double> alpha_hat_override) {
  if (from > to) throw CLI::ValidationError("--from/--to", "degenerate range: from > to");
  if (step <= 0.0) throw CLI::ValidationError("--step", "step must be positive");
  if (axis == "alpha" && !m_given)
    throw CLI::ValidationError("--m", "--m is required for an alpha sweep");

  const fs::path dir = prepare_out_dir(f, "sweep");
  json config = common_config(f);
  config["axis"] = axis;
  config["from"] = from;
  config["to"] = to;
  config["step"] = step;
  config["reps"] = reps;
  config["n"] = n;
  if (m_given) config["m"] = m;
  if (alpha_hat_override) config["alpha_hat_override"] = *alpha_hat_override;
  write_manifest(dir, "sweep", argv, config, f.seed, {"sweep.csv", "sweep.gp"});

  robustpr::bench::TrialSpec base;
  base.n = n;
  base.m = m;
  base.alpha = f.alpha;
  base.magnitude_scale = f.corrupt_scale;
  base.noise_p = f.noise_p;
  base.algorithm = robustpr::bench::parse_algorithm(f.algo);
  base.cfg = solver_config(f);
  base.trial_seed = f.seed;

  robustpr::bench::SweepTable table;
  if (axis == "alpha") {
    std::vector<double> alphas;
    for (int k = 0; from + k * step <= to + step / 2; ++k) alphas.push_back(from + k * step);
    table = robustpr::bench::sweep_alpha(alphas, reps, base, f.threads, alpha_hat_override);
  } else {
    std::vector<robustpr::Index> ms;
    for (int k = 0; from + k * step <= to + step / 2; ++k)
      ms.push_back(static_cast<robustpr::Index>(std::llround(from + k * step)));
    table = robustpr::bench::sweep_m(ms, reps, base, f.threads, alpha_hat_override);
  }

  robustpr::bench::emit_sweep_csv(table, (dir / "sweep.csv").string());
  robustpr::bench::emit_plot_script("sweep.csv", (dir / "sweep.gp").string(), "sweep");
  std::cout << "sweep: " << table.rows.size() << " rows -> " << dir.string() << "\n";
  return 0;
}

int run_cdp_command(const std::vector<std::string>& argv, SolverFlags& f,
                    const std::string& image_path, robustpr::Index k, double corrupt_frac,
                    double corrupt_mag, bool alpha_hat_given) {
  const robustpr::Image image = robustpr::load_image(image_path);
  if (!alpha_hat_given) f.alpha_hat = 2.0 * corrupt_frac;

  const fs::path dir = prepare_out_dir(f, "cdp");
  const std::string recon_name = "recon." + image.format;
  json config = common_config(f);
  config["image"] = image_path;
  config["K"] = k;
  config["corrupt_frac"] = corrupt_frac;
  config["corrupt_mag"] = corrupt_mag;
  write_manifest(dir, "cdp", argv, config, f.seed, {"cdp.csv", recon_name});

  robustpr::SolverConfig cfg = solver_config(f);
  const robustpr::CdpCorruptionSpec corruption{corrupt_frac, corrupt_mag};
  const auto recovery = robustpr::image_recover(image, k, cfg, corruption, f.seed);

  {
    std::ofstream os(dir / "cdp.csv");
    if (!os) throw std::runtime_error("cannot write cdp.csv in " + dir.string());
    const std::string name = fs::path(image_path).filename().string();
    robustpr::write_image_csv(os, name, image.width * image.height, k, corruption, f.alpha_hat,
                              recovery);
  }
  robustpr::save_image((dir / recon_name).string(), recovery.reconstructed);

  std::cout << "cdp: aggregate_rel_error="
            << robustpr::bench::format_double(recovery.aggregate_relative_error) << " -> "
            << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robustpr: robust phase retrieval from corrupted magnitude measurements"};
  app.require_subcommand(1);
  const auto raw_argv = capture_argv(argc, argv);

  // trial
  auto* trial = app.add_subcommand("trial", "Run one synthetic trial and write its error trace");
  SolverFlags trial_flags;
  robustpr::Index trial_n = 0, trial_m = 0;
  trial->add_option("--n", trial_n, "Signal dimension")->required()->check(CLI::PositiveNumber);
  trial->add_option("--m", trial_m, "Measurement count")->required()->check(CLI::PositiveNumber);
  add_solver_flags(trial, trial_flags, true);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Monte-Carlo success-rate sweep over alpha or m");
  SolverFlags sweep_flags;
  std::string sweep_axis;
  double sweep_from = 0.0, sweep_to = 0.0, sweep_step = 0.0;
  int sweep_reps = 20;
  robustpr::Index sweep_n = 0, sweep_m_value = 0;
  sweep->add_option("--axis", sweep_axis, "Sweep axis: alpha | m")
      ->required()
      ->check(CLI::IsMember({"alpha", "m"}));
  sweep->add_option("--from", sweep_from, "First axis value")->required();
  sweep->add_option("--to", sweep_to, "Last axis value")->required();
  sweep->add_option("--step", sweep_step, "Axis increment")->required();
  sweep->add_option("--reps", sweep_reps, "Replications per point")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sweep->add_option("--n", sweep_n, "Signal dimension")->required()->check(CLI::PositiveNumber);
  auto* sweep_m_opt =
      sweep->add_option("--m", sweep_m_value, "Measurement count (alpha axis)")->check(CLI::PositiveNumber);
  add_solver_flags(sweep, sweep_flags, true);

  // cdp
  auto* cdp = app.add_subcommand("cdp", "Recover an image from corrupted coded diffraction patterns");
  SolverFlags cdp_flags;
  std::string cdp_image;
  robustpr::Index cdp_k = 12;
  double cdp_frac = 0.05, cdp_mag = 1.0;
  cdp->add_option("--image", cdp_image, "Input image (PNG, PPM, or PGM)")->required();
  cdp->add_option("--K", cdp_k, "Number of modulation patterns")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cdp->add_option("--corrupt-frac", cdp_frac, "Fraction of corrupted measurements")
      ->check(CLI::Range(0.0, 0.999))
      ->capture_default_str();
  cdp->add_option("--corrupt-mag", cdp_mag, "Corruption magnitude cap in multiples of ||x*||")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  add_solver_flags(cdp, cdp_flags, false);

  try {
    const std::vector<std::string> expanded = expand_config_args(raw_argv);
    std::vector<const char*> args;
    args.reserve(expanded.size());
    for (const auto& a : expanded) args.push_back(a.c_str());
    app.parse(static_cast<int>(args.size()), args.data());

    if (trial->parsed()) {
      if (trial->count("--alpha-hat") == 0) trial_flags.alpha_hat = 2.0 * trial_flags.alpha;
      return run_trial_command(raw_argv, trial_flags, trial_n, trial_m);
    }
    if (sweep->parsed()) {
      std::optional<double> alpha_hat_override;
      if (sweep->count("--alpha-hat") > 0) alpha_hat_override = sweep_flags.alpha_hat;
      return run_sweep_command(raw_argv, sweep_flags, sweep_axis, sweep_from, sweep_to, sweep_step,
                               sweep_reps, sweep_n, sweep_m_value, sweep_m_opt->count() > 0,
                               alpha_hat_override);
    }
    if (cdp->parsed())
      return run_cdp_command(raw_argv, cdp_flags, cdp_image, cdp_k, cdp_frac, cdp_mag,
                             cdp->count("--alpha-hat") > 0);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const robustpr::image_format_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const robustpr::image_read_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

// End-to-end tests of the command-line tool: spawns the built binary and
// checks exit codes, output files, and replay determinism.
#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

#ifndef ROBUSTPR_CLI_PATH
#error "ROBUSTPR_CLI_PATH must be defined"
#endif

struct RunResult {
  int exit_code = -1;
  std::string output;
};

fs::path scratch_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("robustpr_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

RunResult run_cli(const std::string& args) {
  const fs::path log = scratch_dir() / "last_output.txt";
  const std::string command =
      std::string(ROBUSTPR_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(command.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream is(log);
  std::stringstream buf;
  buf << is.rdbuf();
  result.output = buf.str();
  return result;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream buf;
  buf << is.rdbuf();
  return buf.str();
}

nlohmann::json read_manifest(const fs::path& dir) {
  return nlohmann::json::parse(read_file(dir / "manifest.json"));
}

void write_test_pgm(const fs::path& path, int side) {
  std::ofstream os(path, std::ios::binary);
  os << "P5\n" << side << " " << side << "\n255\n";
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) os.put(static_cast<char>((r * 5 + c * 3) % 200 + 30));
}

}  // namespace

TEST_CASE("trial writes a trace and manifest and exits 0") {
  const fs::path out = scratch_dir() / "trial_basic";
  const auto r = run_cli("trial --n 100 --m 1000 --seed 1 --out " + out.string());
  REQUIRE(r.exit_code == 0);
  REQUIRE(fs::exists(out / "trace.csv"));
  REQUIRE(fs::exists(out / "manifest.json"));
  const auto manifest = read_manifest(out);
  REQUIRE(manifest["command"] == "trial");
  REQUIRE(manifest["root_seed"] == 1);

  std::ifstream is(out / "trace.csv");
  std::string header;
  std::getline(is, header);
  REQUIRE(header == "algorithm,noise_p,iter,rel_error");
  int lines = 0;
  std::string line;
  while (std::getline(is, line)) ++lines;
  REQUIRE(lines == 251);  // T+1 points
}

TEST_CASE("trial exits 0 even when recovery fails") {
  const fs::path out = scratch_dir() / "trial_fail";
  const auto r = run_cli("trial --n 64 --m 640 --alpha 0.35 --algo rwf --iters 40 "
                         "--power-iters 30 --seed 2 --out " + out.string());
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.output.find("success=0") != std::string::npos);
}

TEST_CASE("missing required flags exit 2 and name the flag") {
  const auto r = run_cli("trial --m 100");
  REQUIRE(r.exit_code == 2);
  REQUIRE(r.output.find("--n") != std::string::npos);
}

TEST_CASE("alpha-hat defaults to twice alpha in the manifest") {
  const fs::path out = scratch_dir() / "trial_ahat";
  const auto r = run_cli("trial --n 16 --m 80 --alpha 0.05 --iters 3 --power-iters 3 --out " +
                         out.string());
  REQUIRE(r.exit_code == 0);
  REQUIRE(read_manifest(out)["config"]["alpha_hat"].get<double>() == 0.1);
}

TEST_CASE("the seed environment variable applies only when --seed is absent") {
  const auto run_with_env = [](const std::string& args) {
    const std::string cmd = "env ROBUSTPR_SEED=99 " + std::string(ROBUSTPR_CLI_PATH) + " " + args +
                            " > /dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };

  const fs::path out1 = scratch_dir() / "env1";
  const auto r1 = run_cli("trial --n 16 --m 80 --iters 3 --power-iters 3 --out " + out1.string());
  REQUIRE(r1.exit_code == 0);
  REQUIRE(read_manifest(out1)["root_seed"] == 0);  // no env, no flag: default

  const fs::path out2 = scratch_dir() / "env2";
  REQUIRE(run_with_env("trial --n 16 --m 80 --iters 3 --power-iters 3 --out " + out2.string()) ==
          0);
  REQUIRE(read_manifest(out2)["root_seed"] == 99);

  const fs::path out3 = scratch_dir() / "env3";
  REQUIRE(run_with_env("trial --n 16 --m 80 --iters 3 --power-iters 3 --seed 5 --out " +
                       out3.string()) == 0);
  REQUIRE(read_manifest(out3)["root_seed"] == 5);  // explicit flag beats env
}

TEST_CASE("config files supply flags and the command line overrides them") {
  const fs::path cfg = scratch_dir() / "run.ini";
  {
    std::ofstream os(cfg);
    os << "# desk-scale smoke\nn=24\nm=120\niters=4\npower-iters=4\nseed=5\n";
  }
  const fs::path out = scratch_dir() / "cfg_out";
  const auto r = run_cli("trial --config " + cfg.string() + " --out " + out.string());
  REQUIRE(r.exit_code == 0);
  const auto manifest = read_manifest(out);
  REQUIRE(manifest["config"]["n"] == 24);
  REQUIRE(manifest["root_seed"] == 5);

  const fs::path out2 = scratch_dir() / "cfg_out2";
  const auto r2 = run_cli("trial --config " + cfg.string() + " --seed 77 --out " + out2.string());
  REQUIRE(r2.exit_code == 0);
  REQUIRE(read_manifest(out2)["root_seed"] == 77);
}

TEST_CASE("a full alpha sweep has one row per grid point") {
  const fs::path out = scratch_dir() / "sweep41";
  const auto r = run_cli("sweep --axis alpha --from 0 --to 0.4 --step 0.01 --n 16 --m 80 "
                         "--reps 1 --iters 3 --power-iters 3 --seed 3 --out " + out.string());
  REQUIRE(r.exit_code == 0);
  std::ifstream is(out / "sweep.csv");
  std::string line;
  std::getline(is, line);  // header
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  REQUIRE(rows == 41);
  REQUIRE(fs::exists(out / "sweep.gp"));
}

TEST_CASE("an m-axis sweep covers the requested range") {
  const fs::path out = scratch_dir() / "sweepm";
  const auto r = run_cli("sweep --axis m --from 500 --to 4000 --step 500 --n 20 --alpha 0.05 "
                         "--reps 1 --iters 3 --power-iters 3 --out " + out.string());
  REQUIRE(r.exit_code == 0);
  std::ifstream is(out / "sweep.csv");
  std::string line;
  std::getline(is, line);
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  REQUIRE(rows == 8);
}

TEST_CASE("sweep usage errors exit 2") {
  REQUIRE(run_cli("sweep --axis alpha --from 0 --to 0.1 --step 0.01 --n 16 --m 80 --reps 0")
              .exit_code == 2);
  REQUIRE(run_cli("sweep --axis alpha --from 0.3 --to 0.1 --step 0.01 --n 16 --m 80").exit_code ==
          2);
  REQUIRE(run_cli("sweep --axis alpha --from 0 --to 0.1 --step 0.01 --n 16").exit_code == 2);
}

TEST_CASE("replaying a manifest's command reproduces the CSV bytes") {
  const std::string flags = "sweep --axis alpha --from 0 --to 0.02 --step 0.01 --n 32 --m 160 "
                            "--reps 2 --iters 60 --power-iters 50 --seed 9";
  const fs::path out1 = scratch_dir() / "replay1";
  const fs::path out2 = scratch_dir() / "replay2";
  REQUIRE(run_cli(flags + " --out " + out1.string()).exit_code == 0);
  REQUIRE(run_cli(flags + " --out " + out2.string()).exit_code == 0);
  REQUIRE(read_file(out1 / "sweep.csv") == read_file(out2 / "sweep.csv"));

  // Worker count does not change the bytes.
  const fs::path out3 = scratch_dir() / "replay3";
  REQUIRE(run_cli(flags + " --threads 1 --out " + out3.string()).exit_code == 0);
  const fs::path out4 = scratch_dir() / "replay4";
  REQUIRE(run_cli(flags + " --threads 4 --out " + out4.string()).exit_code == 0);
  REQUIRE(read_file(out3 / "sweep.csv") == read_file(out4 / "sweep.csv"));
}

TEST_CASE("cdp recovers a small image and writes all artifacts") {
  const fs::path img = scratch_dir() / "grad.pgm";
  write_test_pgm(img, 16);
  const fs::path out = scratch_dir() / "cdp_out";
  const auto r = run_cli("cdp --image " + img.string() +
                         " --K 8 --corrupt-frac 0.05 --seed 4 --iters 150 --power-iters 80 --out " +
                         out.string());
  REQUIRE(r.exit_code == 0);
  REQUIRE(fs::exists(out / "cdp.csv"));
  REQUIRE(fs::exists(out / "recon.pgm"));
  REQUIRE(fs::exists(out / "manifest.json"));
  std::ifstream is(out / "cdp.csv");
  std::string header, row;
  std::getline(is, header);
  REQUIRE(header == "image,channel,n,K,alpha,alpha_hat,relative_error,iterations,wall_time_ms");
  REQUIRE(std::getline(is, row));
  REQUIRE(row.find("grad.pgm,gray,256,8,") == 0);
  // Default budget is twice the corruption fraction.
  REQUIRE(read_manifest(out)["config"]["alpha_hat"].get<double>() == 0.1);
}

TEST_CASE("cdp distinguishes unreadable and unsupported inputs") {
  REQUIRE(run_cli("cdp --image /nonexistent/image.png").exit_code == 3);
  const fs::path bogus = scratch_dir() / "bogus.dat";
  {
    std::ofstream os(bogus, std::ios::binary);
    os << "ZZ not an image";
  }
  REQUIRE(run_cli("cdp --image " + bogus.string()).exit_code == 2);
  const fs::path img = scratch_dir() / "tiny.pgm";
  write_test_pgm(img, 4);
  REQUIRE(run_cli("cdp --image " + img.string() + " --K 0").exit_code == 2);
}

TEST_CASE("every subcommand lists its flags under --help") {
  for (const std::string sub : {"trial", "sweep", "cdp"}) {
    const auto r = run_cli(sub + " --help");
    REQUIRE(r.exit_code == 0);
    REQUIRE(r.output.find("--seed") != std::string::npos);
    REQUIRE(r.output.find("--out") != std::string::npos);
    REQUIRE(r.output.find("--config") != std::string::npos);
  }
  REQUIRE(run_cli("trial --help").output.find("--alpha-hat") != std::string::npos);
  REQUIRE(run_cli("sweep --help").output.find("--reps") != std::string::npos);
  REQUIRE(run_cli("cdp --help").output.find("--corrupt-frac") != std::string::npos);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "plaquesim/cli.hpp"
#include "plaquesim/config.hpp"
#include "plaquesim/output.hpp"

using namespace plaque;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("plaquesim_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(std::vector<std::string> args, std::string* err_text = nullptr) {
  args.insert(args.begin(), "plaquesim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (err_text) *err_text = err.str();
  return code;
}

std::string config_error(std::string_view text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

LongScaleTrajectory sample_trajectory(const std::string& algo, int dt, bool with_sample) {
  LongScaleTrajectory t;
  t.algorithm = algo;
  t.dt_days = dt;
  if (algo == "two-scale") t.init_strategy = "micro";
  for (int n = 1; n <= 4; ++n) t.records.push_back({n * dt, 0.01 * n, 0.04 - 0.001 * n, 2.0 - 0.1 * n, algo == "two-scale" ? 2 : 0});
  if (with_sample) {
    ShortScaleSample s{4 * dt, 0.25, {-0.1, -0.8, -0.3, 0.0}, 0.03};
    t.samples.push_back(s);
  }
  return t;
}

}  // namespace

TEST_CASE("empty document gives the defaults") {
  const RunConfig c = parse_config("");
  CHECK(c.material.rho_f == 1.0);
  CHECK(c.material.nu_f == 0.04);
  CHECK(c.material.mu_s == 1e4);
  CHECK(c.material.lambda_s == 4e4);
  CHECK(c.material.sigma_0 == 30.0);
  CHECK(c.material.alpha_per_day() == doctest::Approx(0.0432).epsilon(1e-15));
  CHECK(c.timescale.dtau == 0.02);
  CHECK(c.timescale.dt_days == 1);
  CHECK(c.timescale.eps_p == 1e-3);
  CHECK(c.timescale.total_days == 200);
  CHECK(c.mesh.nx == 20);
  CHECK(c.solver.degree == 2);
  CHECK(c.algorithm == Algorithm::both);
  CHECK(c == RunConfig{});
}

TEST_CASE("overrides keep the other defaults") {
  const RunConfig c = parse_config("# comment\n[growth]\nalpha_per_day = 0.0864   # doubled\n");
  CHECK(c.material.alpha == doctest::Approx(1e-6).epsilon(1e-14));
  RunConfig d;
  d.material.alpha = c.material.alpha;
  CHECK(c == d);
  const RunConfig e = parse_config("[timescale]\nsample_days = 1, 5,9\ninit_strategy = macro\n[run]\nalgorithm = two-scale\n");
  CHECK(e.timescale.sample_days == std::vector<int>{1, 5, 9});
  CHECK(e.timescale.init_strategy == InitStrategy::macro);
  CHECK(e.algorithm == Algorithm::two_scale);
}

TEST_CASE("configuration errors name the key and line") {
  CHECK(config_error("[solver]\nbogus = 1") == "unknown key 'bogus' (line 2)");
  CHECK(config_error("[nowhere]\n") == "unknown section 'nowhere' (line 1)");
  CHECK(config_error("rho = 1\n") == "key 'rho' outside of any section (line 1)");
  CHECK(config_error("[fluid]\nrho = 1\nrho = 2\n") == "duplicate key 'rho' (line 3)");
  CHECK(config_error("[fluid]\n\nnu = fast\n").starts_with("invalid value for 'nu' (line 3)"));
  CHECK(config_error("[fluid]\nnu = -0.04\n").starts_with("invalid value for 'nu' (line 2)"));
  CHECK(config_error("[mesh]\nnx = 2.5\n").starts_with("invalid value for 'nx' (line 2)"));
  CHECK(config_error("[timescale]\ndays = 0\n").starts_with("invalid value for 'days' (line 2)"));
  CHECK(config_error("[timescale]\ndays = 25\ndt_days = 10\n") == "days must be a multiple of dt_days");
  CHECK(config_error("[fluid\n") == "malformed section header (line 1)");
  CHECK(config_error("[fluid]\nrho 1\n") == "expected 'key = value' (line 2)");
  CHECK_THROWS_AS(load_config("/nonexistent/plaquesim.ini"), ConfigError);
}

TEST_CASE("serialize and parse round trip") {
  RunConfig c;
  c.material.nu_f = 0.035;
  c.material.set_alpha_per_day(0.05);
  c.geometry.origin_centered = false;
  c.mesh.nx = 12;
  c.solver.theta = 0.5;
  c.timescale.total_days = 30;
  c.timescale.dt_days = 5;
  c.timescale.sample_days = {5, 30};
  c.extra_dt_days = {10, 15};
  c.algorithm = Algorithm::surrogate;
  c.output_dir = "/tmp/out dir";
  c.emit_plots = true;
  const std::string text = serialize_config(c);
  const RunConfig back = parse_config(text);
  CHECK(back == c);
  CHECK(serialize_config(back) == text);
  CHECK(back.material.alpha == c.material.alpha);
  CHECK(parse_config(serialize_config(RunConfig{})) == RunConfig{});

  // A per-second rate with no exact per-day decimal falls back to its own key.
  RunConfig odd;
  odd.material.alpha = 1.0 / 3.0 * 1e-6;
  const RunConfig odd_back = parse_config(serialize_config(odd));
  CHECK(odd_back.material.alpha == odd.material.alpha);
}

TEST_CASE("long-scale CSV") {
  const LongScaleTrajectory t = sample_trajectory("two-scale", 1, true);
  std::ostringstream os;
  write_long_scale_csv(t, os);
  const std::string s = os.str();
  CHECK(s.starts_with("day,c_s,gamma_bar_per_day,width_cm,cycles_used,algorithm\n"));
  CHECK(s.find("\n1,0.01,0.039,1.9,2,two-scale\n") != std::string::npos);
  CHECK(s.find('\r') == std::string::npos);
  CHECK(std::count(s.begin(), s.end(), '\n') == 5);

  LongScaleTrajectory bad = t;
  bad.records[2].width_cm = std::numeric_limits<double>::quiet_NaN();
  std::ostringstream os2;
  CHECK_THROWS_AS(write_long_scale_csv(bad, os2), NonFiniteError);
}

TEST_CASE("short-scale CSV") {
  const MaterialParams p;
  const ShortScaleSample s{3, 0.5, {0.0, -0.8}, 0.0};
  std::ostringstream os;
  write_short_scale_csv(s, p, os);
  std::istringstream in(os.str());
  std::string header, l1, l2;
  std::getline(in, header);
  std::getline(in, l1);
  std::getline(in, l2);
  CHECK(header == "t_s,wss,gamma_per_day");
  CHECK(l1.starts_with("0.5,0,"));
  CHECK(std::stod(l1.substr(l1.rfind(',') + 1)) == p.alpha * kSecondsPerDay);
  CHECK(l2.starts_with("1,-0.8,"));
  CHECK(std::stod(l2.substr(l2.rfind(',') + 1)) == doctest::Approx(0.0432 / 1.64));
}

TEST_CASE("plots") {
  const fs::path dir = scratch("plots");
  fs::create_directories(dir);
  const auto paths = emit_plots({sample_trajectory("averaging", 1, false), sample_trajectory("two-scale", 1, true)}, dir);
  REQUIRE(paths.size() == 4);
  for (const fs::path& p : paths) {
    const std::string s = slurp(p);
    CHECK(s.starts_with("<?xml"));
    CHECK(s.find("<svg") != std::string::npos);
    CHECK(s.find("</svg>") != std::string::npos);
  }
  CHECK(slurp(dir / "wss_heartbeat.svg").find("no short-scale data") == std::string::npos);

  const fs::path single = scratch("plots_single");
  fs::create_directories(single);
  emit_plots({sample_trajectory("averaging", 1, false)}, single);
  CHECK(slurp(single / "cycles_per_step.svg").find("no short-scale data") != std::string::npos);
  CHECK(slurp(single / "wss_heartbeat.svg").find("no short-scale data") != std::string::npos);
  CHECK(slurp(single / "growth_rate.svg").find("no short-scale data") == std::string::npos);

  const fs::path sweep = scratch("plots_sweep");
  fs::create_directories(sweep);
  emit_plots({sample_trajectory("two-scale", 1, true), sample_trajectory("two-scale", 5, true),
              sample_trajectory("two-scale", 10, true)},
             sweep);
  const std::string g = slurp(sweep / "growth_rate.svg");
  for (const char* label : {"dt=1d", "dt=5d", "dt=10d"}) CHECK(g.find(label) != std::string::npos);
  CHECK_THROWS_AS(emit_plots({}, sweep), DomainError);
  CHECK_THROWS(emit_plots({sample_trajectory("averaging", 1, false)}, sweep / "missing"));
}

TEST_CASE("command line exit codes") {
  const fs::path dir = scratch("cli_codes");
  std::string err;
  CHECK(run({"--days", "0", "--out", dir.string()}, &err) == kExitConfig);
  CHECK(err.find("days") != std::string::npos);
  CHECK(run({"--algorithm", "sideways", "--out", dir.string()}) == kExitConfig);
  CHECK(run({"--init-strategy", "meso", "--out", dir.string()}) == kExitConfig);
  CHECK(run({"--no-such-flag"}) == kExitConfig);
  CHECK(run({"--config", "/nonexistent.ini", "--out", dir.string()}) == kExitConfig);

  const fs::path cfg = dir / "bad.ini";
  fs::create_directories(dir);
  std::ofstream(cfg) << "[solver]\nbogus = 1\n";
  CHECK(run({"--config", cfg.string(), "--out", dir.string()}, &err) == kExitConfig);
  CHECK(err.find("unknown key 'bogus' (line 2)") != std::string::npos);

  // One Newton iteration cannot solve the stationary problem.
  const fs::path hard = dir / "hard.ini";
  std::ofstream(hard) << "[mesh]\nnx = 4\nny_fluid = 1\nny_solid = 1\n[solver]\nnewton_max_iter = 1\n"
                         "pseudo_time_continuation = false\n";
  CHECK(run({"--config", hard.string(), "--algorithm", "averaging", "--days", "1", "--out", dir.string()},
            &err) == kExitSolver);
  CHECK(slurp(dir / "run.log").find("solver failure") != std::string::npos);
}

TEST_CASE("a run that breaks down keeps its completed steps") {
  const fs::path dir = scratch("cli_partial");
  fs::create_directories(dir);
  // Growth this fast narrows the coarse channel beyond what day 2 can solve.
  const fs::path cfg = dir / "fast.ini";
  std::ofstream(cfg) << "[mesh]\nnx = 4\nny_fluid = 2\nny_solid = 2\n[growth]\nalpha_per_day = 2\n";
  CHECK(run({"--config", cfg.string(), "--algorithm", "averaging", "--days", "20", "--out", dir.string()}) ==
        kExitSolver);
  const std::string rows = slurp(dir / "long_scale_averaging.csv");
  CHECK(rows.rfind("day,c_s,", 0) == 0);
  CHECK(rows.find("\n1,") != std::string::npos);
  CHECK(rows.find("\n20,") == std::string::npos);
  CHECK(slurp(dir / "run.log").find("written before the failure") != std::string::npos);
}

TEST_CASE("surrogate run is fast, complete and deterministic") {
  const fs::path a = scratch("cli_sur_a"), b = scratch("cli_sur_b");
  const auto t0 = std::chrono::steady_clock::now();
  CHECK(run({"--algorithm", "surrogate", "--days", "200", "--out", a.string(), "--emit-plots"}) == kExitOk);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 1.0);
  CHECK(run({"--algorithm", "surrogate", "--days", "200", "--out", b.string(), "--emit-plots"}) == kExitOk);
  for (const char* f : {"long_scale_surrogate-averaging.csv", "long_scale_surrogate-two-scale.csv",
                        "short_scale_surrogate_day1.csv", "short_scale_surrogate_day200.csv", "growth_rate.svg",
                        "channel_width.svg", "cycles_per_step.svg", "wss_heartbeat.svg", "effective_config.ini",
                        "run.log"}) {
    REQUIRE(fs::exists(a / f));
    CHECK(fs::file_size(a / f) > 0);
  }
  for (const char* f : {"long_scale_surrogate-averaging.csv", "long_scale_surrogate-two-scale.csv",
                        "short_scale_surrogate_day200.csv", "wss_heartbeat.svg"})
    CHECK(slurp(a / f) == slurp(b / f));
  CHECK(parse_config(slurp(a / "effective_config.ini")).algorithm == Algorithm::surrogate);
  const std::string csv = slurp(a / "long_scale_surrogate-two-scale.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 201);
}

TEST_CASE("output directory precedence") {
  const fs::path env_dir = scratch("cli_env"), cfg_dir = scratch("cli_cfg"), flag_dir = scratch("cli_flag");
  setenv("PLAQUESIM_OUT", env_dir.string().c_str(), 1);
  CHECK(run({"--algorithm", "surrogate", "--days", "3"}) == kExitOk);
  CHECK(fs::exists(env_dir / "long_scale_surrogate-averaging.csv"));

  const fs::path cfg = scratch("cli_cfg_file.ini");
  std::ofstream(cfg) << "[run]\noutput_dir = " << cfg_dir.string() << "\n";
  CHECK(run({"--config", cfg.string(), "--algorithm", "surrogate", "--days", "3"}) == kExitOk);
  CHECK(fs::exists(cfg_dir / "long_scale_surrogate-averaging.csv"));

  CHECK(run({"--config", cfg.string(), "--algorithm", "surrogate", "--days", "3", "--out", flag_dir.string()}) ==
        kExitOk);
  CHECK(fs::exists(flag_dir / "long_scale_surrogate-averaging.csv"));
  unsetenv("PLAQUESIM_OUT");
}

TEST_CASE("finite-element averaging run writes its outputs") {
  const fs::path dir = scratch("cli_fem");
  const fs::path cfg = scratch("cli_fem.ini");
  std::ofstream(cfg) << "[mesh]\nnx = 10\nny_fluid = 2\nny_solid = 2\n";
  CHECK(run({"--config", cfg.string(), "--algorithm", "averaging", "--days", "3", "--out", dir.string(),
             "--dump-fields", "--emit-plots"}) == kExitOk);
  const std::string csv = slurp(dir / "long_scale_averaging.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(fs::exists(dir / "fields" / "averaging_day3.csv"));
  CHECK(slurp(dir / "wss_heartbeat.svg").find("no short-scale data") != std::string::npos);
}

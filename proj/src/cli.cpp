#include "plaquesim/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include "plaquesim/config.hpp"
#include "plaquesim/output.hpp"
#include "plaquesim/reduced_oracle.hpp"

namespace plaque {

namespace fs = std::filesystem;

namespace {

constexpr const char* kDefaultOutDir = "plaquesim_out";

class RunLog {
 public:
  explicit RunLog(std::ostream& echo) : echo_(&echo) {}
  void open(const fs::path& p) {
    file_.open(p, std::ios::trunc);
    if (!file_) throw std::runtime_error("cannot write run log '" + p.string() + "'");
  }
  void line(const std::string& s, bool echo = false) {
    if (file_) file_ << s << '\n' << std::flush;
    if (echo) *echo_ << s << '\n';
  }

 private:
  std::ostream* echo_;
  std::ofstream file_;
};

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
  f << s;
}

template <class Fn>
void write_stream(const fs::path& p, Fn&& fn) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
  fn(f);
}

struct Driver {
  const RunConfig& cfg;
  const Mesh& mesh;
  fs::path out;
  RunLog& log;

  RunObserver observer(const std::string& tag) const {
    RunObserver o;
    o.on_day = [this, tag](const DayRecord& r) {
      log.line(tag + " day " + std::to_string(r.day) + " c_s=" + format_number(r.c_s) +
               " gamma_bar=" + format_number(r.gamma_bar) + "/day width=" + format_number(r.width_cm) +
               " cycles=" + std::to_string(r.cycles_used));
    };
    o.notice = [this, tag](const std::string& s) { log.line(tag + ": " + s); };
    return o;
  }

  LongScaleTrajectory run(bool two_scale, int dt_days, const std::string& file_tag) const {
    FsiSolver solver(mesh, cfg.material, cfg.solver);
    FemFlowModel model(solver, cfg.inflow_amplitude);
    TwoScaleSettings ts = cfg.timescale;
    ts.dt_days = dt_days;
    RunObserver obs = observer(file_tag);
    if (cfg.dump_fields) {
      const fs::path dir = out / "fields";
      fs::create_directories(dir);
      obs.on_state = [&solver, dir, file_tag](int day, const State& s) {
        write_stream(dir / (file_tag + "_day" + std::to_string(day) + ".csv"),
                     [&](std::ostream& os) { solver.write_fields_csv(s, os); });
      };
    }
    log.line("running " + file_tag + " (dt=" + std::to_string(dt_days) + "d, " +
             std::to_string(ts.total_days) + " days, " + std::to_string(solver.num_dofs()) + " unknowns)", true);
    LongScaleTrajectory partial;
    partial.algorithm = two_scale ? "two-scale" : "averaging";
    partial.dt_days = dt_days;
    obs.on_day = [&partial, log_day = obs.on_day](const DayRecord& r) {
      partial.records.push_back(r);
      log_day(r);
    };
    try {
      return two_scale ? run_two_scale(model, ts, cfg.material, obs)
                       : run_heuristic_averaging(model, ts, cfg.material, obs);
    } catch (const std::exception&) {
      // Keep the completed steps of a run that breaks down.
      if (!partial.records.empty()) {
        write_stream(out / ("long_scale_" + file_tag + ".csv"),
                     [&](std::ostream& os) { write_long_scale_csv(partial, os); });
        log.line(file_tag + ": steps up to day " + std::to_string(partial.records.back().day) +
                     " written before the failure",
                 true);
      }
      throw;
    }
  }
};

void write_outputs(const LongScaleTrajectory& t, const std::string& file_tag, const std::string& sample_prefix,
                   const RunConfig& cfg, const fs::path& out, RunLog& log) {
  write_stream(out / ("long_scale_" + file_tag + ".csv"), [&](std::ostream& os) { write_long_scale_csv(t, os); });
  for (const ShortScaleSample& s : t.samples)
    write_stream(out / (sample_prefix + "day" + std::to_string(s.day) + ".csv"),
                 [&](std::ostream& os) { write_short_scale_csv(s, cfg.material, os); });
  log.line(trajectory_label(t) + ": final c_s = " + format_number(t.final_c_s()) +
               ", final width = " + format_number(t.records.back().width_cm) + " cm",
           true);
}

int execute(const RunConfig& cfg, const fs::path& out, RunLog& log) {
  std::vector<LongScaleTrajectory> trajs;
  if (cfg.algorithm == Algorithm::surrogate) {
    oracle::SurrogateConfig sc;
    sc.params = cfg.material;
    sc.length = cfg.geometry.length;
    const double H = cfg.geometry.fluid_half_height;
    sc.flux_amplitude = 4.0 / 3.0 * cfg.inflow_amplitude * H;
    sc.width_fn = [H](double c) { return 2.0 * H / growth_scalar(0.0, -1.0, c); };
    auto [avg, two] = oracle::surrogate_two_scale(sc, cfg.timescale);
    write_outputs(avg, avg.algorithm, "", cfg, out, log);
    write_outputs(two, two.algorithm, "short_scale_surrogate_", cfg, out, log);
    trajs = {std::move(avg), std::move(two)};
  } else {
    const Mesh mesh = build_channel_mesh(cfg.geometry, cfg.mesh.nx, cfg.mesh.ny_fluid, cfg.mesh.ny_solid);
    Driver d{cfg, mesh, out, log};
    if (cfg.algorithm == Algorithm::averaging || cfg.algorithm == Algorithm::both) {
      trajs.push_back(d.run(false, cfg.timescale.dt_days, "averaging"));
      write_outputs(trajs.back(), "averaging", "", cfg, out, log);
    }
    if (cfg.algorithm == Algorithm::two_scale || cfg.algorithm == Algorithm::both) {
      trajs.push_back(d.run(true, cfg.timescale.dt_days, "two-scale"));
      write_outputs(trajs.back(), "two-scale", "short_scale_", cfg, out, log);
      for (int dt : cfg.extra_dt_days) {
        const std::string tag = "two-scale_dt" + std::to_string(dt);
        trajs.push_back(d.run(true, dt, tag));
        write_outputs(trajs.back(), tag, "short_scale_dt" + std::to_string(dt) + "_", cfg, out, log);
      }
    }
  }
  if (cfg.emit_plots)
    for (const fs::path& p : emit_plots(trajs, out)) log.line("wrote " + p.string());
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-dimensional FSI plaque growth: heuristic averaging vs two-scale homogenization"};
  std::string config_path, algorithm, init, out_dir;
  std::optional<int> days, dt_days;
  std::optional<double> eps_p;
  bool dump = false, plots = false;
  app.add_option("--config", config_path, "sectioned key = value configuration file");
  app.add_option("--algorithm", algorithm, "averaging, two-scale, both or surrogate");
  app.add_option("--init-strategy", init, "micro or macro");
  app.add_option("--days", days, "long-scale horizon in days");
  app.add_option("--dt-days", dt_days, "long-scale step in days");
  app.add_option("--eps-p", eps_p, "periodicity tolerance in 1/day");
  app.add_option("--out", out_dir, "output directory (default: $PLAQUESIM_OUT, then ./plaquesim_out)");
  app.add_flag("--dump-fields", dump, "write nodal fields of every long-scale step");
  app.add_flag("--emit-plots", plots, "write the four SVG result panels");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  RunLog log(err);
  RunConfig cfg;
  fs::path dir;
  try {
    if (!config_path.empty()) cfg = load_config(config_path);
    if (!algorithm.empty()) cfg.algorithm = parse_algorithm(algorithm);
    if (!init.empty()) cfg.timescale.init_strategy = parse_init_strategy(init);
    if (days) cfg.timescale.total_days = *days;
    if (dt_days) cfg.timescale.dt_days = *dt_days;
    if (eps_p) cfg.timescale.eps_p = *eps_p;
    if (dump) cfg.dump_fields = true;
    if (plots) cfg.emit_plots = true;
    if (!out_dir.empty()) {
      cfg.output_dir = out_dir;
    } else if (cfg.output_dir.empty()) {
      const char* env = std::getenv("PLAQUESIM_OUT");
      cfg.output_dir = env && *env ? env : kDefaultOutDir;
    }
    cfg.validate();
    dir = cfg.output_dir;
    fs::create_directories(dir);
    log.open(dir / "run.log");
    write_text(dir / "effective_config.ini", serialize_config(cfg));
  } catch (const std::exception& e) {
    log.line(std::string("configuration error: ") + e.what());
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  }

  log.line("alpha = " + format_number(cfg.material.alpha_per_day()) + " 1/day = " +
           format_number(cfg.material.alpha) + " 1/s");
  log.line("algorithm = " + std::string(to_string(cfg.algorithm)) + ", output = " + dir.string());
  try {
    const int code = execute(cfg, dir, log);
    out << "results written to " << dir.string() << '\n';
    return code;
  } catch (const ConfigError& e) {
    log.line(std::string("configuration error: ") + e.what(), true);
    return kExitConfig;
  } catch (const NonconvergenceError& e) {
    log.line(std::string("solver failure: ") + e.what(), true);
  } catch (const PeriodicityError& e) {
    log.line(std::string("periodicity failure: ") + e.what(), true);
  } catch (const InvertedElementError& e) {
    log.line(std::string("solver failure: ") + e.what(), true);
  } catch (const NonFiniteError& e) {
    log.line(std::string("numerical failure: ") + e.what(), true);
  } catch (const DomainError& e) {
    log.line(std::string("numerical failure: ") + e.what(), true);
  } catch (const std::exception& e) {
    log.line(std::string("error: ") + e.what(), true);
    return kExitConfig;
  }
  return kExitSolver;
}

}  // namespace plaque

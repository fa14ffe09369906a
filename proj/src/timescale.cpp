#include "plaquesim/timescale.hpp"

#include <algorithm>
#include <cmath>

namespace plaque {

const char* to_string(InitStrategy s) { return s == InitStrategy::micro ? "micro" : "macro"; }

InitStrategy parse_init_strategy(const std::string& s) {
  if (s == "micro") return InitStrategy::micro;
  if (s == "macro") return InitStrategy::macro;
  throw ConfigError("init strategy must be 'micro' or 'macro', got '" + s + "'");
}

int TwoScaleSettings::steps_per_period() const {
  return static_cast<int>(std::lround(period / dtau));
}

void TwoScaleSettings::validate() const {
  if (dt_days < 1) throw ConfigError("dt_days must be at least 1");
  if (!(dtau > 0.0)) throw ConfigError("dtau must be positive");
  if (!(period > 0.0)) throw ConfigError("period must be positive");
  const double n = period / dtau;
  if (std::abs(n - std::round(n)) > 1e-9 * n || std::round(n) < 1)
    throw ConfigError("period / dtau must be a positive integer");
  if (!(eps_p > 0.0)) throw ConfigError("eps_p must be positive");
  if (max_cycles < 2) throw ConfigError("max_cycles must be at least 2");
  if (total_days < 1) throw ConfigError("days must be at least 1");
  if (total_days % dt_days != 0) throw ConfigError("days must be a multiple of dt_days");
  for (int d : sample_days)
    if (d < 1 || d > total_days) throw ConfigError("sample day " + std::to_string(d) + " outside the run");
}

State FemFlowModel::stationary(double c_s, const State* guess) {
  return solver_->solve_stationary(c_s, guess, 0.5 * amplitude_);
}

State FemFlowModel::step(const State& prev, double t_new, double dtau, double c_s) {
  return solver_->step_transient(prev, t_new, dtau, c_s, amplitude_);
}

double FemFlowModel::wall_shear(const State& s) const { return solver_->wall_shear_functional(s); }

double FemFlowModel::width(const State& s) const { return solver_->channel_width(s, 0.0); }

void FemFlowModel::zero_velocity(State& s) const {
  const int n = solver_->space().num_nodes();
  for (int node = 0; node < n; ++node) {
    s.dofs[solver_->space().dof(node, 0)] = 0.0;
    s.dofs[solver_->space().dof(node, 1)] = 0.0;
  }
}

double average_growth(const std::vector<double>& wss_series, double c_s, const MaterialParams& params) {
  if (wss_series.empty()) throw DomainError("average_growth needs at least one sample");
  double sum = 0.0;
  for (double s : wss_series) sum += growth_rate(s, c_s, params);
  return sum / static_cast<double>(wss_series.size()) * kSecondsPerDay;
}

ShortScaleResult run_short_scale_until_periodic(FlowModel& model, const State& init, double c_s,
                                                const TwoScaleSettings& settings,
                                                const MaterialParams& params) {
  settings.validate();
  const int ns = settings.steps_per_period();
  ShortScaleResult res;
  State s = init;
  s.time = 0.0;
  std::vector<double> wss(ns);
  for (int k = 1; k <= settings.max_cycles; ++k) {
    State start = s;
    for (int m = 1; m <= ns; ++m) {
      s = model.step(s, m * settings.dtau, settings.dtau, c_s);
      wss[m - 1] = model.wall_shear(s);
    }
    const double g = average_growth(wss, c_s, params);
    res.gamma_history.push_back(g);
    res.wss_series = wss;
    res.gamma_bar = g;
    res.cycles_used = k;
    res.cycle_start = std::move(start);
    res.cycle_end = s;
    s.time = 0.0;
    if (k >= 2) {
      double diff = std::abs(g - res.gamma_history[k - 2]);
      if (settings.relative_tolerance) diff /= std::abs(g);
      if (diff < settings.eps_p) return res;
    }
  }
  throw PeriodicityError("no periodic heartbeat after " + std::to_string(settings.max_cycles) + " cycles",
                         res.gamma_history);
}

State initial_state(InitStrategy strategy, const ShortScaleResult* prev_short, const State* prev_long,
                    const FlowModel& model, const RunObserver* observer) {
  if (strategy == InitStrategy::micro) {
    if (prev_short) {
      State s = prev_short->cycle_end;
      s.time = 0.0;
      return s;
    }
    if (observer && observer->notice) observer->notice("micro start without a previous heartbeat, using macro");
  }
  if (!prev_long) throw DomainError("macro initialization needs a stationary state");
  State s = *prev_long;
  model.zero_velocity(s);
  s.time = 0.0;
  return s;
}

namespace {

std::string day_context(int day, const std::exception& e) {
  return "day " + std::to_string(day) + ": " + e.what();
}

bool is_sample_day(const TwoScaleSettings& st, int step, int day) {
  if (st.sample_days.empty()) return step == 1 || step == st.num_steps();
  return std::find(st.sample_days.begin(), st.sample_days.end(), day) != st.sample_days.end();
}

}  // namespace

LongScaleTrajectory run_heuristic_averaging(FlowModel& model, const TwoScaleSettings& settings,
                                            const MaterialParams& params, const RunObserver& observer) {
  settings.validate();
  LongScaleTrajectory traj;
  traj.algorithm = "averaging";
  traj.dt_days = settings.dt_days;
  double c = 0.0;
  std::optional<State> prev;
  for (int n = 1; n <= settings.num_steps(); ++n) {
    const int day = n * settings.dt_days;
    State s;
    try {
      s = model.stationary(c, prev ? &*prev : nullptr);
    } catch (const NonconvergenceError& e) {
      throw NonconvergenceError(day_context(day, e), e.residual_history());
    } catch (const InvertedElementError& e) {
      throw NonconvergenceError(day_context(day, e), {});
    }
    DayRecord rec;
    rec.day = day;
    rec.gamma_bar = growth_rate(model.wall_shear(s), c, params) * kSecondsPerDay;
    rec.width_cm = model.width(s);
    c += settings.dt_days * rec.gamma_bar;
    rec.c_s = c;
    traj.records.push_back(rec);
    if (observer.on_day) observer.on_day(rec);
    if (observer.on_state) observer.on_state(day, s);
    prev = std::move(s);
  }
  return traj;
}

LongScaleTrajectory run_two_scale(FlowModel& model, const TwoScaleSettings& settings,
                                  const MaterialParams& params, const RunObserver& observer) {
  settings.validate();
  LongScaleTrajectory traj;
  traj.algorithm = "two-scale";
  traj.init_strategy = to_string(settings.init_strategy);
  traj.dt_days = settings.dt_days;
  double c = 0.0;
  std::optional<State> stat;
  std::optional<ShortScaleResult> last;
  for (int n = 1; n <= settings.num_steps(); ++n) {
    const int day = n * settings.dt_days;
    try {
      const bool skip = settings.init_strategy == InitStrategy::micro && last &&
                        !settings.stationary_every_day;
      if (!skip) stat = model.stationary(c, stat ? &*stat : nullptr);
      const State init = initial_state(settings.init_strategy, last ? &*last : nullptr,
                                       stat ? &*stat : nullptr, model, &observer);
      last = run_short_scale_until_periodic(model, init, c, settings, params);
    } catch (const NonconvergenceError& e) {
      throw NonconvergenceError(day_context(day, e), e.residual_history());
    } catch (const PeriodicityError& e) {
      throw PeriodicityError(day_context(day, e), e.gamma_history());
    } catch (const InvertedElementError& e) {
      throw NonconvergenceError(day_context(day, e), {});
    }
    DayRecord rec;
    rec.day = day;
    rec.gamma_bar = last->gamma_bar;
    rec.width_cm = model.width(last->cycle_end);
    rec.cycles_used = last->cycles_used;
    if (is_sample_day(settings, n, day))
      traj.samples.push_back({day, settings.dtau, last->wss_series, c});
    c += settings.dt_days * rec.gamma_bar;
    rec.c_s = c;
    traj.records.push_back(rec);
    if (observer.on_day) observer.on_day(rec);
    if (observer.on_state) observer.on_state(day, last->cycle_end);
  }
  return traj;
}

}  // namespace plaque

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "plaquesim/constitutive.hpp"
#include "plaquesim/fsi.hpp"

namespace plaque {

enum class InitStrategy { micro, macro };

const char* to_string(InitStrategy s);
InitStrategy parse_init_strategy(const std::string& s);  // throws ConfigError

struct TwoScaleSettings {
  int dt_days = 1;           // long-scale step
  double dtau = 0.02;        // s
  double period = 1.0;       // s
  double eps_p = 1e-3;       // periodicity tolerance on gamma_bar, 1/day
  bool relative_tolerance = false;  // compare |diff| / gamma_bar instead
  int max_cycles = 10;
  InitStrategy init_strategy = InitStrategy::micro;
  int total_days = 200;
  // Re-solve the stationary problem every day even when the micro strategy has a
  // previous heartbeat to start from.
  bool stationary_every_day = false;
  // Days whose accepted heartbeat is kept in the trajectory; empty means the
  // first and the last long-scale step.
  std::vector<int> sample_days;

  int steps_per_period() const;
  int num_steps() const { return total_days / dt_days; }
  void validate() const;
};

// One accepted heartbeat.
struct ShortScaleResult {
  std::vector<double> wss_series;   // sigma_ws at t_m = m dtau, m = 1..N_s
  double gamma_bar = 0.0;           // 1/day
  int cycles_used = 0;
  std::vector<double> gamma_history;  // gamma_bar of every cycle, 1/day
  State cycle_start, cycle_end;
};

// Row n describes long-scale step n: gamma_bar and width are evaluated on the
// geometry at the start of the step, c_s is the value after the update.
struct DayRecord {
  int day = 0;
  double c_s = 0.0;
  double gamma_bar = 0.0;   // 1/day
  double width_cm = 0.0;
  int cycles_used = 0;      // 0 for the heuristic algorithm
};

struct ShortScaleSample {
  int day = 0;
  double dtau = 0.0;
  std::vector<double> wss_series;
  double c_s = 0.0;  // concentration the heartbeat was run at
};

struct LongScaleTrajectory {
  std::string algorithm;  // "averaging", "two-scale" or surrogate variants
  std::string init_strategy;  // two-scale only
  int dt_days = 1;
  std::vector<DayRecord> records;
  std::vector<ShortScaleSample> samples;

  double final_c_s() const { return records.empty() ? 0.0 : records.back().c_s; }
};

// The flow problem as seen by the long-scale drivers. The FEM implementation
// wraps FsiSolver; tests substitute frozen-geometry models.
class FlowModel {
 public:
  virtual ~FlowModel() = default;
  virtual State stationary(double c_s, const State* guess) = 0;
  // One short-scale step to heartbeat-local time t_new.
  virtual State step(const State& prev, double t_new, double dtau, double c_s) = 0;
  virtual double wall_shear(const State& s) const = 0;
  virtual double width(const State& s) const = 0;
  virtual void zero_velocity(State& s) const = 0;
};

class FemFlowModel : public FlowModel {
 public:
  // `amplitude` is the peak centerline inflow; the stationary problem uses half.
  FemFlowModel(FsiSolver& solver, double amplitude = kPeakInflowAmplitude)
      : solver_(&solver), amplitude_(amplitude) {}

  State stationary(double c_s, const State* guess) override;
  State step(const State& prev, double t_new, double dtau, double c_s) override;
  double wall_shear(const State& s) const override;
  double width(const State& s) const override;
  void zero_velocity(State& s) const override;

 private:
  FsiSolver* solver_;
  double amplitude_;
};

// Progress callbacks, all optional. on_state sees the state a day's width was
// measured on.
struct RunObserver {
  std::function<void(const DayRecord&)> on_day;
  std::function<void(int day, const State&)> on_state;
  std::function<void(const std::string&)> notice;
};

// Mean of gamma(sigma_m, c_s) over the samples, in 1/day.
double average_growth(const std::vector<double>& wss_series, double c_s, const MaterialParams& params);

// Heartbeats from `init` until consecutive cycle averages agree to eps_p. Always
// runs at least two cycles. Throws PeriodicityError after max_cycles.
ShortScaleResult run_short_scale_until_periodic(FlowModel& model, const State& init, double c_s,
                                                const TwoScaleSettings& settings,
                                                const MaterialParams& params);

// Start of a heartbeat. Micro copies the end of the previous accepted cycle;
// macro takes the previous stationary state with the velocity zeroed. Without
// the needed history micro falls back to macro; macro without a stationary
// state throws DomainError.
State initial_state(InitStrategy strategy, const ShortScaleResult* prev_short, const State* prev_long,
                    const FlowModel& model, const RunObserver* observer = nullptr);

// Algorithm 1: one stationary solve per long-scale step, forward Euler in c_s.
LongScaleTrajectory run_heuristic_averaging(FlowModel& model, const TwoScaleSettings& settings,
                                            const MaterialParams& params,
                                            const RunObserver& observer = {});

// Algorithm 2: periodic heartbeat per long-scale step, forward Euler with the
// heartbeat-averaged growth rate.
LongScaleTrajectory run_two_scale(FlowModel& model, const TwoScaleSettings& settings,
                                  const MaterialParams& params, const RunObserver& observer = {});

}  // namespace plaque

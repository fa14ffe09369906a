#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "plaquesim/constitutive.hpp"
#include "plaquesim/timescale.hpp"

namespace plaque {

// Shortest round-trip decimal; throws NonFiniteError for NaN or infinity.
std::string format_number(double v);

// day,c_s,gamma_bar_per_day,width_cm,cycles_used,algorithm
void write_long_scale_csv(const LongScaleTrajectory& traj, std::ostream& os);

// t_s,wss,gamma_per_day for the samples t_m = m dtau.
void write_short_scale_csv(const ShortScaleSample& sample, const MaterialParams& params, std::ostream& os);

// Legend text of a trajectory, e.g. "two-scale micro dt=1d".
std::string trajectory_label(const LongScaleTrajectory& traj);

// The four result panels as standalone SVG files in out_dir: growth rate and
// width over days, heartbeat cycles per step, and WSS over the last sampled
// heartbeat. Returns the written paths. Throws std::runtime_error when a file
// cannot be written and DomainError without any trajectory.
std::vector<std::filesystem::path> emit_plots(const std::vector<LongScaleTrajectory>& trajectories,
                                              const std::filesystem::path& out_dir);

}  // namespace plaque

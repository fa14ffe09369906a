#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "plaquesim/constitutive.hpp"
#include "plaquesim/fsi.hpp"
#include "plaquesim/mesh.hpp"
#include "plaquesim/timescale.hpp"

namespace plaque {

enum class Algorithm { averaging, two_scale, both, surrogate };

const char* to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view s);  // throws ConfigError

struct MeshResolution {
  int nx = 20;
  int ny_fluid = 4;
  int ny_solid = 4;
};

struct RunConfig {
  MaterialParams material;
  ChannelGeometry geometry;
  MeshResolution mesh;
  SolverSettings solver;
  TwoScaleSettings timescale;
  // Additional two-scale runs with these long-scale steps (days).
  std::vector<int> extra_dt_days;
  double inflow_amplitude = kPeakInflowAmplitude;  // cm/s
  Algorithm algorithm = Algorithm::both;
  std::string output_dir;  // empty: PLAQUESIM_OUT or the built-in default
  bool dump_fields = false;
  bool emit_plots = false;

  // Whole-config checks; throws ConfigError.
  void validate() const;
};

// Sectioned "key = value" text. '#' starts a comment; every key belongs to a
// [section]. Omitted keys keep their defaults. Throws ConfigError naming the key
// and line on unknown keys, bad values or violated bounds.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

// Every field, in the same grammar; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

bool operator==(const RunConfig& a, const RunConfig& b);

}  // namespace plaque

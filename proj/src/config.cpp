#include "plaquesim/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace plaque {

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::averaging: return "averaging";
    case Algorithm::two_scale: return "two-scale";
    case Algorithm::both: return "both";
    case Algorithm::surrogate: return "surrogate";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view s) {
  if (s == "averaging") return Algorithm::averaging;
  if (s == "two-scale") return Algorithm::two_scale;
  if (s == "both") return Algorithm::both;
  if (s == "surrogate") return Algorithm::surrogate;
  throw ConfigError("algorithm must be one of averaging, two-scale, both, surrogate; got '" +
                    std::string(s) + "'");
}

void RunConfig::validate() const {
  material.validate();
  geometry.validate();
  if (mesh.nx < 1 || mesh.ny_fluid < 1 || mesh.ny_solid < 1)
    throw ConfigError("mesh cell counts must be at least 1");
  solver.validate();
  timescale.validate();
  for (int d : extra_dt_days) {
    TwoScaleSettings t = timescale;
    t.dt_days = d;
    t.validate();
  }
  if (!(inflow_amplitude >= 0.0)) throw ConfigError("inflow amplitude must be non-negative");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_real(std::string_view s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
    throw ConfigError("expected a number, got '" + std::string(s) + "'");
  return v;
}

int to_int(std::string_view s) {
  int v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ConfigError("expected an integer, got '" + std::string(s) + "'");
  return v;
}

bool to_bool(std::string_view s) {
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  throw ConfigError("expected true or false, got '" + std::string(s) + "'");
}

std::vector<int> to_int_list(std::string_view s) {
  std::vector<int> out;
  while (!trim(s).empty()) {
    const auto comma = s.find(',');
    out.push_back(to_int(trim(s.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt_list(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
  return s;
}

void positive(double v) {
  if (!(v > 0.0)) throw ConfigError("must be positive");
}
void non_negative(double v) {
  if (!(v >= 0.0)) throw ConfigError("must be non-negative");
}

struct Field {
  std::string_view section, key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;  // empty: not serialized
};

template <class Acc>
Field real(std::string_view sec, std::string_view key, Acc acc, void (*check)(double) = positive) {
  return {sec, key,
          [acc, check](RunConfig& c, std::string_view v) {
            const double x = to_real(v);
            check(x);
            acc(c) = x;
          },
          [acc](const RunConfig& c) { return fmt(acc(c)); }};
}

template <class Acc>
Field integer(std::string_view sec, std::string_view key, Acc acc, int lo) {
  return {sec, key,
          [acc, lo](RunConfig& c, std::string_view v) {
            const int x = to_int(v);
            if (x < lo) throw ConfigError("must be at least " + std::to_string(lo));
            acc(c) = x;
          },
          [acc](const RunConfig& c) { return std::to_string(acc(c)); }};
}

template <class Acc>
Field boolean(std::string_view sec, std::string_view key, Acc acc) {
  return {sec, key, [acc](RunConfig& c, std::string_view v) { acc(c) = to_bool(v); },
          [acc](const RunConfig& c) { return std::string(acc(c) ? "true" : "false"); }};
}

template <class Acc>
Field int_list(std::string_view sec, std::string_view key, Acc acc) {
  return {sec, key, [acc](RunConfig& c, std::string_view v) { acc(c) = to_int_list(v); },
          [acc](const RunConfig& c) { return fmt_list(acc(c)); }};
}

// alpha is entered per day; when the per-day decimal does not map back to the
// stored per-second value exactly, the per-second key is written instead.
std::string alpha_per_day_text(double alpha) {
  double a = alpha * kSecondsPerDay;
  for (int k = 0; k < 8; ++k) {
    for (double cand : {a, std::nextafter(a, 0.0), std::nextafter(a, 1.0)}) {
      const std::string s = fmt(cand);
      if (to_real(s) / kSecondsPerDay == alpha) return s;
    }
    a = std::nextafter(a, k % 2 ? 0.0 : 1.0);
  }
  return {};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(real("fluid", "rho", [](auto& c) -> auto& { return c.material.rho_f; }));
    f.push_back(real("fluid", "nu", [](auto& c) -> auto& { return c.material.nu_f; }));
    f.push_back(real("solid", "rho", [](auto& c) -> auto& { return c.material.rho_s; }));
    f.push_back(real("solid", "mu", [](auto& c) -> auto& { return c.material.mu_s; }));
    f.push_back(real("solid", "lambda", [](auto& c) -> auto& { return c.material.lambda_s; }));
    f.push_back(real("growth", "sigma_0", [](auto& c) -> auto& { return c.material.sigma_0; }));
    f.push_back({"growth", "alpha_per_day",
                 [](RunConfig& c, std::string_view v) {
                   const double x = to_real(v);
                   positive(x);
                   c.material.set_alpha_per_day(x);
                 },
                 [](const RunConfig& c) { return alpha_per_day_text(c.material.alpha); }});
    f.push_back({"growth", "alpha_per_second",
                 [](RunConfig& c, std::string_view v) {
                   const double x = to_real(v);
                   positive(x);
                   c.material.alpha = x;
                 },
                 [](const RunConfig& c) {
                   return alpha_per_day_text(c.material.alpha).empty() ? fmt(c.material.alpha) : std::string();
                 }});
    f.push_back(real("geometry", "length", [](auto& c) -> auto& { return c.geometry.length; }));
    f.push_back(real("geometry", "fluid_half_height", [](auto& c) -> auto& { return c.geometry.fluid_half_height; }));
    f.push_back(real("geometry", "wall_thickness", [](auto& c) -> auto& { return c.geometry.wall_thickness; }));
    f.push_back(boolean("geometry", "origin_centered", [](auto& c) -> auto& { return c.geometry.origin_centered; }));
    f.push_back(integer("mesh", "nx", [](auto& c) -> auto& { return c.mesh.nx; }, 1));
    f.push_back(integer("mesh", "ny_fluid", [](auto& c) -> auto& { return c.mesh.ny_fluid; }, 1));
    f.push_back(integer("mesh", "ny_solid", [](auto& c) -> auto& { return c.mesh.ny_solid; }, 1));
    f.push_back(integer("mesh", "degree", [](auto& c) -> auto& { return c.solver.degree; }, 1));
    f.push_back(real("solver", "newton_tol", [](auto& c) -> auto& { return c.solver.newton_tol; }));
    f.push_back(integer("solver", "newton_max_iter", [](auto& c) -> auto& { return c.solver.newton_max_iter; }, 1));
    f.push_back(real("solver", "theta", [](auto& c) -> auto& { return c.solver.theta; }));
    f.push_back(real("solver", "lps_delta0", [](auto& c) -> auto& { return c.solver.lps_delta0; }, non_negative));
    f.push_back(boolean("solver", "pseudo_time_continuation",
                        [](auto& c) -> auto& { return c.solver.pseudo_time_continuation; }));
    f.push_back(integer("solver", "continuation_steps", [](auto& c) -> auto& { return c.solver.continuation_steps; }, 1));
    f.push_back(boolean("solver", "reuse_jacobian", [](auto& c) -> auto& { return c.solver.reuse_jacobian; }));
    f.push_back(real("solver", "ale_stiffness", [](auto& c) -> auto& { return c.solver.ale_stiffness; }));
    f.push_back(real("solver", "ale_streamwise_weight",
                     [](auto& c) -> auto& { return c.solver.ale_streamwise_weight; }));
    f.push_back(real("solver", "ale_jacobian_exponent",
                     [](auto& c) -> auto& { return c.solver.ale_jacobian_exponent; }, non_negative));
    f.push_back(real("solver", "backflow_beta", [](auto& c) -> auto& { return c.solver.backflow_beta; }, non_negative));
    f.push_back(integer("solver", "max_step_halvings", [](auto& c) -> auto& { return c.solver.max_step_halvings; }, 0));
    f.push_back(real("flow", "inflow_amplitude", [](auto& c) -> auto& { return c.inflow_amplitude; }, non_negative));
    f.push_back(integer("timescale", "days", [](auto& c) -> auto& { return c.timescale.total_days; }, 1));
    f.push_back(integer("timescale", "dt_days", [](auto& c) -> auto& { return c.timescale.dt_days; }, 1));
    f.push_back(int_list("timescale", "extra_dt_days", [](auto& c) -> auto& { return c.extra_dt_days; }));
    f.push_back(real("timescale", "dtau", [](auto& c) -> auto& { return c.timescale.dtau; }));
    f.push_back(real("timescale", "period", [](auto& c) -> auto& { return c.timescale.period; }));
    f.push_back(real("timescale", "eps_p", [](auto& c) -> auto& { return c.timescale.eps_p; }));
    f.push_back(boolean("timescale", "relative_tolerance",
                        [](auto& c) -> auto& { return c.timescale.relative_tolerance; }));
    f.push_back(integer("timescale", "max_cycles", [](auto& c) -> auto& { return c.timescale.max_cycles; }, 2));
    f.push_back({"timescale", "init_strategy",
                 [](RunConfig& c, std::string_view v) { c.timescale.init_strategy = parse_init_strategy(std::string(v)); },
                 [](const RunConfig& c) { return std::string(to_string(c.timescale.init_strategy)); }});
    f.push_back(boolean("timescale", "stationary_every_day",
                        [](auto& c) -> auto& { return c.timescale.stationary_every_day; }));
    f.push_back(int_list("timescale", "sample_days", [](auto& c) -> auto& { return c.timescale.sample_days; }));
    f.push_back({"run", "algorithm",
                 [](RunConfig& c, std::string_view v) { c.algorithm = parse_algorithm(v); },
                 [](const RunConfig& c) { return std::string(to_string(c.algorithm)); }});
    f.push_back({"run", "output_dir", [](RunConfig& c, std::string_view v) { c.output_dir = std::string(v); },
                 [](const RunConfig& c) { return c.output_dir; }});
    f.push_back(boolean("run", "dump_fields", [](auto& c) -> auto& { return c.dump_fields; }));
    f.push_back(boolean("run", "emit_plots", [](auto& c) -> auto& { return c.emit_plots; }));
    return f;
  }();
  return table;
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::string section;
  std::set<std::string> seen;
  int line_no = 0;
  auto where = [&] { return " (line " + std::to_string(line_no) + ")"; };
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section header" + where());
      section = std::string(trim(line.substr(1, line.size() - 2)));
      bool known = false;
      for (const Field& f : fields()) known = known || f.section == section;
      if (!known) throw ConfigError("unknown section '" + section + "'" + where());
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'" + where());
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError("key '" + key + "' outside of any section" + where());
    const Field* field = nullptr;
    for (const Field& f : fields())
      if (f.section == section && f.key == key) field = &f;
    if (!field) throw ConfigError("unknown key '" + key + "'" + where());
    if (!seen.insert(section + "." + key).second) throw ConfigError("duplicate key '" + key + "'" + where());
    try {
      field->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError("invalid value for '" + key + "'" + where() + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  std::string_view section;
  for (const Field& f : fields()) {
    const std::string value = f.get(config);
    if (value.empty() && f.key != "output_dir" && f.key != "sample_days" && f.key != "extra_dt_days") continue;
    if (f.section != section) {
      out += (out.empty() ? "[" : "\n[") + std::string(f.section) + "]\n";
      section = f.section;
    }
    out += std::string(f.key) + " = " + value + "\n";
  }
  return out;
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  for (const Field& f : fields())
    if (f.get(a) != f.get(b)) return false;
  return true;
}

}  // namespace plaque

#include "plaquesim/output.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace plaque {

std::string format_number(double v) {
  if (!std::isfinite(v)) throw NonFiniteError("refusing to write a non-finite value");
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void write_long_scale_csv(const LongScaleTrajectory& traj, std::ostream& os) {
  os << "day,c_s,gamma_bar_per_day,width_cm,cycles_used,algorithm\n";
  for (const DayRecord& r : traj.records)
    os << r.day << ',' << format_number(r.c_s) << ',' << format_number(r.gamma_bar) << ','
       << format_number(r.width_cm) << ',' << r.cycles_used << ',' << traj.algorithm << '\n';
}

void write_short_scale_csv(const ShortScaleSample& sample, const MaterialParams& params, std::ostream& os) {
  os << "t_s,wss,gamma_per_day\n";
  for (std::size_t m = 0; m < sample.wss_series.size(); ++m) {
    const double s = sample.wss_series[m];
    os << format_number(static_cast<double>(m + 1) * sample.dtau) << ',' << format_number(s) << ','
       << format_number(growth_rate(s, sample.c_s, params) * kSecondsPerDay) << '\n';
  }
}

std::string trajectory_label(const LongScaleTrajectory& traj) {
  std::string s = traj.algorithm;
  if (!traj.init_strategy.empty()) s += " " + traj.init_strategy;
  return s + " dt=" + std::to_string(traj.dt_days) + "d";
}

namespace {

struct Series {
  std::string label;
  std::vector<double> x, y;
  bool markers = false;
};

std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double nice_step(double range) {
  const double raw = range / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  return (f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0) * mag;
}

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string render_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                         const std::vector<Series>& series, const std::string& note) {
  const double W = 640, H = 420, ml = 78, mr = 20, mt = 40, mb = 56;
  const double pw = W - ml - mr, ph = H - mt - mb;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const Series& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x0 <= x1)) x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12 * std::max(1.0, std::abs(y0))) {
    const double pad = std::max(std::abs(y0) * 0.1, 0.5);
    y0 -= pad, y1 += pad;
  }
  const double xs = nice_step(x1 - x0), ys = nice_step(y1 - y0);
  x0 = std::floor(x0 / xs) * xs, x1 = std::ceil(x1 / xs) * xs;
  y0 = std::floor(y0 / ys) * ys, y1 = std::ceil(y1 / ys) * ys;
  auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return mt + ph - (y - y0) / (y1 - y0) * ph; };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
    << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title)
    << "</text>\n";
  // grid and ticks
  for (double t = x0; t <= x1 + 0.5 * xs; t += xs) {
    o << "<line x1=\"" << num(px(t)) << "\" y1=\"" << mt << "\" x2=\"" << num(px(t)) << "\" y2=\"" << mt + ph
      << "\" stroke=\"#e5e5e5\"/>\n"
      << "<text x=\"" << num(px(t)) << "\" y=\"" << mt + ph + 16 << "\" text-anchor=\"middle\">" << num(t)
      << "</text>\n";
  }
  for (double t = y0; t <= y1 + 0.5 * ys; t += ys) {
    o << "<line x1=\"" << ml << "\" y1=\"" << num(py(t)) << "\" x2=\"" << ml + pw << "\" y2=\"" << num(py(t))
      << "\" stroke=\"#e5e5e5\"/>\n"
      << "<text x=\"" << ml - 6 << "\" y=\"" << num(py(t) + 4) << "\" text-anchor=\"end\">" << num(t)
      << "</text>\n";
  }
  o << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n"
    << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 14 << "\" text-anchor=\"middle\">" << xml_escape(xlabel)
    << "</text>\n"
    << "<text transform=\"translate(18," << mt + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << xml_escape(ylabel) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const char* col = kColors[k % std::size(kColors)];
    if (s.markers) {
      for (std::size_t i = 0; i < s.x.size(); ++i)
        o << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i])) << "\" r=\"2.5\" fill=\"" << col
          << "\"/>\n";
    } else if (!s.x.empty()) {
      o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.6\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) o << (i ? " " : "") << num(px(s.x[i])) << ',' << num(py(s.y[i]));
      o << "\"/>\n";
    }
    const double ly = mt + 16 + 16 * static_cast<double>(k);
    o << "<line x1=\"" << ml + pw - 170 << "\" y1=\"" << ly - 4 << "\" x2=\"" << ml + pw - 150 << "\" y2=\""
      << ly - 4 << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n"
      << "<text x=\"" << ml + pw - 145 << "\" y=\"" << ly << "\">" << xml_escape(s.label) << "</text>\n";
  }
  if (!note.empty())
    o << "<text x=\"" << ml + pw / 2 << "\" y=\"" << mt + ph / 2 << "\" text-anchor=\"middle\" font-size=\"16\" "
      << "fill=\"#555\">" << xml_escape(note) << "</text>\n";
  o << "</svg>\n";
  return o.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
  f << text;
  if (!f) throw std::runtime_error("write failed for '" + p.string() + "'");
}

}  // namespace

std::vector<std::filesystem::path> emit_plots(const std::vector<LongScaleTrajectory>& trajectories,
                                              const std::filesystem::path& out_dir) {
  if (trajectories.empty()) throw DomainError("emit_plots needs at least one trajectory");
  std::vector<Series> gamma, width, cycles, wss;
  for (const LongScaleTrajectory& t : trajectories) {
    const std::string label = trajectory_label(t);
    Series g{label, {}, {}}, w{label, {}, {}}, c{label, {}, {}, true};
    for (const DayRecord& r : t.records) {
      g.x.push_back(r.day);
      g.y.push_back(r.gamma_bar);
      w.x.push_back(r.day);
      w.y.push_back(r.width_cm);
      if (r.cycles_used > 0) {
        c.x.push_back(r.day);
        c.y.push_back(r.cycles_used);
      }
    }
    gamma.push_back(std::move(g));
    width.push_back(std::move(w));
    if (!c.x.empty()) cycles.push_back(std::move(c));
    if (!t.samples.empty()) {
      const ShortScaleSample& s = t.samples.back();
      Series v{label + " day " + std::to_string(s.day), {}, {}};
      for (std::size_t m = 0; m < s.wss_series.size(); ++m) {
        v.x.push_back(static_cast<double>(m + 1) * s.dtau);
        v.y.push_back(s.wss_series[m]);
      }
      wss.push_back(std::move(v));
    }
  }
  const std::string none = "no short-scale data";
  std::vector<std::filesystem::path> paths = {out_dir / "growth_rate.svg", out_dir / "channel_width.svg",
                                              out_dir / "cycles_per_step.svg", out_dir / "wss_heartbeat.svg"};
  write_file(paths[0], render_chart("Growth rate over time", "day", "gamma_bar (1/day)", gamma, ""));
  write_file(paths[1], render_chart("Channel width over time", "day", "width (cm)", width, ""));
  write_file(paths[2], render_chart("Heartbeats to periodicity", "day", "cycles used", cycles,
                                    cycles.empty() ? none : ""));
  write_file(paths[3], render_chart("Wall shear stress in the last sampled heartbeat", "t (s)", "sigma_WS",
                                    wss, wss.empty() ? none : ""));
  return paths;
}

}  // namespace plaque

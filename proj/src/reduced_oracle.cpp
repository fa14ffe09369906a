#include "plaquesim/reduced_oracle.hpp"

#include <cmath>
#include <numbers>

namespace plaque::oracle {

double poiseuille_wss(const MaterialParams& params, double half_width, double v_max, double length) {
  if (!(half_width > 0.0)) throw DomainError("half width must be positive");
  return length * params.dynamic_viscosity() * 2.0 * std::abs(v_max) / half_width / params.sigma_0;
}

double poiseuille_wss_from_flux(const MaterialParams& params, double half_width, double flux_full,
                                double length) {
  if (!(half_width > 0.0)) throw DomainError("half width must be positive");
  return poiseuille_wss(params, half_width, 0.75 * flux_full / half_width, length);
}

double quadrature_average(const std::function<double(double)>& f, long n, double period) {
  if (n < 2) n = 2;
  if (n % 2) ++n;
  const double h = period / static_cast<double>(n);
  double odd = 0.0, even = 0.0;
  for (long i = 1; i < n; ++i) (i % 2 ? odd : even) += f(i * h);
  const double integral = h / 3.0 * (f(0.0) + 4.0 * odd + 2.0 * even + f(period));
  return integral / period;
}

double SurrogateConfig::width(double c_s) const {
  if (width_fn) return width_fn(c_s);
  return 2.0 / growth_scalar(0.0, -1.0, c_s);
}

void SurrogateConfig::validate() const {
  // Zero growth is allowed here as a reference run.
  MaterialParams p = params;
  if (p.alpha == 0.0) p.alpha = 1.0;
  p.validate();
  if (!(flux_amplitude > 0.0)) throw ConfigError("flux_amplitude must be positive");
  if (!(length > 0.0)) throw ConfigError("length must be positive");
}

std::pair<LongScaleTrajectory, LongScaleTrajectory> surrogate_two_scale(const SurrogateConfig& config,
                                                                        const TwoScaleSettings& settings) {
  config.validate();
  settings.validate();
  const MaterialParams& mp = config.params;
  LongScaleTrajectory avg, two;
  avg.algorithm = "surrogate-averaging";
  two.algorithm = "surrogate-two-scale";
  avg.dt_days = two.dt_days = settings.dt_days;
  const long n_beat = settings.steps_per_period();
  const double T = settings.period;

  double ca = 0.0, ct = 0.0;
  for (int n = 1; n <= settings.num_steps(); ++n) {
    const int day = n * settings.dt_days;

    // Stationary flow carries the mean flux, half the peak.
    const double wa = config.width(ca);
    const double sa = poiseuille_wss_from_flux(mp, 0.5 * wa, 0.5 * config.flux_amplitude, config.length);
    DayRecord ra;
    ra.day = day;
    ra.width_cm = wa;
    ra.gamma_bar = growth_rate(sa, ca, mp) * kSecondsPerDay;
    ca += settings.dt_days * ra.gamma_bar;
    ra.c_s = ca;
    avg.records.push_back(ra);

    const double wt = config.width(ct);
    auto wss_at = [&](double t) {
      const double s = std::sin(std::numbers::pi * t / T);
      return poiseuille_wss_from_flux(mp, 0.5 * wt, config.flux_amplitude * s * s, config.length);
    };
    DayRecord rt;
    rt.day = day;
    rt.width_cm = wt;
    rt.gamma_bar = quadrature_average([&](double t) { return growth_rate(wss_at(t), ct, mp); }, n_beat, T) *
                   kSecondsPerDay;
    rt.cycles_used = 1;
    if (n == 1 || n == settings.num_steps()) {
      ShortScaleSample smp{day, settings.dtau, {}, ct};
      for (long m = 1; m <= n_beat; ++m) smp.wss_series.push_back(wss_at(m * settings.dtau));
      two.samples.push_back(std::move(smp));
    }
    ct += settings.dt_days * rt.gamma_bar;
    rt.c_s = ct;
    two.records.push_back(rt);
  }
  return {std::move(avg), std::move(two)};
}

}  // namespace plaque::oracle

#pragma once

#include <functional>
#include <utility>

#include "plaquesim/constitutive.hpp"
#include "plaquesim/timescale.hpp"

namespace plaque::oracle {

// |sigma_ws| of the parabolic profile v_max (1 - (y/h)^2) along a wall of
// length L: sigma_0^-1 L rho nu 2 v_max / h.
double poiseuille_wss(const MaterialParams& params, double half_width, double v_max,
                      double length = 10.0);

// Same for a given full-channel flux Q = 4/3 v_max h.
double poiseuille_wss_from_flux(const MaterialParams& params, double half_width, double flux_full,
                                double length = 10.0);

// Composite Simpson mean of f over [0, period] with n subintervals (n is rounded
// up to the next even number, at least 2).
double quadrature_average(const std::function<double(double)>& f, long n, double period = 1.0);

struct SurrogateConfig {
  MaterialParams params;
  // Full lumen width as a function of c_s; empty means 2 / g(0, -1, c_s).
  std::function<double(double)> width_fn;
  double flux_amplitude = 40.0;  // full-channel peak flux, cm^2/s
  double length = 10.0;

  double width(double c_s) const;
  void validate() const;
};

// Both algorithms with the FSI solve replaced by quasi-static Poiseuille flow
// through the current lumen. Returns (averaging, two-scale).
std::pair<LongScaleTrajectory, LongScaleTrajectory> surrogate_two_scale(const SurrogateConfig& config,
                                                                        const TwoScaleSettings& settings);

}  // namespace plaque::oracle

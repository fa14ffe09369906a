#pragma once

#include <cmath>
#include <numbers>

#include "plaquesim/dual.hpp"
#include "plaquesim/errors.hpp"
#include "plaquesim/tensor.hpp"

namespace plaque {

inline constexpr double kSecondsPerDay = 86400.0;

// Material and growth parameters in CGS units. Defaults are the channel
// stenosis benchmark values.
struct MaterialParams {
  double rho_f = 1.0;      // g/cm^3
  double nu_f = 0.04;      // cm^2/s
  double rho_s = 1.0;      // g/cm^3
  double mu_s = 1.0e4;     // dyn/cm^2
  double lambda_s = 4.0e4; // dyn/cm^2
  double sigma_0 = 30.0;   // g cm/s^2
  double alpha = 5.0e-7;   // 1/s

  double alpha_per_day() const { return alpha * kSecondsPerDay; }
  void set_alpha_per_day(double a) { alpha = a / kSecondsPerDay; }
  double dynamic_viscosity() const { return rho_f * nu_f; }

  // Throws ConfigError unless every parameter is strictly positive.
  void validate() const;
};

// Foam-cell concentration together with the long-scale clock.
struct GrowthState {
  double c_s = 0.0;
  double day = 0.0;
};

// rho_f nu_f (grad v + grad v^T) - p I
Tensor2 fluid_cauchy_stress(const Tensor2& grad_v, double p, const MaterialParams& params);

// g = 1 + c_s exp(-x^2) (2 - |y|), evaluated in reference coordinates.
double growth_scalar(double x_hat, double y_hat, double c_s);

// First Piola stress F_e Sigma_e of the St. Venant-Kirchhoff law with isotropic
// growth F_g = g I:
//   E_e = (g^-2 F^T F - I) / 2,   F_e Sigma_e = g^-1 F (2 mu E_e + lambda tr(E_e) I),
// with F = I + H. E_e is formed from H directly, which keeps very stiff walls
// free of the cancellation in F^T F - I. The trace is the 2x2 trace. Generic over
// the scalar so the assembly can differentiate through it.
template <class T>
Mat2<T> piola_growth_stress(const Mat2<T>& H, double g, double mu, double lambda) {
  const double ginv = 1.0 / g;
  const double g2 = ginv * ginv;
  Mat2<T> E = (0.5 * g2) * (H + transpose(H) + transpose(H) * H);
  E(0, 0) = E(0, 0) + 0.5 * (g2 - 1.0);
  E(1, 1) = E(1, 1) + 0.5 * (g2 - 1.0);
  Mat2<T> S = (2.0 * mu) * E;
  const T tr = lambda * trace(E);
  S(0, 0) = S(0, 0) + tr;
  S(1, 1) = S(1, 1) + tr;
  const Mat2<T> F = Mat2<T>::identity() + H;
  return ginv * (F * S);
}

// Same stress from the displacement gradient; throws InvertedElementError when
// det(I + grad u) <= 0.
Tensor2 pk_growth_stress(const Tensor2& grad_u_hat, double g, const MaterialParams& params);

// Cauchy stress J_e^-1 F_e Sigma_e F_e^T. Diagnostics only.
Tensor2 solid_cauchy_stress(const Tensor2& grad_u_hat, double g, const MaterialParams& params);

// gamma = alpha (1 + c_s)^-1 (1 + |sigma_ws|^2)^-1 in 1/s. The modulation factor
// scales alpha and is 1 unless a caller wants a time-dependent alpha.
double growth_rate(double sigma_ws, double c_s, const MaterialParams& params,
                   double alpha_modulation = 1.0);

// Pulsating inflow 30 sin^2(pi t) (1 - y^2) in the x direction, cm/s.
Point inflow_profile(double t, double y);

// Exact solution sqrt(1 + 2 alpha t) - 1 of (1 + c) c' = alpha, c(0) = 0, with
// t in days and alpha taken per day.
double closed_form_cs(double t_days, const MaterialParams& params);

}  // namespace plaque

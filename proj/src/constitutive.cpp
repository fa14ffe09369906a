#include "plaquesim/constitutive.hpp"

#include <string>

namespace plaque {

void MaterialParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigError(std::string("material parameter '") + name + "' must be positive");
  };
  positive(rho_f, "rho_f");
  positive(nu_f, "nu_f");
  positive(rho_s, "rho_s");
  positive(mu_s, "mu_s");
  positive(lambda_s, "lambda_s");
  positive(sigma_0, "sigma_0");
  positive(alpha, "alpha");
}

Tensor2 fluid_cauchy_stress(const Tensor2& grad_v, double p, const MaterialParams& params) {
  const double mu = params.dynamic_viscosity();
  Tensor2 s = mu * (grad_v + transpose(grad_v));
  s(0, 0) -= p;
  s(1, 1) -= p;
  return s;
}

double growth_scalar(double x_hat, double y_hat, double c_s) {
  return 1.0 + c_s * std::exp(-x_hat * x_hat) * (2.0 - std::abs(y_hat));
}

Tensor2 pk_growth_stress(const Tensor2& grad_u_hat, double g, const MaterialParams& params) {
  const Tensor2 F = Tensor2::identity() + grad_u_hat;
  const double J = det(F);
  if (!(J > 0.0)) throw InvertedElementError(-1, J);
  return piola_growth_stress(grad_u_hat, g, params.mu_s, params.lambda_s);
}

Tensor2 solid_cauchy_stress(const Tensor2& grad_u_hat, double g, const MaterialParams& params) {
  const Tensor2 P = pk_growth_stress(grad_u_hat, g, params);
  const Tensor2 Fe = (1.0 / g) * (Tensor2::identity() + grad_u_hat);
  const double Je = det(Fe);
  // P = F_e Sigma_e, so F_e Sigma_e F_e^T = P F_e^T.
  return (1.0 / Je) * (P * transpose(Fe));
}

double growth_rate(double sigma_ws, double c_s, const MaterialParams& params,
                   double alpha_modulation) {
  return alpha_modulation * params.alpha / ((1.0 + c_s) * (1.0 + sigma_ws * sigma_ws));
}

Point inflow_profile(double t, double y) {
  const double s = std::sin(std::numbers::pi * t);
  return {30.0 * s * s * (1.0 - y * y), 0.0};
}

double closed_form_cs(double t_days, const MaterialParams& params) {
  return std::sqrt(1.0 + 2.0 * params.alpha_per_day() * t_days) - 1.0;
}

}  // namespace plaque

#pragma once

// Quadrature-point integrands of the monolithic ALE system. Each kernel maps the
// local field values (v, u, their reference gradients, p) to the coefficients of
// the test function and its gradient:
//   row(vel c)  = Av_c phi + sum_d Bv_cd d_d phi
//   row(disp c) = Au_c phi + sum_d Bu_cd d_d phi
//   row(pres)   = Cp phi
// Kernels are templates so the Jacobian comes from the same code via Dual<13>.

#include "plaquesim/constitutive.hpp"
#include "plaquesim/dual.hpp"
#include "plaquesim/errors.hpp"
#include "plaquesim/tensor.hpp"

namespace plaque::detail {

inline constexpr int kSlots = 13;
using AD = Dual<kSlots>;

template <class T>
struct Fields {
  Vec2<T> v, u;
  Mat2<T> gv, gu;  // gv(c, d) = d v_c / d xhat_d
  T p{};
};

template <class T>
struct Flux {
  Vec2<T> Av, Au;
  Mat2<T> Bv, Bu;
  T Cp{};
};

struct KernelCtx {
  bool transient = false;
  double dt = 1.0;
  double theta = 1.0;
  double rho_f = 1.0, mu_f = 0.04;
  double rho_s = 1.0, mu_s = 1.0, lambda_s = 1.0;
  double ale_k = 1.0;
  double ale_kx = 1.0;  // relative weight of the streamwise derivative
  double ale_chi = 0.0;  // mesh stiffness scales like J^-chi
  double backflow_beta = 1.0;
  int cell = -1;
};

// Slot layout shared by fields and fluxes:
// v0 v1 | gv00 gv01 gv10 gv11 | u0 u1 | gu00 gu01 gu10 gu11 | p
template <class T>
void unpack(const std::array<T, kSlots>& s, Fields<T>& f) {
  f.v = {s[0], s[1]};
  f.gv.a = {{{s[2], s[3]}, {s[4], s[5]}}};
  f.u = {s[6], s[7]};
  f.gu.a = {{{s[8], s[9]}, {s[10], s[11]}}};
  f.p = s[12];
}

template <class T>
std::array<T, kSlots> pack(const Flux<T>& r) {
  return {r.Av.x, r.Av.y, r.Bv(0, 0), r.Bv(0, 1), r.Bv(1, 0), r.Bv(1, 1),
          r.Au.x, r.Au.y, r.Bu(0, 0), r.Bu(0, 1), r.Bu(1, 0), r.Bu(1, 1), r.Cp};
}

inline std::array<double, kSlots> pack_fields(const Fields<double>& f) {
  return {f.v.x, f.v.y, f.gv(0, 0), f.gv(0, 1), f.gv(1, 0), f.gv(1, 1),
          f.u.x, f.u.y, f.gu(0, 0), f.gu(0, 1), f.gu(1, 0), f.gu(1, 1), f.p};
}

template <class T>
Fields<T> promote(const Fields<double>& f) {
  Fields<T> r;
  const auto s = pack_fields(f);
  std::array<T, kSlots> t;
  for (int i = 0; i < kSlots; ++i) t[i] = T(s[i]);
  unpack(t, r);
  return r;
}

template <class T>
T checked_det(const Mat2<T>& F, int cell) {
  const T J = det(F);
  if (!(value_of(J) > 0.0)) throw InvertedElementError(cell, value_of(J));
  return J;
}

template <class T>
Flux<T> fluid_flux(const Fields<T>& s, const Fields<double>& old_d, const KernelCtx& c) {
  const Mat2<T> F = Mat2<T>::identity() + s.gu;
  const T J = checked_det(F, c.cell);
  const Mat2<T> Fi = inverse(F);
  const Mat2<T> FiT = transpose(Fi);
  const Mat2<T> L = s.gv * Fi;
  const Mat2<T> visc = c.mu_f * (L + transpose(L));

  Flux<T> r;
  r.Cp = J * trace(L);
  using std::pow;
  r.Bu = (c.ale_chi == 0.0 ? T(c.ale_k) : c.ale_k * pow(J, -c.ale_chi)) * s.gu;
  r.Bu(0, 0) = c.ale_kx * r.Bu(0, 0);
  r.Bu(1, 0) = c.ale_kx * r.Bu(1, 0);
  if (!c.transient) {
    r.Av = (c.rho_f * J) * (L * s.v);
    r.Bv = J * (visc * FiT) - (J * s.p) * FiT;
    return r;
  }

  const Fields<T> o = promote<T>(old_d);
  const Mat2<T> Fo = Mat2<T>::identity() + o.gu;
  const T Jo = checked_det(Fo, c.cell);
  const Mat2<T> Foi = inverse(Fo);
  const Mat2<T> Lo = o.gv * Foi;
  const Mat2<T> visco = c.mu_f * (Lo + transpose(Lo));

  const double th = c.theta;
  const Vec2<T> w = (1.0 / c.dt) * (s.u - o.u);
  const T Jth = th * J + (1.0 - th) * Jo;
  r.Av = c.rho_f * ((Jth / c.dt) * (s.v - o.v) + (th * J) * (L * (s.v - w)) +
                    ((1.0 - th) * Jo) * (Lo * (o.v - w)));
  r.Bv = (th * J) * (visc * FiT) + ((1.0 - th) * Jo) * (visco * transpose(Foi)) - (J * s.p) * FiT;
  return r;
}

template <class T>
Flux<T> solid_flux(const Fields<T>& s, const Fields<double>& old_d, double g, const KernelCtx& c) {
  checked_det(Mat2<T>::identity() + s.gu, c.cell);
  const Mat2<T> P = piola_growth_stress(s.gu, g, c.mu_s, c.lambda_s);
  Flux<T> r;
  if (!c.transient) {
    r.Bv = P;
    r.Au = -1.0 * s.v;
    return r;
  }
  const Fields<T> o = promote<T>(old_d);
  checked_det(Mat2<T>::identity() + o.gu, c.cell);
  const Mat2<T> Po = piola_growth_stress(o.gu, g, c.mu_s, c.lambda_s);
  const double th = c.theta;
  r.Av = (c.rho_s / c.dt) * (s.v - o.v);
  r.Bv = th * P + (1.0 - th) * Po;
  r.Au = (1.0 / c.dt) * (s.u - o.u) - th * s.v - (1.0 - th) * o.v;
  return r;
}

// Do-nothing outflow correction: removes the rho nu (grad v)^T n part of the
// symmetric viscous traction on the outflow boundary, so that the natural
// condition is rho nu (grad v) n - p n = 0. Where fluid flows back in, the
// convective energy inflow is cancelled by beta rho/2 (v.n)_- v.
template <class T>
Flux<T> outflow_flux(const Fields<T>& s, const Fields<double>& old_d, const Point& n_hat,
                     const KernelCtx& c) {
  const Mat2<T> F = Mat2<T>::identity() + s.gu;
  const T J = checked_det(F, c.cell);
  const Mat2<T> Fi = inverse(F);
  const Mat2<T> L = s.gv * Fi;
  const Vec2<T> nh{T(n_hat.x), T(n_hat.y)};
  const Vec2<T> nv = J * (transpose(Fi) * nh);
  Flux<T> r;
  const double th = c.transient ? c.theta : 1.0;
  r.Av = (-th * c.mu_f) * (transpose(L) * nv);
  // Backflow stabilization: only fluid entering through the outlet is touched.
  const T vn = dot(s.v, nv);
  if (c.backflow_beta > 0.0 && value_of(vn) < 0.0) r.Av = r.Av - (0.5 * c.backflow_beta * c.rho_f) * (vn * s.v);
  if (c.transient && th < 1.0) {
    const Fields<T> o = promote<T>(old_d);
    const Mat2<T> Fo = Mat2<T>::identity() + o.gu;
    const T Jo = checked_det(Fo, c.cell);
    const Mat2<T> Foi = inverse(Fo);
    const Mat2<T> Lo = o.gv * Foi;
    const Vec2<T> nvo = Jo * (transpose(Foi) * nh);
    r.Av = r.Av - ((1.0 - th) * c.mu_f) * (transpose(Lo) * nvo);
  }
  return r;
}

}  // namespace plaque::detail

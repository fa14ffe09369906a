#include "plaquesim/fsi.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/KLUSupport>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "fsi_kernels.hpp"

namespace plaque {

using detail::AD;
using detail::Fields;
using detail::Flux;
using detail::KernelCtx;
using detail::kSlots;

namespace {

constexpr int kFields = 5;  // vx, vy, ux, uy, p
// A step with a stale Jacobian is taken if it shrinks the residual by
// kStaleAccept; the Jacobian is rebuilt unless it shrank by kReuseContraction.
constexpr double kStaleAccept = 0.5;
constexpr double kReuseContraction = 0.25;
constexpr int kMaxLineSearch = 8;

// slot(field, k) for k = value, d/dx, d/dy; -1 where the kernel has no slot.
constexpr int kSlot[kFields][3] = {{0, 2, 3}, {1, 4, 5}, {6, 8, 9}, {7, 10, 11}, {12, -1, -1}};

// Shape data on one side of the reference square.
struct FacetRule {
  std::vector<double> weights;                // 1D weights on [0,1]
  std::vector<std::vector<double>> values;    // [q][a]
  std::vector<std::vector<Point>> grads;      // [q][a], reference cell gradients
};

FacetRule make_facet_rule(const fem::FeSpace& sp, int side) {
  // side: 0 bottom (eta = 0), 1 right (xi = 1), 2 top (eta = 1), 3 left (xi = 0)
  FacetRule r;
  const int npc = sp.nodes_per_cell();
  for (std::size_t q = 0; q < sp.gauss_points().size(); ++q) {
    const double t = sp.gauss_points()[q];
    Point xi;
    switch (side) {
      case 0: xi = {t, 0.0}; break;
      case 1: xi = {1.0, t}; break;
      case 2: xi = {t, 1.0}; break;
      default: xi = {0.0, t}; break;
    }
    std::vector<double> v(npc);
    std::vector<Point> g(npc);
    sp.evaluate(xi, v, g);
    r.weights.push_back(sp.gauss_weights()[q]);
    r.values.push_back(std::move(v));
    r.grads.push_back(std::move(g));
  }
  return r;
}

}  // namespace

struct FsiSolver::Linear {
  Eigen::KLU<Eigen::SparseMatrix<double>> lu;
  bool analyzed = false;
  bool valid = false;
  TimeMode mode = TimeMode::stationary;
  double dt = 0.0;

  FacetRule bottom, right, left;
};

void SolverSettings::validate() const {
  if (!(newton_tol > 0.0)) throw ConfigError("newton_tol must be positive");
  if (newton_max_iter < 1) throw ConfigError("newton_max_iter must be at least 1");
  if (!(theta >= 0.5 && theta <= 1.0)) throw ConfigError("theta must lie in [0.5, 1]");
  if (!(lps_delta0 >= 0.0)) throw ConfigError("lps_delta0 must be non-negative");
  if (degree != 1 && degree != 2) throw ConfigError("degree must be 1 or 2");
  if (continuation_steps < 1 || continuation_steps > 10)
    throw ConfigError("continuation_steps must lie in [1, 10]");
  if (!(ale_stiffness > 0.0)) throw ConfigError("ale_stiffness must be positive");
  if (!(ale_streamwise_weight > 0.0 && ale_streamwise_weight <= 1.0))
    throw ConfigError("ale_streamwise_weight must lie in (0, 1]");
  if (!(ale_jacobian_exponent >= 0.0 && ale_jacobian_exponent <= 4.0))
    throw ConfigError("ale_jacobian_exponent must lie in [0, 4]");
  if (!(backflow_beta >= 0.0)) throw ConfigError("backflow_beta must be non-negative");
  if (max_step_halvings < 0 || max_step_halvings > 10)
    throw ConfigError("max_step_halvings must lie in [0, 10]");
}

ProblemSpec ProblemSpec::stationary(double c_s, double amplitude) {
  ProblemSpec s;
  s.mode = TimeMode::stationary;
  s.c_s = c_s;
  s.inflow_amplitude = amplitude;
  return s;
}

ProblemSpec ProblemSpec::transient(const State& prev, double t_new, double dt, double c_s,
                                   double amplitude) {
  ProblemSpec s;
  s.mode = TimeMode::transient;
  s.prev = &prev;
  s.t_new = t_new;
  s.dt = dt;
  s.c_s = c_s;
  s.inflow_amplitude = amplitude;
  return s;
}

double ProblemSpec::inflow_velocity(double y, double H) const {
  const double eta = y / H;
  const double shape = 1.0 - eta * eta;
  if (mode == TimeMode::stationary) return inflow_amplitude * shape;
  const double s = std::sin(std::numbers::pi * t_new);
  return inflow_amplitude * s * s * shape;
}

FsiSolver::FsiSolver(const Mesh& mesh, MaterialParams params, SolverSettings settings)
    : mesh_(&mesh),
      params_(params),
      settings_(settings),
      space_((settings.validate(), params.validate(), mesh), settings.degree),
      linear_(std::make_unique<Linear>()) {
  linear_->bottom = make_facet_rule(space_, 0);
  linear_->right = make_facet_rule(space_, 1);
  linear_->left = make_facet_rule(space_, 3);
  build_pattern();
  collect_constraints();
}

FsiSolver::~FsiSolver() = default;

void FsiSolver::invalidate_jacobian() { linear_->valid = false; }

State FsiSolver::zero_state() const {
  State s;
  s.dofs = Eigen::VectorXd::Zero(num_dofs());
  return s;
}

void FsiSolver::build_pattern() {
  const int n = num_dofs();
  const int npc = space_.nodes_per_cell();
  const int nloc = kFields * npc;
  std::vector<std::vector<int>> cols(n);
  std::vector<int> g(nloc);
  auto local_dofs = [&](int cell) {
    const auto nodes = space_.cell_nodes(cell);
    const bool fluid = mesh_->cell_subdomain()[cell] == Subdomain::fluid;
    for (int a = 0; a < npc; ++a) {
      for (int f = 0; f < 4; ++f) g[a * kFields + f] = space_.dof(nodes[a], f);
      g[a * kFields + 4] = fluid ? space_.pressure_dof(nodes[a]) : -1;
    }
  };
  for (int c = 0; c < mesh_->num_cells(); ++c) {
    local_dofs(c);
    for (int i : g)
      if (i >= 0)
        for (int j : g)
          if (j >= 0) cols[i].push_back(j);
  }
  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < n; ++i) {
    cols[i].push_back(i);
    std::sort(cols[i].begin(), cols[i].end());
    cols[i].erase(std::unique(cols[i].begin(), cols[i].end()), cols[i].end());
    for (int j : cols[i]) trip.emplace_back(i, j, 0.0);
  }
  pattern_.resize(n, n);
  pattern_.setFromTriplets(trip.begin(), trip.end());
  pattern_.makeCompressed();

  const int* outer = pattern_.outerIndexPtr();
  const int* inner = pattern_.innerIndexPtr();
  scatter_.assign(mesh_->num_cells(), std::vector<int>(static_cast<std::size_t>(nloc) * nloc, -1));
  for (int c = 0; c < mesh_->num_cells(); ++c) {
    local_dofs(c);
    for (int i = 0; i < nloc; ++i) {
      if (g[i] < 0) continue;
      const int* b = inner + outer[g[i]];
      const int* e = inner + outer[g[i] + 1];
      for (int j = 0; j < nloc; ++j) {
        if (g[j] < 0) continue;
        scatter_[c][static_cast<std::size_t>(i) * nloc + j] =
            static_cast<int>(std::lower_bound(b, e, g[j]) - inner);
      }
    }
  }
}

void FsiSolver::collect_constraints() {
  constrained_.assign(num_dofs(), 0);
  const int NX = space_.lattice_nx(), NY = space_.lattice_ny();
  for (int n = 0; n < space_.num_nodes(); ++n) {
    const int I = space_.node_column(n), J = space_.node_row(n);
    const bool end = I == 0 || I == NX;
    auto fix = [&](int comp) { constrained_[space_.dof(n, comp)] = 1; };
    if (space_.in_solid(n) && (J == 0 || end)) {
      for (int c = 0; c < 4; ++c) fix(c);  // clamp
      continue;
    }
    if (!space_.in_fluid(n)) continue;
    if (I == 0) {  // inflow: velocity profile, fixed mesh
      for (int c = 0; c < 4; ++c) fix(c);
    } else if (I == NX) {  // outflow: do-nothing for v, fixed mesh
      fix(2);
      fix(3);
    }
    if (J == NY) {  // symmetry line
      fix(1);
      fix(2);
      fix(3);
    }
  }
}

void FsiSolver::apply_dirichlet(State& state, const ProblemSpec& spec) const {
  const double H = mesh_->geometry().fluid_half_height;
  for (int n = 0; n < space_.num_nodes(); ++n) {
    for (int c = 0; c < 4; ++c) {
      const int d = space_.dof(n, c);
      if (!constrained_[d]) continue;
      double value = 0.0;
      if (c == 0 && space_.node_column(n) == 0 && space_.in_fluid(n) && !space_.on_interface(n))
        value = spec.inflow_velocity(space_.node(n).y, H);
      state.dofs[d] = value;
    }
  }
  if (spec.mode == TimeMode::transient) state.time = spec.t_new;
}

DiscreteOperator FsiSolver::assemble(const State& state, const ProblemSpec& spec,
                                     bool with_jacobian) const {
  const bool transient = spec.mode == TimeMode::transient;
  if (transient && (spec.prev == nullptr || !(spec.dt > 0.0)))
    throw std::invalid_argument("transient assembly needs a previous state and dt > 0");

  const int npc = space_.nodes_per_cell();
  const int nloc = kFields * npc;
  const int nq = space_.num_qp();
  const double hx = space_.cell_hx();
  const Eigen::VectorXd& X = state.dofs;
  const Eigen::VectorXd* Xo = transient ? &spec.prev->dofs : nullptr;

  DiscreteOperator op;
  op.residual = Eigen::VectorXd::Zero(num_dofs());
  if (with_jacobian) {
    op.jacobian = pattern_;
    std::fill_n(op.jacobian.valuePtr(), op.jacobian.nonZeros(), 0.0);
  }
  double* jv = with_jacobian ? op.jacobian.valuePtr() : nullptr;

  KernelCtx ctx;
  ctx.transient = transient;
  ctx.dt = transient ? spec.dt : 1.0;
  ctx.theta = settings_.theta;
  ctx.rho_f = params_.rho_f;
  ctx.mu_f = params_.dynamic_viscosity();
  ctx.rho_s = params_.rho_s;
  ctx.mu_s = params_.mu_s;
  ctx.lambda_s = params_.lambda_s;
  ctx.ale_k = settings_.ale_stiffness;
  ctx.ale_kx = settings_.ale_streamwise_weight;
  ctx.ale_chi = settings_.ale_jacobian_exponent;
  ctx.backflow_beta = settings_.backflow_beta;

  std::vector<int> g(nloc);
  std::vector<double> xl(nloc), xol(nloc);
  std::vector<double> rl(nloc);
  std::vector<double> jl(static_cast<std::size_t>(nloc) * nloc);
  std::vector<char> row_on(nloc);
  std::vector<std::array<double, 3>> basis(npc);
  std::vector<double> vals(npc);

  // Evaluates field values at a point from local coefficients.
  auto interpolate = [&](const std::vector<double>& coef, std::span<const double> phi,
                         const std::vector<std::array<double, 3>>& b, Fields<double>& f) {
    f = Fields<double>{};
    for (int a = 0; a < npc; ++a) {
      const double* c = &coef[a * kFields];
      const double p0 = phi[a], px = b[a][1], py = b[a][2];
      f.v.x += c[0] * p0;
      f.v.y += c[1] * p0;
      f.u.x += c[2] * p0;
      f.u.y += c[3] * p0;
      f.p += c[4] * p0;
      f.gv(0, 0) += c[0] * px;
      f.gv(0, 1) += c[0] * py;
      f.gv(1, 0) += c[1] * px;
      f.gv(1, 1) += c[1] * py;
      f.gu(0, 0) += c[2] * px;
      f.gu(0, 1) += c[2] * py;
      f.gu(1, 0) += c[3] * px;
      f.gu(1, 1) += c[3] * py;
    }
  };

  // Accumulates w * (flux . test) into rl and, for AD fluxes, w * d(flux)/d(trial) into jl.
  auto accumulate = [&](double w, const std::array<double, kSlots>& out,
                        const std::array<std::array<double, kSlots>, kSlots>* dout) {
    for (int b = 0; b < npc; ++b)
      for (int e = 0; e < kFields; ++e) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k)
          if (kSlot[e][k] >= 0) s += basis[b][k] * out[kSlot[e][k]];
        rl[b * kFields + e] += w * s;
      }
    if (dout == nullptr) return;
    const auto& D = *dout;
    for (int e = 0; e < kFields; ++e)
      for (int f = 0; f < kFields; ++f) {
        double M[3][3];
        bool any = false;
        for (int k = 0; k < 3; ++k)
          for (int l = 0; l < 3; ++l) {
            const int so = kSlot[e][k], si = kSlot[f][l];
            M[k][l] = (so >= 0 && si >= 0) ? D[so][si] : 0.0;
            any = any || M[k][l] != 0.0;
          }
        if (!any) continue;
        for (int a = 0; a < npc; ++a) {
          double Ma[3];
          for (int k = 0; k < 3; ++k)
            Ma[k] = w * (M[k][0] * basis[a][0] + M[k][1] * basis[a][1] + M[k][2] * basis[a][2]);
          const int col = a * kFields + f;
          for (int b = 0; b < npc; ++b) {
            const int row = b * kFields + e;
            jl[static_cast<std::size_t>(row) * nloc + col] +=
                basis[b][0] * Ma[0] + basis[b][1] * Ma[1] + basis[b][2] * Ma[2];
          }
        }
      }
  };

  // Evaluates a kernel at one point in double or AD mode and accumulates.
  auto integrate_point = [&](double w, const Fields<double>& cur, auto&& kernel) {
    if (!with_jacobian) {
      const Flux<double> r = kernel(cur);
      accumulate(w, detail::pack(r), nullptr);
      return;
    }
    const auto vals = detail::pack_fields(cur);
    std::array<AD, kSlots> seeded;
    for (int i = 0; i < kSlots; ++i) seeded[i] = AD::variable(vals[i], i);
    Fields<AD> f;
    detail::unpack(seeded, f);
    const auto out = detail::pack(kernel(f));
    std::array<double, kSlots> v;
    std::array<std::array<double, kSlots>, kSlots> D;
    for (int o = 0; o < kSlots; ++o) {
      v[o] = out[o].v;
      D[o] = out[o].d;
    }
    accumulate(w, v, &D);
  };

  // Element-wise pressure gradient projection stabilization; the same matrix for
  // every fluid cell since the fluid mesh is uniform. Bilinear pressures have a
  // checkerboard mode the cell-mean fluctuation cannot see, so Q1 penalizes the
  // full gradient instead.
  std::vector<double> lps(static_cast<std::size_t>(npc) * npc, 0.0);
  {
    const double hy = mesh_->hy_fluid();
    const double hK = std::max(hx, hy);
    const double delta = settings_.lps_delta0 * hK * hK / params_.dynamic_viscosity();
    std::vector<Point> mean(npc, Point{0.0, 0.0});
    if (space_.degree() > 1)
      for (int q = 0; q < nq; ++q)
        for (int a = 0; a < npc; ++a) {
          const Point& gr = space_.shape_grad(q, a);
          mean[a] = mean[a] + space_.qp_weight(q) * Point{gr.x / hx, gr.y / hy};
        }
    for (int q = 0; q < nq; ++q) {
      const double w = space_.qp_weight(q) * hx * hy * delta;
      for (int a = 0; a < npc; ++a) {
        const Point& ga = space_.shape_grad(q, a);
        const Point fa = Point{ga.x / hx, ga.y / hy} - mean[a];
        for (int b = 0; b < npc; ++b) {
          const Point& gb = space_.shape_grad(q, b);
          const Point fb = Point{gb.x / hx, gb.y / hy} - mean[b];
          lps[static_cast<std::size_t>(a) * npc + b] += w * dot(fa, fb);
        }
      }
    }
  }

  const int NX = mesh_->nx();
  for (int cell = 0; cell < mesh_->num_cells(); ++cell) {
    const bool fluid = mesh_->cell_subdomain()[cell] == Subdomain::fluid;
    const auto nodes = space_.cell_nodes(cell);
    const double hy = space_.cell_hy(cell);
    const Point origin = space_.cell_origin(cell);
    ctx.cell = cell;

    for (int a = 0; a < npc; ++a) {
      const int n = nodes[a];
      for (int f = 0; f < 4; ++f) {
        g[a * kFields + f] = space_.dof(n, f);
        xl[a * kFields + f] = X[space_.dof(n, f)];
        xol[a * kFields + f] = Xo ? (*Xo)[space_.dof(n, f)] : 0.0;
      }
      const int pd = fluid ? space_.pressure_dof(n) : -1;
      g[a * kFields + 4] = pd;
      xl[a * kFields + 4] = pd >= 0 ? X[pd] : 0.0;
      xol[a * kFields + 4] = (pd >= 0 && Xo) ? (*Xo)[pd] : 0.0;
      // Mesh-motion rows of interface nodes belong to the solid kinematics.
      row_on[a * kFields + 0] = row_on[a * kFields + 1] = 1;
      row_on[a * kFields + 2] = row_on[a * kFields + 3] = fluid ? !space_.in_solid(n) : 1;
      row_on[a * kFields + 4] = pd >= 0;
    }
    std::fill(rl.begin(), rl.end(), 0.0);
    if (with_jacobian) std::fill(jl.begin(), jl.end(), 0.0);

    Fields<double> cur, old;
    for (int q = 0; q < nq; ++q) {
      for (int a = 0; a < npc; ++a) {
        const Point& gr = space_.shape_grad(q, a);
        basis[a] = {space_.shape(q, a), gr.x / hx, gr.y / hy};
      }
      for (int a = 0; a < npc; ++a) vals[a] = basis[a][0];
      interpolate(xl, vals, basis, cur);
      if (transient) interpolate(xol, vals, basis, old);
      const double w = space_.qp_weight(q) * hx * hy;
      if (fluid) {
        integrate_point(w, cur, [&](const auto& f) { return detail::fluid_flux(f, old, ctx); });
      } else {
        const Point xq = origin + Point{space_.qp_point(q).x * hx, space_.qp_point(q).y * hy};
        const double gval = growth_scalar(xq.x, xq.y, spec.c_s);
        integrate_point(w, cur, [&](const auto& f) { return detail::solid_flux(f, old, gval, ctx); });
      }
    }

    // Outflow boundary term.
    if (fluid && cell % NX == NX - 1) {
      const FacetRule& fr = linear_->right;
      for (std::size_t q = 0; q < fr.weights.size(); ++q) {
        for (int a = 0; a < npc; ++a)
          basis[a] = {fr.values[q][a], fr.grads[q][a].x / hx, fr.grads[q][a].y / hy};
        interpolate(xl, fr.values[q], basis, cur);
        if (transient) interpolate(xol, fr.values[q], basis, old);
        const double w = fr.weights[q] * hy;
        integrate_point(w, cur,
                        [&](const auto& f) { return detail::outflow_flux(f, old, Point{1.0, 0.0}, ctx); });
      }
    }

    if (fluid) {
      for (int b = 0; b < npc; ++b) {
        double s = 0.0;
        for (int a = 0; a < npc; ++a) s += lps[static_cast<std::size_t>(b) * npc + a] * xl[a * kFields + 4];
        rl[b * kFields + 4] += s;
        if (with_jacobian)
          for (int a = 0; a < npc; ++a)
            jl[static_cast<std::size_t>(b * kFields + 4) * nloc + a * kFields + 4] +=
                lps[static_cast<std::size_t>(b) * npc + a];
      }
    }

    const auto& sc = scatter_[cell];
    for (int i = 0; i < nloc; ++i) {
      if (g[i] < 0 || !row_on[i]) continue;
      op.residual[g[i]] += rl[i];
      if (!with_jacobian) continue;
      for (int j = 0; j < nloc; ++j) {
        const int pos = sc[static_cast<std::size_t>(i) * nloc + j];
        if (pos >= 0) jv[pos] += jl[static_cast<std::size_t>(i) * nloc + j];
      }
    }
  }

  for (int d = 0; d < num_dofs(); ++d) {
    if (!constrained_[d]) continue;
    op.residual[d] = 0.0;
    if (!with_jacobian) continue;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(op.jacobian, d); it; ++it)
      it.valueRef() = it.col() == d ? 1.0 : 0.0;
  }
  return op;
}

double FsiSolver::residual_norm(const State& s, const ProblemSpec& spec) const {
  return assemble(s, spec, false).residual.norm();
}

NewtonReport FsiSolver::newton_solve(State& state, const ProblemSpec& spec) {
  NewtonReport rep;
  apply_dirichlet(state, spec);
  Eigen::VectorXd r = assemble(state, spec, false).residual;
  double norm = r.norm();
  rep.history.push_back(norm);

  Linear& lin = *linear_;
  if (!settings_.reuse_jacobian || lin.mode != spec.mode ||
      (spec.mode == TimeMode::transient && lin.dt != spec.dt))
    lin.valid = false;

  auto fail = [&](const std::string& why) {
    last_report_ = rep;
    rep.final_norm = norm;
    throw NonconvergenceError("Newton " + why + " (residual " + std::to_string(norm) + " after " +
                                  std::to_string(rep.iterations) + " iterations)",
                              rep.history);
  };

  while (!(norm <= settings_.newton_tol)) {
    if (!std::isfinite(norm)) fail("produced a non-finite residual");
    if (rep.iterations >= settings_.newton_max_iter) fail("did not converge");
    bool fresh = false;
    if (!lin.valid) {
      const DiscreteOperator op = assemble(state, spec, true);
      const Eigen::SparseMatrix<double> A = op.jacobian;
      if (!lin.analyzed) {
        lin.lu.analyzePattern(A);
        lin.analyzed = true;
      }
      lin.lu.factorize(A);
      if (lin.lu.info() != Eigen::Success) fail("hit a singular Jacobian");
      lin.valid = true;
      lin.mode = spec.mode;
      lin.dt = spec.dt;
      fresh = true;
      ++rep.jacobian_builds;
    }
    const Eigen::VectorXd dx = lin.lu.solve(-r);

    double lambda = 1.0;
    bool accepted = false;
    State trial;
    Eigen::VectorXd rt;
    double nt = 0.0;
    const int attempts = fresh ? kMaxLineSearch : 1;
    for (int ls = 0; ls < attempts; ++ls, lambda *= 0.5) {
      trial.dofs = state.dofs + lambda * dx;
      trial.time = state.time;
      try {
        rt = assemble(trial, spec, false).residual;
        nt = rt.norm();
      } catch (const InvertedElementError&) {
        nt = std::numeric_limits<double>::infinity();
      }
      const bool ok = fresh ? nt < norm : nt <= kStaleAccept * norm;
      if (ok && std::isfinite(nt)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!fresh) {
        lin.valid = false;
        continue;
      }
      fail("line search failed");
    }
    state = std::move(trial);
    r = std::move(rt);
    if (!settings_.reuse_jacobian || nt > kReuseContraction * norm) lin.valid = false;
    norm = nt;
    ++rep.iterations;
    rep.history.push_back(norm);
  }
  rep.final_norm = norm;
  last_report_ = rep;
  return rep;
}

State FsiSolver::solve_stationary(double c_s, const State* guess, double amplitude) {
  if (!(c_s >= 0.0)) throw DomainError("c_s must be non-negative");
  State s = guess ? *guess : zero_state();
  s.time = 0.0;
  const ProblemSpec spec = ProblemSpec::stationary(c_s, amplitude);
  try {
    newton_solve(s, spec);
    return s;
  } catch (const NonconvergenceError&) {
    if (!settings_.pseudo_time_continuation) throw;
  } catch (const InvertedElementError&) {
    if (!settings_.pseudo_time_continuation) throw;
  }
  // Load continuation from the reference configuration: inflow and growth are
  // ramped together.
  s = zero_state();
  const int n = settings_.continuation_steps;
  for (int k = 1; k <= n; ++k) {
    const double lambda = static_cast<double>(k) / n;
    try {
      newton_solve(s, ProblemSpec::stationary(lambda * c_s, lambda * amplitude));
    } catch (const NonconvergenceError& e) {
      throw NonconvergenceError(std::string("stationary continuation exhausted at step ") +
                                    std::to_string(k) + ": " + e.what(),
                                e.residual_history());
    }
  }
  return s;
}

State FsiSolver::step_transient(const State& prev, double t_new, double dtau, double c_s,
                                double amplitude, const State* guess) {
  if (!(dtau > 0.0)) throw DomainError("dtau must be positive");
  return step_split(prev, t_new, dtau, c_s, amplitude, guess, settings_.max_step_halvings);
}

State FsiSolver::step_split(const State& prev, double t_new, double dtau, double c_s, double amplitude,
                            const State* guess, int halvings) {
  State s = guess ? *guess : prev;
  s.time = t_new;
  try {
    newton_solve(s, ProblemSpec::transient(prev, t_new, dtau, c_s, amplitude));
    return s;
  } catch (const NonconvergenceError&) {
    if (halvings <= 0) throw;
  }
  const double half = 0.5 * dtau;
  const State mid = step_split(prev, t_new - half, half, c_s, amplitude, nullptr, halvings - 1);
  return step_split(mid, t_new, half, c_s, amplitude, nullptr, halvings - 1);
}

namespace {

struct FacetEval {
  Fields<double> f;
  Mat2<double> F, Fi;
  double J;
};

}  // namespace

template <class Fn>
static void for_each_facet_point(const fem::FeSpace& sp, const Eigen::VectorXd& X,
                                 const std::vector<int>& cells, const FacetRule& fr, bool vertical,
                                 Fn&& fn) {
  const int npc = sp.nodes_per_cell();
  const double hx = sp.cell_hx();
  for (int cell : cells) {
    const double hy = sp.cell_hy(cell);
    const auto nodes = sp.cell_nodes(cell);
    for (std::size_t q = 0; q < fr.weights.size(); ++q) {
      FacetEval e;
      e.f = Fields<double>{};
      for (int a = 0; a < npc; ++a) {
        const int n = nodes[a];
        const double phi = fr.values[q][a];
        const double px = fr.grads[q][a].x / hx, py = fr.grads[q][a].y / hy;
        const double vx = X[sp.dof(n, 0)], vy = X[sp.dof(n, 1)];
        const double ux = X[sp.dof(n, 2)], uy = X[sp.dof(n, 3)];
        const int pd = sp.pressure_dof(n);
        e.f.v = e.f.v + phi * Point{vx, vy};
        e.f.u = e.f.u + phi * Point{ux, uy};
        e.f.p += pd >= 0 ? phi * X[pd] : 0.0;
        e.f.gv(0, 0) += vx * px;
        e.f.gv(0, 1) += vx * py;
        e.f.gv(1, 0) += vy * px;
        e.f.gv(1, 1) += vy * py;
        e.f.gu(0, 0) += ux * px;
        e.f.gu(0, 1) += ux * py;
        e.f.gu(1, 0) += uy * px;
        e.f.gu(1, 1) += uy * py;
      }
      e.F = Tensor2::identity() + e.f.gu;
      e.J = det(e.F);
      if (!(e.J > 0.0)) throw InvertedElementError(cell, e.J);
      e.Fi = inverse(e.F);
      fn(e, fr.weights[q] * (vertical ? hy : hx));
    }
  }
}

double FsiSolver::wall_shear_functional(const State& state) const {
  std::vector<int> cells;
  for (int i = 0; i < mesh_->nx(); ++i) cells.push_back(mesh_->cell_id(i, mesh_->ny_solid()));
  const double mu = params_.dynamic_viscosity();
  const Point n_hat{0.0, -1.0};  // outward normal of the fluid on the interface
  double sum = 0.0;
  for_each_facet_point(space_, state.dofs, cells, linear_->bottom, false, [&](const FacetEval& e, double w) {
    const Point nv = e.J * (transpose(e.Fi) * n_hat);
    const double ds = std::hypot(nv.x, nv.y);
    const Point n = (1.0 / ds) * nv;
    const Tensor2 L = e.f.gv * e.Fi;
    const Point t = mu * ((L + transpose(L)) * n);
    const Point tt = t - dot(n, t) * n;
    sum += tt.x * ds * w;
  });
  return sum / params_.sigma_0;
}

double FsiSolver::wall_traction_functional(const State& state) const {
  std::vector<int> cells;
  for (int i = 0; i < mesh_->nx(); ++i) cells.push_back(mesh_->cell_id(i, mesh_->ny_solid()));
  const Point n_hat{0.0, -1.0};
  double sum = 0.0;
  for_each_facet_point(space_, state.dofs, cells, linear_->bottom, false, [&](const FacetEval& e, double w) {
    const Point nv = e.J * (transpose(e.Fi) * n_hat);
    const Tensor2 sigma = fluid_cauchy_stress(e.f.gv * e.Fi, e.f.p, params_);
    sum += (sigma * nv).x * w;  // |nv| ds_hat = do, and nv/|nv| = n
  });
  return sum;
}

double FsiSolver::boundary_flux(const State& state, BoundaryTag tag) const {
  if (tag != BoundaryTag::inflow && tag != BoundaryTag::outflow)
    throw DomainError("flux is defined for inflow and outflow boundaries only");
  const bool in = tag == BoundaryTag::inflow;
  std::vector<int> cells;
  for (int j = mesh_->ny_solid(); j < mesh_->ny(); ++j) cells.push_back(mesh_->cell_id(in ? 0 : mesh_->nx() - 1, j));
  const Point n_hat{in ? -1.0 : 1.0, 0.0};
  double sum = 0.0;
  for_each_facet_point(space_, state.dofs, cells, in ? linear_->left : linear_->right, true,
                       [&](const FacetEval& e, double w) {
                         const Point nv = e.J * (transpose(e.Fi) * n_hat);
                         sum += dot(e.f.v, nv) * w;
                       });
  return sum;
}

double FsiSolver::continuity_residual_max(const State& state, const ProblemSpec& spec) const {
  const Eigen::VectorXd r = assemble(state, spec, false).residual;
  const int p0 = 4 * space_.num_nodes();
  return r.tail(num_dofs() - p0).cwiseAbs().maxCoeff();
}

Point FsiSolver::velocity(const State& s, int node) const {
  return {s.dofs[space_.dof(node, 0)], s.dofs[space_.dof(node, 1)]};
}

Point FsiSolver::displacement(const State& s, int node) const {
  return {s.dofs[space_.dof(node, 2)], s.dofs[space_.dof(node, 3)]};
}

double FsiSolver::pressure(const State& s, int node) const {
  const int pd = space_.pressure_dof(node);
  return pd >= 0 ? s.dofs[pd] : 0.0;
}

std::vector<Point> FsiSolver::displacement_field(const State& s) const {
  std::vector<Point> u(space_.num_nodes());
  for (int n = 0; n < space_.num_nodes(); ++n) u[n] = displacement(s, n);
  return u;
}

double FsiSolver::channel_width(const State& state, double x_query) const {
  std::vector<Point> pts, disp;
  for (int n : space_.interface_nodes()) {
    pts.push_back(space_.node(n));
    disp.push_back(displacement(state, n));
  }
  return plaque::channel_width(pts, disp, x_query);
}

double FsiSolver::max_speed(const State& state) const {
  double m = 0.0;
  for (int n = 0; n < space_.num_nodes(); ++n) {
    const Point v = velocity(state, n);
    m = std::max(m, std::hypot(v.x, v.y));
  }
  return m;
}

std::vector<Point> FsiSolver::extend_ale(std::span<const Point> displacement) const {
  if (static_cast<int>(displacement.size()) != space_.num_nodes())
    throw DomainError("displacement field does not match the lattice");
  const int NX = space_.lattice_nx(), NY = space_.lattice_ny();
  // Free unknowns: fluid nodes strictly inside the fluid lattice.
  std::vector<int> index(space_.num_nodes(), -1);
  int nfree = 0;
  for (int n = 0; n < space_.num_nodes(); ++n) {
    const int I = space_.node_column(n), J = space_.node_row(n);
    if (space_.in_fluid(n) && !space_.on_interface(n) && I > 0 && I < NX && J < NY) index[n] = nfree++;
  }
  std::vector<Point> out(displacement.begin(), displacement.end());
  for (int n = 0; n < space_.num_nodes(); ++n)
    if (space_.in_fluid(n) && !space_.on_interface(n)) out[n] = {0.0, 0.0};
  if (nfree == 0) return out;

  const int npc = space_.nodes_per_cell();
  const double hx = space_.cell_hx(), hy = mesh_->hy_fluid();
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nfree, 2);
  for (int cell = 0; cell < mesh_->num_cells(); ++cell) {
    if (mesh_->cell_subdomain()[cell] != Subdomain::fluid) continue;
    const auto nodes = space_.cell_nodes(cell);
    for (int q = 0; q < space_.num_qp(); ++q) {
      const double w = space_.qp_weight(q) * hx * hy;
      for (int b = 0; b < npc; ++b) {
        const int rb = index[nodes[b]];
        if (rb < 0) continue;
        const Point gb{space_.shape_grad(q, b).x / hx, space_.shape_grad(q, b).y / hy};
        for (int a = 0; a < npc; ++a) {
          const Point ga{space_.shape_grad(q, a).x / hx, space_.shape_grad(q, a).y / hy};
          const double k = w * (settings_.ale_streamwise_weight * ga.x * gb.x + ga.y * gb.y);
          const int ca = index[nodes[a]];
          if (ca >= 0)
            trip.emplace_back(rb, ca, k);
          else {
            rhs(rb, 0) -= k * out[nodes[a]].x;
            rhs(rb, 1) -= k * out[nodes[a]].y;
          }
        }
      }
    }
  }
  Eigen::SparseMatrix<double> K(nfree, nfree);
  K.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol(K);
  if (chol.info() != Eigen::Success) throw std::runtime_error("ALE extension system is singular");
  const Eigen::MatrixXd sol = chol.solve(rhs);
  for (int n = 0; n < space_.num_nodes(); ++n)
    if (index[n] >= 0) out[n] = {sol(index[n], 0), sol(index[n], 1)};
  return out;
}

void FsiSolver::write_fields_csv(const State& s, std::ostream& os) const {
  os << "node,x,y,vx,vy,ux,uy,p\n";
  os.precision(10);
  for (int n = 0; n < space_.num_nodes(); ++n) {
    const Point x = space_.node(n), v = velocity(s, n), u = displacement(s, n);
    os << n << ',' << x.x << ',' << x.y << ',' << v.x << ',' << v.y << ',' << u.x << ',' << u.y << ','
       << pressure(s, n) << '\n';
  }
}

}  // namespace plaque

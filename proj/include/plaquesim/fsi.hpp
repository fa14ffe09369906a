#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <iosfwd>
#include <memory>
#include <vector>

#include "plaquesim/constitutive.hpp"
#include "plaquesim/fe_space.hpp"
#include "plaquesim/mesh.hpp"

namespace plaque {

// Peak centerline inflow of the pulsating profile and its time average.
inline constexpr double kPeakInflowAmplitude = 30.0;
inline constexpr double kMeanInflowAmplitude = 15.0;

struct SolverSettings {
  double newton_tol = 1e-8;       // absolute Euclidean residual norm
  int newton_max_iter = 20;
  double theta = 1.0;             // 1: implicit Euler, 0.5: Crank-Nicolson
  double lps_delta0 = 0.1;
  bool pseudo_time_continuation = true;
  int degree = 2;                 // equal-order Q1 or Q2
  // Keep the factorized Jacobian across Newton iterations and time steps while
  // the residual contracts fast enough.
  bool reuse_jacobian = true;
  int continuation_steps = 10;
  double ale_stiffness = 1.0;
  // Mesh motion solves div(K grad u) = 0 with K = diag(w, 1). A small streamwise
  // weight w spreads the vertical squeeze of a narrowing lumen evenly over the
  // fluid column instead of piling it up at the wall.
  double ale_streamwise_weight = 0.1;
  // K is further scaled by J^-chi, so cells the mesh motion has compressed
  // stiffen and pass the deformation on to their neighbours.
  double ale_jacobian_exponent = 1.0;
  // Weight of the outflow backflow term; 0 gives the plain do-nothing condition.
  double backflow_beta = 1.0;
  // A time step whose Newton solve fails is retried as two half steps, at most
  // this many times in a row.
  int max_step_halvings = 3;

  void validate() const;
};

// Coupled solution on the reference lattice: per node (vx, vy, ux, uy), then
// pressures on fluid nodes. Displacement in the fluid is the ALE extension.
struct State {
  Eigen::VectorXd dofs;
  double time = 0.0;
};

struct DiscreteOperator {
  Eigen::VectorXd residual;
  Eigen::SparseMatrix<double, Eigen::RowMajor> jacobian;  // empty unless requested
};

enum class TimeMode { stationary, transient };

// The discrete problem to assemble: the stationary system or one theta step.
struct ProblemSpec {
  TimeMode mode = TimeMode::stationary;
  double t_new = 0.0;
  double dt = 0.0;
  const State* prev = nullptr;
  double c_s = 0.0;
  // Stationary: centerline speed of the steady parabola. Transient: amplitude A
  // of A sin^2(pi t) (1 - y^2).
  double inflow_amplitude = kMeanInflowAmplitude;

  static ProblemSpec stationary(double c_s, double amplitude = kMeanInflowAmplitude);
  static ProblemSpec transient(const State& prev, double t_new, double dt, double c_s,
                               double amplitude = kPeakInflowAmplitude);

  // Inflow x-velocity at height y for a channel of half height H.
  double inflow_velocity(double y, double H) const;
};

struct NewtonReport {
  int iterations = 0;
  int jacobian_builds = 0;
  double final_norm = 0.0;
  std::vector<double> history;
};

// Monolithic ALE fluid-structure solver on one mesh. Holds the sparsity pattern
// and the factorization cache, so a solver instance is used by one thread.
class FsiSolver {
 public:
  FsiSolver(const Mesh& mesh, MaterialParams params, SolverSettings settings);
  ~FsiSolver();
  FsiSolver(const FsiSolver&) = delete;
  FsiSolver& operator=(const FsiSolver&) = delete;

  const fem::FeSpace& space() const { return space_; }
  const Mesh& mesh() const { return *mesh_; }
  const MaterialParams& params() const { return params_; }
  const SolverSettings& settings() const { return settings_; }
  int num_dofs() const { return space_.num_dofs(); }

  State zero_state() const;

  // Overwrites the constrained unknowns with the boundary data of `spec`.
  void apply_dirichlet(State& state, const ProblemSpec& spec) const;
  bool is_constrained(int dof) const { return constrained_[dof] != 0; }

  // Residual (and optionally the exact Jacobian) of the monolithic system.
  // Constrained rows are replaced by identity rows with zero residual.
  DiscreteOperator assemble(const State& state, const ProblemSpec& spec, bool with_jacobian) const;

  // Damped Newton. Throws NonconvergenceError with the residual history.
  NewtonReport newton_solve(State& state, const ProblemSpec& spec);
  const NewtonReport& last_report() const { return last_report_; }

  // Stationary FSI at the time-averaged inflow. Starts from `guess` (or zero)
  // and falls back to continuation in inflow and growth when Newton fails.
  State solve_stationary(double c_s, const State* guess = nullptr,
                         double amplitude = kMeanInflowAmplitude);

  // One theta step from prev.time to t_new with c_s frozen. `guess` seeds Newton
  // (default: prev).
  State step_transient(const State& prev, double t_new, double dtau, double c_s,
                       double amplitude = kPeakInflowAmplitude, const State* guess = nullptr);

  // sigma_0^-1 times the e1 component of the tangential viscous traction
  // integrated over the deformed interface. Positive in +x.
  double wall_shear_functional(const State& state) const;
  // Integral of sigma_f n . e1 over the interface including pressure (dyn/cm),
  // the pressure-inclusive wall stress variant. Diagnostics only.
  double wall_traction_functional(const State& state) const;

  // Signed outward flux of v through the deformed inflow or outflow boundary.
  double boundary_flux(const State& state, BoundaryTag tag) const;
  // Largest absolute residual over the continuity (pressure test function) rows.
  double continuity_residual_max(const State& state, const ProblemSpec& spec) const;

  double channel_width(const State& state, double x_query = 0.0) const;
  double max_speed(const State& state) const;

  // Harmonic extension of the interface displacement into the fluid lattice
  // nodes; solid node values of `displacement` are returned unchanged.
  std::vector<Point> extend_ale(std::span<const Point> displacement) const;

  Point velocity(const State& s, int node) const;
  Point displacement(const State& s, int node) const;
  double pressure(const State& s, int node) const;
  std::vector<Point> displacement_field(const State& s) const;

  // node id, x, y, vx, vy, ux, uy, p (p = 0 on solid-only nodes).
  void write_fields_csv(const State& s, std::ostream& os) const;

  // Drops the cached factorization.
  void invalidate_jacobian();

 private:
  struct Linear;

  void build_pattern();
  void collect_constraints();
  double residual_norm(const State& s, const ProblemSpec& spec) const;
  State step_split(const State& prev, double t_new, double dtau, double c_s, double amplitude,
                   const State* guess, int halvings);

  const Mesh* mesh_;
  MaterialParams params_;
  SolverSettings settings_;
  fem::FeSpace space_;

  Eigen::SparseMatrix<double, Eigen::RowMajor> pattern_;
  // Per cell: dense local (nloc x nloc) table of positions into pattern_ values.
  std::vector<std::vector<int>> scatter_;
  std::vector<char> constrained_;

  std::unique_ptr<Linear> linear_;
  NewtonReport last_report_;
};

}  // namespace plaque

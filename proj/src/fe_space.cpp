#include "plaquesim/fe_space.hpp"

#include <cmath>

#include "plaquesim/errors.hpp"

namespace plaque::fem {

namespace {

// Gauss-Legendre nodes/weights on [-1,1] for n = 1..4.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  switch (n) {
    case 1: x = {0.0}; w = {2.0}; break;
    case 2: {
      const double a = 1.0 / std::sqrt(3.0);
      x = {-a, a};
      w = {1.0, 1.0};
      break;
    }
    case 3: {
      const double a = std::sqrt(0.6);
      x = {-a, 0.0, a};
      w = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
      break;
    }
    case 4: {
      const double a = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
      const double b = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
      const double wa = (18.0 + std::sqrt(30.0)) / 36.0;
      const double wb = (18.0 - std::sqrt(30.0)) / 36.0;
      x = {-b, -a, a, b};
      w = {wb, wa, wa, wb};
      break;
    }
    default: throw ConfigError("unsupported Gauss rule size");
  }
}

}  // namespace

FeSpace::FeSpace(const Mesh& mesh, int degree) : mesh_(&mesh), degree_(degree) {
  if (degree != 1 && degree != 2) throw ConfigError("element degree must be 1 or 2");

  const auto& g = mesh.geometry();
  const int NX = lattice_nx(), NY = lattice_ny(), JI = interface_row();
  const int rows_solid = degree * mesh.ny_solid();
  const int rows_fluid = degree * mesh.ny_fluid();
  nodes_.reserve(static_cast<std::size_t>((NX + 1) * (NY + 1)));
  for (int J = 0; J <= NY; ++J) {
    const double y = J <= JI ? g.y_bottom() + g.wall_thickness * static_cast<double>(J) / rows_solid
                             : g.y_interface() + g.fluid_half_height * static_cast<double>(J - JI) / rows_fluid;
    for (int I = 0; I <= NX; ++I) nodes_.push_back({g.x_min() + g.length * static_cast<double>(I) / NX, y});
  }
  num_pressure_ = (NY - JI + 1) * (NX + 1);

  const int r = degree;
  for (int j = 0; j < mesh.ny(); ++j)
    for (int i = 0; i < mesh.nx(); ++i)
      for (int b = 0; b <= r; ++b)
        for (int a = 0; a <= r; ++a) cell_nodes_.push_back(lattice_id(r * i + a, r * j + b));

  for (int I = 0; I <= NX; ++I) interface_nodes_.push_back(lattice_id(I, JI));

  std::vector<double> x, w;
  gauss_legendre(degree + 1, x, w);
  for (std::size_t k = 0; k < x.size(); ++k) {
    gauss_x_.push_back(0.5 * (x[k] + 1.0));
    gauss_w_.push_back(0.5 * w[k]);
  }

  const int nq1 = static_cast<int>(gauss_x_.size());
  const int npc = nodes_per_cell();
  for (int qy = 0; qy < nq1; ++qy)
    for (int qx = 0; qx < nq1; ++qx) {
      qp_points_.push_back({gauss_x_[qx], gauss_x_[qy]});
      qp_weights_.push_back(gauss_w_[qx] * gauss_w_[qy]);
    }
  shape_.resize(qp_points_.size() * npc);
  shape_grad_.resize(qp_points_.size() * npc);
  for (int q = 0; q < num_qp(); ++q)
    evaluate(qp_points_[q], std::span<double>(shape_.data() + q * npc, npc),
             std::span<Point>(shape_grad_.data() + q * npc, npc));
}

double FeSpace::lagrange(int k, double t) const {
  double v = 1.0;
  for (int m = 0; m <= degree_; ++m) {
    if (m == k) continue;
    const double tm = static_cast<double>(m) / degree_;
    const double tk = static_cast<double>(k) / degree_;
    v *= (t - tm) / (tk - tm);
  }
  return v;
}

double FeSpace::lagrange_deriv(int k, double t) const {
  const double tk = static_cast<double>(k) / degree_;
  double sum = 0.0;
  for (int l = 0; l <= degree_; ++l) {
    if (l == k) continue;
    double prod = 1.0 / (tk - static_cast<double>(l) / degree_);
    for (int m = 0; m <= degree_; ++m) {
      if (m == k || m == l) continue;
      const double tm = static_cast<double>(m) / degree_;
      prod *= (t - tm) / (tk - tm);
    }
    sum += prod;
  }
  return sum;
}

void FeSpace::evaluate(const Point& xi, std::span<double> values, std::span<Point> grads) const {
  const int r = degree_;
  for (int b = 0; b <= r; ++b)
    for (int a = 0; a <= r; ++a) {
      const int k = a + (r + 1) * b;
      const double la = lagrange(a, xi.x), lb = lagrange(b, xi.y);
      values[k] = la * lb;
      grads[k] = {lagrange_deriv(a, xi.x) * lb, la * lagrange_deriv(b, xi.y)};
    }
}

}  // namespace plaque::fem

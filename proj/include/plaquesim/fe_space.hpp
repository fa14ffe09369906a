#pragma once

#include <span>
#include <vector>

#include "plaquesim/mesh.hpp"

namespace plaque::fem {

// Tensor-product Lagrange space of degree 1 or 2 on the structured channel mesh.
// The degree-r nodes form a lattice of (r nx + 1) x (r ny + 1) points; every
// field (velocity, displacement, pressure) uses the same nodes.
class FeSpace {
 public:
  FeSpace(const Mesh& mesh, int degree);

  const Mesh& mesh() const { return *mesh_; }
  int degree() const { return degree_; }
  int nodes_per_cell() const { return (degree_ + 1) * (degree_ + 1); }

  int lattice_nx() const { return degree_ * mesh_->nx(); }
  int lattice_ny() const { return degree_ * mesh_->ny(); }
  int interface_row() const { return degree_ * mesh_->ny_solid(); }
  int lattice_id(int I, int J) const { return J * (lattice_nx() + 1) + I; }

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  const Point& node(int n) const { return nodes_[n]; }
  int node_column(int n) const { return n % (lattice_nx() + 1); }
  int node_row(int n) const { return n / (lattice_nx() + 1); }

  std::span<const int> cell_nodes(int cell) const {
    return {cell_nodes_.data() + static_cast<std::size_t>(cell) * nodes_per_cell(),
            static_cast<std::size_t>(nodes_per_cell())};
  }

  bool in_fluid(int n) const { return node_row(n) >= interface_row(); }
  bool in_solid(int n) const { return node_row(n) <= interface_row(); }
  bool on_interface(int n) const { return node_row(n) == interface_row(); }

  // Lattice nodes on the interface, ordered by x.
  std::span<const int> interface_nodes() const { return interface_nodes_; }

  // Unknowns: (vx, vy, ux, uy) for every node, then one pressure per fluid node.
  int num_pressure() const { return num_pressure_; }
  int num_dofs() const { return 4 * num_nodes() + num_pressure_; }
  int dof(int node, int comp) const { return 4 * node + comp; }
  int pressure_dof(int node) const {
    return in_fluid(node) ? 4 * num_nodes() + (node_row(node) - interface_row()) * (lattice_nx() + 1) +
                                node_column(node)
                          : -1;
  }

  // Reference element [0,1]^2 data.
  int num_qp() const { return static_cast<int>(qp_weights_.size()); }
  double qp_weight(int q) const { return qp_weights_[q]; }
  const Point& qp_point(int q) const { return qp_points_[q]; }
  // Shape value and reference-cell gradient of local node a at quadrature point q.
  double shape(int q, int a) const { return shape_[q * nodes_per_cell() + a]; }
  const Point& shape_grad(int q, int a) const { return shape_grad_[q * nodes_per_cell() + a]; }

  // One-dimensional Gauss rule on [0,1] with degree+1 points.
  std::span<const double> gauss_points() const { return gauss_x_; }
  std::span<const double> gauss_weights() const { return gauss_w_; }

  // Shape values and reference gradients at an arbitrary point of [0,1]^2.
  void evaluate(const Point& xi, std::span<double> values, std::span<Point> grads) const;

  // Cell size; the mesh is uniform within each subdomain.
  double cell_hx() const { return mesh_->hx(); }
  double cell_hy(int cell) const {
    return mesh_->cell_subdomain()[cell] == Subdomain::fluid ? mesh_->hy_fluid() : mesh_->hy_solid();
  }
  // Lower-left corner of a cell.
  Point cell_origin(int cell) const { return mesh_->nodes()[mesh_->cells()[cell][0]]; }

 private:
  double lagrange(int k, double t) const;
  double lagrange_deriv(int k, double t) const;

  const Mesh* mesh_;
  int degree_;
  int num_pressure_ = 0;
  std::vector<Point> nodes_;
  std::vector<int> cell_nodes_;
  std::vector<int> interface_nodes_;
  std::vector<double> gauss_x_, gauss_w_;
  std::vector<double> qp_weights_;
  std::vector<Point> qp_points_;
  std::vector<double> shape_;
  std::vector<Point> shape_grad_;
};

}  // namespace plaque::fem

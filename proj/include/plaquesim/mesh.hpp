#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "plaquesim/tensor.hpp"

namespace plaque {

// Lower half of the symmetric channel: fluid on top of a solid wall.
struct ChannelGeometry {
  double length = 10.0;            // cm
  double fluid_half_height = 1.0;  // cm
  double wall_thickness = 1.0;     // cm
  bool origin_centered = true;     // x in [-L/2, L/2] instead of [0, L]

  double x_min() const { return origin_centered ? -0.5 * length : 0.0; }
  double x_max() const { return x_min() + length; }
  double y_interface() const { return -fluid_half_height; }
  double y_bottom() const { return -fluid_half_height - wall_thickness; }

  void validate() const;
};

enum class Subdomain { fluid, solid };

enum class BoundaryTag { inflow, outflow, solid_clamp, symmetry, interface };

const char* to_string(BoundaryTag tag);
const char* to_string(Subdomain s);

// A facet of the structured mesh that lies on a tagged boundary. For interface
// facets `cell` is the fluid cell and `other_cell` the solid one.
struct Facet {
  std::array<int, 2> nodes{};
  BoundaryTag tag{};
  int cell = -1;
  int other_cell = -1;
};

// Structured quadrilateral mesh of the half channel. Node (i, j) has id
// j * (nx + 1) + i with j counted upward from the clamped bottom; cell nodes are
// listed counter-clockwise starting at the lower-left corner.
class Mesh {
 public:
  Mesh(ChannelGeometry geom, int nx, int ny_fluid, int ny_solid);

  const ChannelGeometry& geometry() const { return geom_; }
  int nx() const { return nx_; }
  int ny_fluid() const { return ny_fluid_; }
  int ny_solid() const { return ny_solid_; }
  int ny() const { return ny_fluid_ + ny_solid_; }

  std::span<const Point> nodes() const { return nodes_; }
  std::span<const std::array<int, 4>> cells() const { return cells_; }
  std::span<const Subdomain> cell_subdomain() const { return cell_subdomain_; }
  std::span<const Facet> facets() const { return facets_; }

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_cells() const { return static_cast<int>(cells_.size()); }
  int node_id(int i, int j) const { return j * (nx_ + 1) + i; }
  int cell_id(int i, int j) const { return j * nx_ + i; }

  double hx() const { return geom_.length / nx_; }
  double hy_fluid() const { return geom_.fluid_half_height / ny_fluid_; }
  double hy_solid() const { return geom_.wall_thickness / ny_solid_; }

  // Plain-text dump: "node id x y" lines followed by "cell id n0 n1 n2 n3 subdomain".
  void write_text(std::ostream& os) const;

 private:
  ChannelGeometry geom_;
  int nx_, ny_fluid_, ny_solid_;
  std::vector<Point> nodes_;
  std::vector<std::array<int, 4>> cells_;
  std::vector<Subdomain> cell_subdomain_;
  std::vector<Facet> facets_;
};

Mesh build_channel_mesh(const ChannelGeometry& geom, int nx, int ny_fluid, int ny_solid);

// Full channel width at x_query: twice the distance from the symmetry line to
// the deformed interface. `interface_points` are reference interface positions
// sorted by x, `interface_displacement` the matching displacements. The deformed
// interface is interpolated linearly in its deformed x coordinate.
double channel_width(std::span<const Point> interface_points,
                     std::span<const Point> interface_displacement, double x_query);

// Same, with a displacement given per mesh node.
double channel_width(const Mesh& mesh, std::span<const Point> displacement, double x_query);

}  // namespace plaque

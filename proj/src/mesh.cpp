#include "plaquesim/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "plaquesim/errors.hpp"

namespace plaque {

void ChannelGeometry::validate() const {
  if (!(length > 0.0)) throw ConfigError("channel length must be positive");
  if (!(fluid_half_height > 0.0)) throw ConfigError("fluid half height must be positive");
  if (!(wall_thickness > 0.0)) throw ConfigError("wall thickness must be positive");
}

const char* to_string(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::inflow: return "inflow";
    case BoundaryTag::outflow: return "outflow";
    case BoundaryTag::solid_clamp: return "solid_clamp";
    case BoundaryTag::symmetry: return "symmetry";
    case BoundaryTag::interface: return "interface";
  }
  return "?";
}

const char* to_string(Subdomain s) { return s == Subdomain::fluid ? "fluid" : "solid"; }

Mesh::Mesh(ChannelGeometry geom, int nx, int ny_fluid, int ny_solid)
    : geom_(geom), nx_(nx), ny_fluid_(ny_fluid), ny_solid_(ny_solid) {
  geom_.validate();
  if (nx < 1 || ny_fluid < 1 || ny_solid < 1)
    throw ConfigError("mesh subdivisions must be at least 1");

  const int nyt = ny();
  nodes_.reserve(static_cast<std::size_t>((nx + 1) * (nyt + 1)));
  for (int j = 0; j <= nyt; ++j) {
    // Rows are computed from integer fractions of each layer so that the
    // interface row is exactly y = -fluid_half_height.
    double y;
    if (j <= ny_solid)
      y = geom_.y_bottom() + geom_.wall_thickness * static_cast<double>(j) / ny_solid;
    else
      y = geom_.y_interface() + geom_.fluid_half_height * static_cast<double>(j - ny_solid) / ny_fluid;
    for (int i = 0; i <= nx; ++i) {
      const double x = geom_.x_min() + geom_.length * static_cast<double>(i) / nx;
      nodes_.push_back({x, y});
    }
  }

  for (int j = 0; j < nyt; ++j) {
    for (int i = 0; i < nx; ++i) {
      cells_.push_back({node_id(i, j), node_id(i + 1, j), node_id(i + 1, j + 1), node_id(i, j + 1)});
      cell_subdomain_.push_back(j < ny_solid ? Subdomain::solid : Subdomain::fluid);
    }
  }

  // Bottom clamp, top symmetry.
  for (int i = 0; i < nx; ++i) {
    facets_.push_back({{node_id(i, 0), node_id(i + 1, 0)}, BoundaryTag::solid_clamp, cell_id(i, 0), -1});
    facets_.push_back({{node_id(i, nyt), node_id(i + 1, nyt)}, BoundaryTag::symmetry, cell_id(i, nyt - 1), -1});
    facets_.push_back({{node_id(i, ny_solid), node_id(i + 1, ny_solid)}, BoundaryTag::interface,
                       cell_id(i, ny_solid), cell_id(i, ny_solid - 1)});
  }
  // Left and right ends.
  for (int j = 0; j < nyt; ++j) {
    const bool solid = j < ny_solid;
    facets_.push_back({{node_id(0, j), node_id(0, j + 1)},
                       solid ? BoundaryTag::solid_clamp : BoundaryTag::inflow, cell_id(0, j), -1});
    facets_.push_back({{node_id(nx, j), node_id(nx, j + 1)},
                       solid ? BoundaryTag::solid_clamp : BoundaryTag::outflow, cell_id(nx - 1, j), -1});
  }
}

void Mesh::write_text(std::ostream& os) const {
  os.precision(17);
  for (std::size_t n = 0; n < nodes_.size(); ++n)
    os << "node " << n << ' ' << nodes_[n].x << ' ' << nodes_[n].y << '\n';
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    os << "cell " << c;
    for (int n : cells_[c]) os << ' ' << n;
    os << ' ' << to_string(cell_subdomain_[c]) << '\n';
  }
}

Mesh build_channel_mesh(const ChannelGeometry& geom, int nx, int ny_fluid, int ny_solid) {
  return Mesh(geom, nx, ny_fluid, ny_solid);
}

double channel_width(std::span<const Point> interface_points,
                     std::span<const Point> interface_displacement, double x_query) {
  if (interface_points.size() < 2 || interface_points.size() != interface_displacement.size())
    throw DomainError("interface description needs at least two points with displacements");
  const double x0 = interface_points.front().x;
  const double x1 = interface_points.back().x;
  constexpr double slack = 1e-12;
  if (x_query < x0 - slack || x_query > x1 + slack)
    throw DomainError("x = " + std::to_string(x_query) + " lies outside the channel");

  const std::size_t n = interface_points.size();
  auto deformed = [&](std::size_t k) { return interface_points[k] + interface_displacement[k]; };
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const Point a = deformed(k);
    const Point b = deformed(k + 1);
    const double lo = std::min(a.x, b.x), hi = std::max(a.x, b.x);
    if (x_query >= lo - slack && x_query <= hi + slack) {
      const double t = hi > lo ? (x_query - a.x) / (b.x - a.x) : 0.0;
      const double y = a.y + std::clamp(t, 0.0, 1.0) * (b.y - a.y);
      return 2.0 * std::abs(y);
    }
  }
  // Interface ends are clamped, so the deformed range covers the reference one.
  throw DomainError("x = " + std::to_string(x_query) + " not covered by the deformed interface");
}

double channel_width(const Mesh& mesh, std::span<const Point> displacement, double x_query) {
  if (static_cast<int>(displacement.size()) != mesh.num_nodes())
    throw DomainError("displacement field does not match the mesh");
  std::vector<Point> pts, disp;
  for (int i = 0; i <= mesh.nx(); ++i) {
    const int id = mesh.node_id(i, mesh.ny_solid());
    pts.push_back(mesh.nodes()[id]);
    disp.push_back(displacement[id]);
  }
  return channel_width(pts, disp, x_query);
}

}  // namespace plaque

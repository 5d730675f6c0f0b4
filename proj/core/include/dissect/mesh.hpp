#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "dissect/matrix.hpp"

namespace dissect {

using Point = std::array<double, 3>;

struct Extents {
  double lx = 1.0;
  double ly = 1.0;
  double lz = 1.0;
};

enum class EntityKind { Vertex, Edge, Face, Interior };

std::string_view to_string(EntityKind kind);

/// Tensor-product mode layout of one hexahedron of degree p. Mode (a, b, c)
/// has flat index a + (p+1) * (b + (p+1) * c); 1D index 0/1 are the linear
/// end functions, >= 2 the integrated Legendre bubbles.
struct ModeLayout {
  int degree = 1;
  std::vector<std::array<int, 3>> modes;

  static ModeLayout for_degree(int p);
  std::size_t size() const { return modes.size(); }
  EntityKind kind(std::size_t local) const;
};

// Geometric entity carrying a global DOF. `lattice` indexes the refined
// (2nx+1) x (2ny+1) x (2nz+1) lattice: even coordinates are vertex planes,
// odd ones element midplanes. `mode` holds the bubble index for every odd
// direction and -1 otherwise.
struct DofEntity {
  EntityKind kind = EntityKind::Vertex;
  std::array<int, 3> lattice{};
  std::array<int, 3> mode{-1, -1, -1};
};

struct Element {
  ElementId id = 0;
  std::array<Point, 8> corners{};  // corner i + 2j + 4k maps to reference (2i-1, 2j-1, 2k-1)
  int degree = 1;
  std::vector<DofId> dof_ids;      // free DOFs only, ascending local mode order
  std::vector<int> local_modes;    // flat ModeLayout index of each entry in dof_ids
  Matrix stiffness;
  std::vector<double> load;

  std::size_t size() const { return dof_ids.size(); }
};

struct Mesh {
  std::vector<Element> elements;
  int n_dofs = 0;
  std::vector<DofEntity> dof_entity;  // empty for imported meshes
  Extents extents;
  std::array<int, 3> cells{0, 0, 0};
  int degree = 1;

  const Element& element(ElementId id) const;
  Element& element(ElementId id);
  std::optional<std::size_t> find_element(ElementId id) const;
};

struct GridSpec {
  int nx = 1;
  int ny = 1;
  int nz = 1;
  Extents extents;
  int degree = 1;
};

struct ElementMatrix {
  Matrix stiffness;
  ModeLayout layout;
};

/// Stiffness of the Laplace operator on a trilinear hexahedron, integrated
/// with (p+1)^3 Gauss points.
ElementMatrix element_stiffness(const std::array<Point, 8>& corners, int degree);

/// Structured nx*ny*nz grid of hexahedra on [0,Lx]x[0,Ly]x[0,Lz] with
/// homogeneous Dirichlet data removed. Loads start at zero.
Mesh generate_mesh(const GridSpec& spec);

enum class ManufacturedCase { Poly2, Trig };

ManufacturedCase parse_case(std::string_view name);
std::string_view to_string(ManufacturedCase c);

class ExactSolution {
 public:
  ExactSolution(ManufacturedCase c, Extents e) : case_(c), extents_(e) {}

  double value(const Point& x) const;
  /// -Laplacian of value().
  double source(const Point& x) const;

 private:
  ManufacturedCase case_;
  Extents extents_;
};

/// Writes f = -Δu into every element load vector and returns u.
ExactSolution manufactured_problem(Mesh& mesh, ManufacturedCase c);

/// Physical point of reference coordinates xi on a trilinear hexahedron.
Point map_point(const std::array<Point, 8>& corners, const Point& xi);

/// Discrete L2 error of a nodal solution vector against u, accumulated at
/// Gauss points of every element. Requires generated meshes (local_modes).
double l2_error(const Mesh& mesh, std::span<const double> values, const ExactSolution& exact);

/// Scales the element stiffness by c (material modification). Load untouched.
void scale_element(Mesh& mesh, ElementId id, double factor);

}  // namespace dissect

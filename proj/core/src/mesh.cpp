#include "dissect/mesh.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "dissect/basis.hpp"
#include "dissect/error.hpp"

namespace dissect {

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

constexpr double kCornerSign[2] = {-1.0, 1.0};

// J(i, j) = d x_i / d xi_j of the trilinear map.
Mat3 jacobian(const std::array<Point, 8>& corners, const Point& xi) {
  Mat3 jac{};
  for (int c = 0; c < 8; ++c) {
    const double s[3] = {kCornerSign[c & 1], kCornerSign[(c >> 1) & 1], kCornerSign[(c >> 2) & 1]};
    const double f[3] = {0.5 * (1.0 + s[0] * xi[0]), 0.5 * (1.0 + s[1] * xi[1]),
                         0.5 * (1.0 + s[2] * xi[2])};
    const double dn[3] = {0.5 * s[0] * f[1] * f[2], 0.5 * s[1] * f[0] * f[2], 0.5 * s[2] * f[0] * f[1]};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) jac[i][j] += corners[c][i] * dn[j];
  }
  return jac;
}

double determinant(const Mat3& a) {
  return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
         a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
         a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

// Inverse transpose, scaled by 1/det.
Mat3 inverse_transpose(const Mat3& a, double det) {
  Mat3 r{};
  r[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det;
  r[0][1] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det;
  r[0][2] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det;
  r[1][0] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
  r[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
  r[1][2] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det;
  r[2][0] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
  r[2][1] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
  r[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
  return r;
}

struct Table1d {
  std::vector<double> value;  // [point * (p+1) + mode]
  std::vector<double> deriv;
};

Table1d tabulate(const GaussRule& rule, int p) {
  const std::size_t np = rule.points.size();
  Table1d t;
  t.value.resize(np * (p + 1));
  t.deriv.resize(np * (p + 1));
  for (std::size_t q = 0; q < np; ++q)
    for (int m = 0; m <= p; ++m) {
      t.value[q * (p + 1) + m] = hierarchic(m, rule.points[q]);
      t.deriv[q * (p + 1) + m] = hierarchic_derivative(m, rule.points[q]);
    }
  return t;
}

// Load vector over the full layout, f = source(x).
std::vector<double> element_load(const std::array<Point, 8>& corners, int p,
                                 const std::function<double(const Point&)>& source) {
  const GaussRule rule = gauss_legendre(p + 3);
  const Table1d tab = tabulate(rule, p);
  const std::size_t np = rule.points.size();
  const int n1 = p + 1;
  std::vector<double> f(static_cast<std::size_t>(n1 * n1 * n1), 0.0);
  for (std::size_t qz = 0; qz < np; ++qz)
    for (std::size_t qy = 0; qy < np; ++qy)
      for (std::size_t qx = 0; qx < np; ++qx) {
        const Point xi{rule.points[qx], rule.points[qy], rule.points[qz]};
        const double det = determinant(jacobian(corners, xi));
        const double w = rule.weights[qx] * rule.weights[qy] * rule.weights[qz] * det;
        const double fx = source(map_point(corners, xi)) * w;
        for (int c = 0; c < n1; ++c)
          for (int b = 0; b < n1; ++b)
            for (int a = 0; a < n1; ++a)
              f[a + n1 * (b + n1 * c)] +=
                  fx * tab.value[qx * n1 + a] * tab.value[qy * n1 + b] * tab.value[qz * n1 + c];
      }
  return f;
}

}  // namespace

std::string_view to_string(EntityKind kind) {
  switch (kind) {
    case EntityKind::Vertex: return "vertex";
    case EntityKind::Edge: return "edge";
    case EntityKind::Face: return "face";
    case EntityKind::Interior: return "interior";
  }
  return "?";
}

ModeLayout ModeLayout::for_degree(int p) {
  ModeLayout layout;
  layout.degree = p;
  for (int c = 0; c <= p; ++c)
    for (int b = 0; b <= p; ++b)
      for (int a = 0; a <= p; ++a) layout.modes.push_back({a, b, c});
  return layout;
}

EntityKind ModeLayout::kind(std::size_t local) const {
  int bubbles = 0;
  for (int m : modes[local]) bubbles += m >= 2 ? 1 : 0;
  return static_cast<EntityKind>(bubbles);
}

const Element& Mesh::element(ElementId id) const {
  auto pos = find_element(id);
  if (!pos) throw Error(ErrorKind::InvalidArgument, "unknown element id " + std::to_string(id));
  return elements[*pos];
}

Element& Mesh::element(ElementId id) {
  return const_cast<Element&>(static_cast<const Mesh&>(*this).element(id));
}

std::optional<std::size_t> Mesh::find_element(ElementId id) const {
  if (id >= 0 && static_cast<std::size_t>(id) < elements.size() && elements[id].id == id)
    return static_cast<std::size_t>(id);
  for (std::size_t i = 0; i < elements.size(); ++i)
    if (elements[i].id == id) return i;
  return std::nullopt;
}

Point map_point(const std::array<Point, 8>& corners, const Point& xi) {
  Point x{0.0, 0.0, 0.0};
  for (int c = 0; c < 8; ++c) {
    const double n = 0.125 * (1.0 + kCornerSign[c & 1] * xi[0]) *
                     (1.0 + kCornerSign[(c >> 1) & 1] * xi[1]) *
                     (1.0 + kCornerSign[(c >> 2) & 1] * xi[2]);
    for (int i = 0; i < 3; ++i) x[i] += n * corners[c][i];
  }
  return x;
}

ElementMatrix element_stiffness(const std::array<Point, 8>& corners, int degree) {
  if (degree < 1) throw Error(ErrorKind::InvalidArgument, "degree must be >= 1");
  const int p = degree;
  const int n1 = p + 1;
  const GaussRule rule = gauss_legendre(n1);
  const Table1d tab = tabulate(rule, p);

  ElementMatrix out{Matrix::square(static_cast<std::size_t>(n1 * n1 * n1)), ModeLayout::for_degree(p)};
  const std::size_t n = out.layout.size();
  std::vector<double> grad(3 * n);

  for (int qz = 0; qz < n1; ++qz)
    for (int qy = 0; qy < n1; ++qy)
      for (int qx = 0; qx < n1; ++qx) {
        const Point xi{rule.points[qx], rule.points[qy], rule.points[qz]};
        const Mat3 jac = jacobian(corners, xi);
        const double det = determinant(jac);
        if (!(det > 0.0))
          throw Error(ErrorKind::DegenerateElement,
                      "non-positive Jacobian " + std::to_string(det) + " at a quadrature point");
        const Mat3 jit = inverse_transpose(jac, det);
        const double w = rule.weights[qx] * rule.weights[qy] * rule.weights[qz] * det;

        for (std::size_t k = 0; k < n; ++k) {
          const auto [a, b, c] = out.layout.modes[k];
          const double va = tab.value[qx * n1 + a], vb = tab.value[qy * n1 + b], vc = tab.value[qz * n1 + c];
          const double ref[3] = {tab.deriv[qx * n1 + a] * vb * vc, va * tab.deriv[qy * n1 + b] * vc,
                                 va * vb * tab.deriv[qz * n1 + c]};
          for (int i = 0; i < 3; ++i)
            grad[3 * k + i] = jit[i][0] * ref[0] + jit[i][1] * ref[1] + jit[i][2] * ref[2];
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double gr0 = w * grad[3 * r], gr1 = w * grad[3 * r + 1], gr2 = w * grad[3 * r + 2];
          auto row = out.stiffness.row(r);
          for (std::size_t c = 0; c <= r; ++c)
            row[c] += gr0 * grad[3 * c] + gr1 * grad[3 * c + 1] + gr2 * grad[3 * c + 2];
        }
      }
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < r; ++c) out.stiffness(c, r) = out.stiffness(r, c);
  return out;
}

Mesh generate_mesh(const GridSpec& spec) {
  if (spec.nx < 1 || spec.ny < 1 || spec.nz < 1)
    throw Error(ErrorKind::InvalidArgument, "grid dimensions must be >= 1");
  if (spec.degree < 1) throw Error(ErrorKind::InvalidArgument, "degree must be >= 1");
  if (!(spec.extents.lx > 0.0 && spec.extents.ly > 0.0 && spec.extents.lz > 0.0))
    throw Error(ErrorKind::InvalidArgument, "extents must be positive");

  const int p = spec.degree;
  const std::array<int, 3> cells{spec.nx, spec.ny, spec.nz};
  const std::array<int, 3> lat{2 * spec.nx + 1, 2 * spec.ny + 1, 2 * spec.nz + 1};
  const auto lattice_index = [&](const std::array<int, 3>& g) {
    return static_cast<std::size_t>(g[0] + lat[0] * (g[1] + lat[1] * g[2]));
  };
  const auto on_boundary = [&](const std::array<int, 3>& g) {
    for (int d = 0; d < 3; ++d)
      if (g[d] == 0 || g[d] == lat[d] - 1) return true;
    return false;
  };

  Mesh mesh;
  mesh.extents = spec.extents;
  mesh.cells = cells;
  mesh.degree = p;

  // Number free entity modes in lattice order (x fastest), modes x-major.
  std::vector<int> base(static_cast<std::size_t>(lat[0]) * lat[1] * lat[2], -1);
  for (int gz = 0; gz < lat[2]; ++gz)
    for (int gy = 0; gy < lat[1]; ++gy)
      for (int gx = 0; gx < lat[0]; ++gx) {
        const std::array<int, 3> g{gx, gy, gz};
        if (on_boundary(g)) continue;
        int odd = 0;
        for (int d = 0; d < 3; ++d) odd += g[d] & 1;
        const int count = static_cast<int>(std::pow(p - 1, odd));
        if (count == 0) continue;
        base[lattice_index(g)] = mesh.n_dofs;
        for (int k = 0; k < count; ++k) {
          DofEntity e;
          e.kind = static_cast<EntityKind>(odd);
          e.lattice = g;
          int rest = k;
          for (int d = 0; d < 3; ++d)
            if (g[d] & 1) {
              e.mode[d] = 2 + rest % (p - 1);
              rest /= (p - 1);
            }
          mesh.dof_entity.push_back(e);
        }
        mesh.n_dofs += count;
      }

  const double h[3] = {spec.extents.lx / spec.nx, spec.extents.ly / spec.ny, spec.extents.lz / spec.nz};
  const ModeLayout layout = ModeLayout::for_degree(p);

  // All elements of a structured grid are congruent: one stiffness matrix.
  std::array<Point, 8> unit_corners{};
  for (int c = 0; c < 8; ++c)
    unit_corners[c] = {(c & 1) * h[0], ((c >> 1) & 1) * h[1], ((c >> 2) & 1) * h[2]};
  const ElementMatrix reference = element_stiffness(unit_corners, p);

  for (int ez = 0; ez < spec.nz; ++ez)
    for (int ey = 0; ey < spec.ny; ++ey)
      for (int ex = 0; ex < spec.nx; ++ex) {
        Element el;
        el.id = static_cast<ElementId>(mesh.elements.size());
        el.degree = p;
        const std::array<int, 3> e{ex, ey, ez};
        for (int c = 0; c < 8; ++c)
          el.corners[c] = {(ex + (c & 1)) * h[0], (ey + ((c >> 1) & 1)) * h[1], (ez + ((c >> 2) & 1)) * h[2]};

        for (std::size_t k = 0; k < layout.size(); ++k) {
          const auto& m = layout.modes[k];
          std::array<int, 3> g{};
          for (int d = 0; d < 3; ++d) g[d] = 2 * e[d] + (m[d] == 0 ? 0 : m[d] == 1 ? 2 : 1);
          if (on_boundary(g)) continue;
          int local = 0;
          int stride = 1;
          for (int d = 0; d < 3; ++d)
            if (m[d] >= 2) {
              local += (m[d] - 2) * stride;
              stride *= (p - 1);
            }
          el.dof_ids.push_back(base[lattice_index(g)] + local);
          el.local_modes.push_back(static_cast<int>(k));
        }
        const std::size_t ne = el.dof_ids.size();
        el.stiffness = Matrix::square(ne);
        for (std::size_t r = 0; r < ne; ++r)
          for (std::size_t c = 0; c < ne; ++c)
            el.stiffness(r, c) = reference.stiffness(el.local_modes[r], el.local_modes[c]);
        el.load.assign(ne, 0.0);
        mesh.elements.push_back(std::move(el));
      }
  return mesh;
}

ManufacturedCase parse_case(std::string_view name) {
  if (name == "poly2") return ManufacturedCase::Poly2;
  if (name == "trig") return ManufacturedCase::Trig;
  throw Error(ErrorKind::InvalidArgument, "unknown manufactured case '" + std::string(name) + "'");
}

std::string_view to_string(ManufacturedCase c) {
  return c == ManufacturedCase::Poly2 ? "poly2" : "trig";
}

double ExactSolution::value(const Point& x) const {
  const double l[3] = {extents_.lx, extents_.ly, extents_.lz};
  double u = 1.0;
  for (int d = 0; d < 3; ++d) {
    if (case_ == ManufacturedCase::Poly2)
      u *= x[d] * (l[d] - x[d]);
    else
      u *= std::sin(std::numbers::pi * x[d] / l[d]);
  }
  return u;
}

double ExactSolution::source(const Point& x) const {
  const double l[3] = {extents_.lx, extents_.ly, extents_.lz};
  if (case_ == ManufacturedCase::Poly2) {
    double q[3];
    for (int d = 0; d < 3; ++d) q[d] = x[d] * (l[d] - x[d]);
    return 2.0 * (q[1] * q[2] + q[0] * q[2] + q[0] * q[1]);
  }
  double k2 = 0.0;
  for (int d = 0; d < 3; ++d) k2 += 1.0 / (l[d] * l[d]);
  return std::numbers::pi * std::numbers::pi * k2 * value(x);
}

ExactSolution manufactured_problem(Mesh& mesh, ManufacturedCase c) {
  ExactSolution exact(c, mesh.extents);
  const auto source = [&exact](const Point& x) { return exact.source(x); };
  for (Element& el : mesh.elements) {
    if (el.local_modes.size() != el.dof_ids.size())
      throw Error(ErrorKind::InvalidArgument, "manufactured loads need a generated mesh");
    const std::vector<double> full = element_load(el.corners, el.degree, source);
    el.load.resize(el.size());
    for (std::size_t k = 0; k < el.size(); ++k) el.load[k] = full[el.local_modes[k]];
  }
  return exact;
}

double l2_error(const Mesh& mesh, std::span<const double> values, const ExactSolution& exact) {
  double err2 = 0.0;
  for (const Element& el : mesh.elements) {
    const int p = el.degree;
    const int n1 = p + 1;
    const GaussRule rule = gauss_legendre(p + 3);
    const Table1d tab = tabulate(rule, p);
    const ModeLayout layout = ModeLayout::for_degree(p);
    const std::size_t np = rule.points.size();
    for (std::size_t qz = 0; qz < np; ++qz)
      for (std::size_t qy = 0; qy < np; ++qy)
        for (std::size_t qx = 0; qx < np; ++qx) {
          const Point xi{rule.points[qx], rule.points[qy], rule.points[qz]};
          const double det = determinant(jacobian(el.corners, xi));
          double uh = 0.0;
          for (std::size_t k = 0; k < el.size(); ++k) {
            const auto& m = layout.modes[el.local_modes[k]];
            uh += values[el.dof_ids[k]] * tab.value[qx * n1 + m[0]] * tab.value[qy * n1 + m[1]] *
                  tab.value[qz * n1 + m[2]];
          }
          const double diff = uh - exact.value(map_point(el.corners, xi));
          err2 += rule.weights[qx] * rule.weights[qy] * rule.weights[qz] * det * diff * diff;
        }
  }
  return std::sqrt(err2);
}

void scale_element(Mesh& mesh, ElementId id, double factor) {
  if (!(factor > 0.0)) throw Error(ErrorKind::InvalidArgument, "scale factor must be positive");
  Element& el = mesh.element(id);
  for (double& v : el.stiffness.data()) v *= factor;
}

}  // namespace dissect

#include <algorithm>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "dissect/basis.hpp"
#include "dissect/error.hpp"
#include "dissect/mesh.hpp"
#include "dissect/solver.hpp"
#include "dissect/tree.hpp"
#include "oracles.hpp"

using namespace dissect;

namespace {

std::array<Point, 8> box_corners(Point lo, Point hi) {
  std::array<Point, 8> c{};
  for (int k = 0; k < 8; ++k)
    c[k] = {k & 1 ? hi[0] : lo[0], k & 2 ? hi[1] : lo[1], k & 4 ? hi[2] : lo[2]};
  return c;
}

// Affine image of the reference cube: x = x0 + A (xi + 1) / 2.
std::array<Point, 8> parallelepiped(const Point& x0, const std::array<Point, 3>& axes) {
  std::array<Point, 8> c{};
  for (int k = 0; k < 8; ++k)
    for (int d = 0; d < 3; ++d)
      c[k][d] = x0[d] + (k & 1 ? axes[0][d] : 0.0) + (k & 2 ? axes[1][d] : 0.0) + (k & 4 ? axes[2][d] : 0.0);
  return c;
}

double symmetric_eigen_min(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(oracle::to_eigen(m));
  return es.eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("gauss rule integrates polynomials of degree 2n-1") {
  for (int n = 1; n <= 8; ++n) {
    const GaussRule r = gauss_legendre(n);
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double s = 0.0;
      for (int q = 0; q < n; ++q) s += r.weights[q] * std::pow(r.points[q], k);
      const double exact = k % 2 ? 0.0 : 2.0 / (k + 1);
      CHECK(s == doctest::Approx(exact).epsilon(1e-14));
    }
  }
}

TEST_CASE("hierarchic basis matches the integrated Legendre definition") {
  for (int j = 0; j <= 6; ++j)
    for (double x : {-1.0, -0.7, -0.1, 0.0, 0.33, 0.9, 1.0}) {
      CHECK(hierarchic(j, x) == doctest::Approx(oracle::mode_value(j, x)).epsilon(1e-13));
      CHECK(hierarchic_derivative(j, x) == doctest::Approx(oracle::mode_derivative(j, x)).epsilon(1e-13));
    }
  // Bubble modes vanish at both ends.
  for (int j = 2; j <= 6; ++j) {
    CHECK(std::abs(hierarchic(j, -1.0)) < 1e-15);
    CHECK(std::abs(hierarchic(j, 1.0)) < 1e-15);
  }
}

TEST_CASE("generate_mesh examples") {
  SUBCASE("2x2x2 p=1 has the single interior vertex") {
    const Mesh m = generate_mesh({2, 2, 2, {1, 1, 1}, 1});
    CHECK(m.elements.size() == 8);
    CHECK(m.n_dofs == 1);
  }
  SUBCASE("p=2 element has 27 modes before boundary elimination") {
    const auto layout = ModeLayout::for_degree(2);
    CHECK(layout.size() == 27);
    std::map<EntityKind, int> count;
    for (std::size_t k = 0; k < layout.size(); ++k) ++count[layout.kind(k)];
    CHECK(count[EntityKind::Vertex] == 8);
    CHECK(count[EntityKind::Edge] == 12);
    CHECK(count[EntityKind::Face] == 6);
    CHECK(count[EntityKind::Interior] == 1);
  }
  SUBCASE("4x1x1 bar") {
    const Mesh m1 = generate_mesh({4, 1, 1, {4, 1, 1}, 1});
    CHECK(m1.elements.size() == 4);
    CHECK(m1.n_dofs == 0);
    const Mesh m2 = generate_mesh({4, 1, 1, {4, 1, 1}, 2});
    CHECK(m2.n_dofs == oracle::free_dof_count(4, 1, 1, 2));
    CHECK(m2.n_dofs == 7);
  }
  SUBCASE("bad arguments") {
    CHECK_THROWS_AS(generate_mesh({0, 1, 1, {1, 1, 1}, 1}), Error);
    CHECK_THROWS_AS(generate_mesh({1, 1, 1, {1, -1, 1}, 1}), Error);
    CHECK_THROWS_AS(generate_mesh({1, 1, 1, {1, 1, 1}, 0}), Error);
    try {
      generate_mesh({1, 1, -2, {1, 1, 1}, 1});
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvalidArgument);
    }
  }
}

TEST_CASE("free DOF counts agree with entity enumeration") {
  for (int p = 1; p <= 4; ++p)
    for (auto [nx, ny, nz] : std::vector<std::array<int, 3>>{{1, 1, 1}, {2, 3, 1}, {3, 2, 4}, {4, 4, 4}, {5, 1, 2}}) {
      const Mesh m = generate_mesh({nx, ny, nz, {1.0 * nx, 0.5 * ny, 2.0 * nz}, p});
      CHECK(m.n_dofs == oracle::free_dof_count(nx, ny, nz, p));
    }
}

TEST_CASE("mesh invariants") {
  const Mesh m = generate_mesh({3, 2, 2, {1.5, 1, 1}, 3});
  std::vector<int> uses(m.n_dofs, 0);
  for (const Element& el : m.elements) {
    CHECK(el.dof_ids.size() == el.stiffness.rows());
    CHECK(el.load.size() == el.size());
    CHECK(std::set<DofId>(el.dof_ids.begin(), el.dof_ids.end()).size() == el.size());
    for (DofId d : el.dof_ids) {
      REQUIRE(d >= 0);
      REQUIRE(d < m.n_dofs);
      ++uses[d];
    }
  }
  for (int d = 0; d < m.n_dofs; ++d) {
    CHECK(uses[d] >= 1);
    if (m.dof_entity[d].kind == EntityKind::Interior) CHECK(uses[d] == 1);
    if (m.dof_entity[d].kind == EntityKind::Face) CHECK(uses[d] == 2);
  }
}

TEST_CASE("elements sharing a face agree on its DOF ids and mode order") {
  const Mesh m = generate_mesh({2, 2, 2, {1, 1, 1}, 4});
  // Neighbours across x: element 0 and 1.
  for (auto [a, b] : std::vector<std::pair<int, int>>{{0, 1}, {0, 2}, {0, 4}}) {
    const Element& ea = m.elements[a];
    const Element& eb = m.elements[b];
    std::vector<DofId> fa, fb;
    for (DofId d : ea.dof_ids)
      if (m.dof_entity[d].kind == EntityKind::Face) fa.push_back(d);
    for (DofId d : eb.dof_ids)
      if (m.dof_entity[d].kind == EntityKind::Face) fb.push_back(d);
    std::vector<DofId> shared;
    for (DofId d : fa)
      if (std::find(fb.begin(), fb.end(), d) != fb.end()) shared.push_back(d);
    CHECK(shared.size() == 9);  // (p-1)^2 modes of one face
    // Same relative order in both elements' local lists.
    std::vector<DofId> order_a, order_b;
    for (DofId d : ea.dof_ids)
      if (std::count(shared.begin(), shared.end(), d)) order_a.push_back(d);
    for (DofId d : eb.dof_ids)
      if (std::count(shared.begin(), shared.end(), d)) order_b.push_back(d);
    CHECK(order_a == order_b);
    // The mode indices match entry by entry.
    for (std::size_t k = 0; k < order_a.size(); ++k) {
      const auto ia = std::find(ea.dof_ids.begin(), ea.dof_ids.end(), order_a[k]) - ea.dof_ids.begin();
      const auto ib = std::find(eb.dof_ids.begin(), eb.dof_ids.end(), order_b[k]) - eb.dof_ids.begin();
      const auto la = ModeLayout::for_degree(4).modes[ea.local_modes[ia]];
      const auto lb = ModeLayout::for_degree(4).modes[eb.local_modes[ib]];
      int same = 0;
      for (int d = 0; d < 3; ++d) same += (la[d] >= 2 && la[d] == lb[d]) ? 1 : 0;
      CHECK(same == 2);
    }
  }
}

TEST_CASE("element_stiffness on the unit cube, p=1") {
  const auto em = element_stiffness(box_corners({0, 0, 0}, {1, 1, 1}), 1);
  const Matrix& k = em.stiffness;
  REQUIRE(k.rows() == 8);
  // Oracle for the diagonal: int |grad(x y z)|^2 over [0,1]^3 with composite
  // Simpson (exact for the quadratic-per-axis integrand).
  const int n = 4;
  double diag = 0.0;
  for (int i = 0; i <= 2 * n; ++i)
    for (int j = 0; j <= 2 * n; ++j)
      for (int l = 0; l <= 2 * n; ++l) {
        const double x = i / (2.0 * n), y = j / (2.0 * n), z = l / (2.0 * n);
        auto wt = [&](int t) { return (t == 0 || t == 2 * n) ? 1.0 : (t % 2 ? 4.0 : 2.0); };
        const double h = 1.0 / (2.0 * n);
        diag += wt(i) * wt(j) * wt(l) * (h / 3) * (h / 3) * (h / 3) * (y * y * z * z + x * x * z * z + x * x * y * y);
      }
  CHECK(diag == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  for (std::size_t r = 0; r < 8; ++r) {
    CHECK(k(r, r) == doctest::Approx(diag).epsilon(1e-13));
    double row = 0.0;
    for (std::size_t c = 0; c < 8; ++c) row += k(r, c);
    CHECK(std::abs(row) < 1e-14);
  }
}

TEST_CASE("element_stiffness matches the energy functional on affine hexahedra") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int trial = 0; trial < 4; ++trial) {
    const std::array<Point, 3> axes{Point{1.0 + u(rng), u(rng), u(rng)}, Point{u(rng), 0.8 + u(rng), u(rng)},
                                    Point{u(rng), u(rng), 1.3 + u(rng)}};
    const auto corners = parallelepiped({u(rng), u(rng), u(rng)}, axes);
    const int p = 2;
    const auto em = element_stiffness(corners, p);
    const std::size_t n = em.layout.size();
    for (int pair = 0; pair < 3; ++pair) {
      std::vector<double> a(n), b(n), sum(n), diff(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = u(rng) * 3;
        b[i] = u(rng) * 3;
        sum[i] = a[i] + b[i];
        diff[i] = a[i] - b[i];
      }
      // Polarisation: a^T K b = (E(a+b) - E(a-b)) / 2.
      const double expected = 0.5 * (oracle::energy(corners, p, sum, 6) - oracle::energy(corners, p, diff, 6));
      double got = 0.0;
      for (std::size_t r = 0; r < n; ++r) got += a[r] * dot(em.stiffness.row(r), b);
      CHECK(got == doctest::Approx(expected).epsilon(1e-6));
    }
  }
}

TEST_CASE("element matrices are symmetric, annihilate constants and are PSD") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.15, 0.15);
  for (int p = 1; p <= 3; ++p) {
    // Mildly distorted (non-affine) hexahedron.
    auto corners = box_corners({0, 0, 0}, {1, 0.7, 1.2});
    for (auto& c : corners)
      for (double& x : c) x += u(rng);
    const auto em = element_stiffness(corners, p);
    const Matrix& k = em.stiffness;
    CHECK(asymmetry(k) <= 1e-12 * k.max_abs());
    // Constant field = sum of the 8 vertex modes.
    for (std::size_t r = 0; r < k.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < k.cols(); ++c)
        if (em.layout.kind(c) == EntityKind::Vertex) s += k(r, c);
      CHECK(std::abs(s) <= 1e-10);
    }
    CHECK(symmetric_eigen_min(k) >= -1e-10 * k.max_abs());
  }
}

TEST_CASE("degenerate hexahedron is rejected") {
  auto corners = box_corners({0, 0, 0}, {1, 1, 1});
  std::swap(corners[0], corners[7]);
  try {
    element_stiffness(corners, 2);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateElement);
  }
  auto flat = box_corners({0, 0, 0}, {1, 1, 0});
  CHECK_THROWS_AS(element_stiffness(flat, 1), Error);
}

TEST_CASE("manufactured problems") {
  Mesh m = generate_mesh({2, 2, 2, {1, 1, 1}, 2});
  const ExactSolution poly = manufactured_problem(m, ManufacturedCase::Poly2);
  CHECK(poly.value({0.5, 0.5, 0.5}) == doctest::Approx(0.015625).epsilon(1e-15));
  const ExactSolution trig = manufactured_problem(m, ManufacturedCase::Trig);
  CHECK(trig.value({0.5, 0.5, 0.5}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(trig.source({0.5, 0.5, 0.5}) == doctest::Approx(3 * std::numbers::pi * std::numbers::pi).epsilon(1e-14));
  CHECK(trig.source({0.5, 0.5, 0.5}) == doctest::Approx(29.608813203268074).epsilon(1e-12));
  CHECK(parse_case("poly2") == ManufacturedCase::Poly2);
  try {
    parse_case("cubic");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidArgument);
  }
  // Loads are nonzero and the exact source is reproduced at the quadrature
  // level: sum of all loads approximates int f.
  double total = 0.0;
  for (const Element& el : m.elements)
    for (std::size_t k = 0; k < el.size(); ++k) total += std::abs(el.load[k]);
  CHECK(total > 0.0);
}

TEST_CASE("poly2 lies in the p=2 space and is reproduced exactly") {
  Mesh m = generate_mesh({2, 2, 2, {1, 1, 1}, 2});
  const ExactSolution exact = manufactured_problem(m, ManufacturedCase::Poly2);
  const Solution u = dense_reference_solve(m);
  CHECK(l2_error(m, u.values, exact) < 1e-12);
}

TEST_CASE("relabelling local DOF order leaves the global system unchanged") {
  Mesh m = generate_mesh({2, 2, 1, {1, 1, 1}, 2});
  manufactured_problem(m, ManufacturedCase::Trig);
  const auto [k0, d0] = assemble_global(m);
  std::mt19937_64 rng(3);
  for (Element& el : m.elements) {
    std::vector<std::size_t> perm(el.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Element p = el;
    for (std::size_t r = 0; r < el.size(); ++r) {
      p.dof_ids[r] = el.dof_ids[perm[r]];
      p.local_modes[r] = el.local_modes[perm[r]];
      p.load[r] = el.load[perm[r]];
      for (std::size_t c = 0; c < el.size(); ++c) p.stiffness(r, c) = el.stiffness(perm[r], perm[c]);
    }
    el = p;
  }
  const auto [k1, d1] = assemble_global(m);
  for (std::size_t r = 0; r < k0.rows(); ++r) {
    CHECK(d0[r] == doctest::Approx(d1[r]).epsilon(1e-14));
    for (std::size_t c = 0; c < k0.cols(); ++c) CHECK(k0(r, c) == doctest::Approx(k1(r, c)).epsilon(1e-14));
  }
}

TEST_CASE("error decreases with p on a fixed grid") {
  double previous = INFINITY;
  for (int p = 1; p <= 3; ++p) {
    Mesh m = generate_mesh({4, 4, 4, {1, 1, 1}, p});
    const ExactSolution exact = manufactured_problem(m, ManufacturedCase::Trig);
    const PartitionTree t = build_partition(m, 2.0);
    const double err = l2_error(m, solve_sequential(t, m).solution.values, exact);
    CHECK(err <= previous);
    previous = err;
  }
}

TEST_CASE("h-convergence of order at least 2 for p=2") {
  std::vector<double> errors;
  for (int n : {2, 4, 8}) {
    Mesh m = generate_mesh({n, n, n, {1, 1, 1}, 2});
    const ExactSolution exact = manufactured_problem(m, ManufacturedCase::Trig);
    const PartitionTree t = build_partition(m, 2.0);
    errors.push_back(l2_error(m, solve_sequential(t, m).solution.values, exact));
  }
  CHECK(errors[0] / errors[1] >= 4.0);
  CHECK(errors[1] / errors[2] >= 4.0);
}

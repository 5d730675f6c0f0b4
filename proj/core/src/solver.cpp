#include "dissect/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dissect/error.hpp"

namespace dissect {

namespace {

constexpr double kPivotTolerance = 1e-13;
constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

bool canonical_less(const SchurContribution* a, const SchurContribution* b) {
  if (a->source != b->source) return a->source < b->source;
  if (a->dofs != b->dofs) return a->dofs < b->dofs;
  const auto sa = a->S.data(), sb = b->S.data();
  if (!std::equal(sa.begin(), sa.end(), sb.begin(), sb.end()))
    return std::lexicographical_compare(sa.begin(), sa.end(), sb.begin(), sb.end());
  return a->g < b->g;
}

std::size_t local_index(const TreeNode& node, DofId dof) {
  const auto& e = node.eliminated_dofs;
  if (auto it = std::lower_bound(e.begin(), e.end(), dof); it != e.end() && *it == dof)
    return static_cast<std::size_t>(it - e.begin());
  const auto& b = node.interface_dofs;
  if (auto it = std::lower_bound(b.begin(), b.end(), dof); it != b.end() && *it == dof)
    return e.size() + static_cast<std::size_t>(it - b.begin());
  throw Error(ErrorKind::AssemblyScope,
              "DOF " + std::to_string(dof) + " is outside the scope of node " + std::to_string(node.id));
}

}  // namespace

SchurContribution element_block(const Element& element, NodeId leaf) {
  return SchurContribution{leaf, element.dof_ids, element.stiffness, element.load};
}

NodeSystem assemble(std::span<const SchurContribution> contributions, const TreeNode& node) {
  std::vector<const SchurContribution*> ptrs;
  ptrs.reserve(contributions.size());
  for (const auto& c : contributions) ptrs.push_back(&c);
  return assemble(std::span<const SchurContribution* const>(ptrs), node);
}

NodeSystem assemble(std::span<const SchurContribution* const> contributions, const TreeNode& node) {
  NodeSystem sys;
  sys.node = node.id;
  sys.n_eliminated = node.eliminated_dofs.size();
  sys.n_interface = node.interface_dofs.size();
  sys.dof_ids = node.eliminated_dofs;
  sys.dof_ids.insert(sys.dof_ids.end(), node.interface_dofs.begin(), node.interface_dofs.end());
  const std::size_t n = sys.dof_ids.size();
  sys.K = Matrix::square(n);
  sys.d.assign(n, 0.0);

  std::vector<const SchurContribution*> order(contributions.begin(), contributions.end());
  std::sort(order.begin(), order.end(), canonical_less);

  std::vector<std::size_t> map;
  for (const SchurContribution* c : order) {
    const std::size_t m = c->dofs.size();
    if (c->S.rows() != m || c->S.cols() != m || c->g.size() != m)
      throw Error(ErrorKind::AssemblyScope, "contribution from node " + std::to_string(c->source) +
                                                " has inconsistent dimensions");
    map.resize(m);
    for (std::size_t k = 0; k < m; ++k) map[k] = local_index(node, c->dofs[k]);
    for (std::size_t r = 0; r < m; ++r) {
      const auto src = c->S.row(r);
      auto dst = sys.K.row(map[r]);
      for (std::size_t col = 0; col < m; ++col) dst[map[col]] += src[col];
      sys.d[map[r]] += c->g[r];
    }
  }
  return sys;
}

Condensed condense(const NodeSystem& sys) {
  const std::size_t ni = sys.n_eliminated;
  const std::size_t nb = sys.n_interface;
  const Matrix& K = sys.K;

  Condensed out;
  EliminationRecord& rec = out.record;
  rec.node = sys.node;
  rec.eliminated.assign(sys.dof_ids.begin(), sys.dof_ids.begin() + static_cast<std::ptrdiff_t>(ni));
  rec.interface.assign(sys.dof_ids.begin() + static_cast<std::ptrdiff_t>(ni), sys.dof_ids.end());
  rec.rhs.assign(sys.d.begin(), sys.d.begin() + static_cast<std::ptrdiff_t>(ni));

  double max_diag = 0.0;
  for (std::size_t j = 0; j < ni; ++j) max_diag = std::max(max_diag, std::abs(K(j, j)));
  const double tol = kPivotTolerance * max_diag;

  // Left-looking Cholesky of K_ii, row by row.
  Matrix& L = rec.factor;
  L = Matrix::square(ni);
  for (std::size_t j = 0; j < ni; ++j) {
    auto lj = L.row(j);
    for (std::size_t k = 0; k < j; ++k) {
      const auto lk = L.row(k);
      lj[k] = (K(j, k) - dot(lj.first(k), lk.first(k))) / lk[k];
    }
    const double pivot = K(j, j) - dot(lj.first(j), lj.first(j));
    if (!(pivot > tol))
      throw Error(ErrorKind::SingularSystem, "non-positive pivot " + std::to_string(pivot) + " at DOF " +
                                                 std::to_string(sys.dof_ids[j]) + " in node " +
                                                 std::to_string(sys.node));
    lj[j] = std::sqrt(pivot);
  }

  rec.coupling = Matrix(ni, nb);
  for (std::size_t r = 0; r < ni; ++r)
    for (std::size_t c = 0; c < nb; ++c) rec.coupling(r, c) = K(r, ni + c);

  // Y^T = (L^{-1} K_ib)^T, one interface DOF per row.
  Matrix yt(nb, ni);
  for (std::size_t b = 0; b < nb; ++b) {
    auto y = yt.row(b);
    for (std::size_t j = 0; j < ni; ++j) {
      const auto lj = L.row(j);
      y[j] = (K(ni + b, j) - dot(lj.first(j), y.first(j))) / lj[j];
    }
  }
  std::vector<double> w(ni);
  for (std::size_t j = 0; j < ni; ++j) {
    const auto lj = L.row(j);
    w[j] = (sys.d[j] - dot(lj.first(j), std::span<const double>(w).first(j))) / lj[j];
  }

  SchurContribution& s = out.schur;
  s.source = sys.node;
  s.dofs = rec.interface;
  s.S = Matrix::square(nb);
  s.g.resize(nb);
  for (std::size_t a = 0; a < nb; ++a) {
    const auto ya = yt.row(a);
    for (std::size_t b = 0; b <= a; ++b) {
      const double v = K(ni + a, ni + b) - dot(ya, yt.row(b));
      s.S(a, b) = v;
      s.S(b, a) = v;
    }
    s.g[a] = sys.d[ni + a] - dot(ya, w);
  }
  return out;
}

std::vector<double> back_substitute(const EliminationRecord& rec, std::span<const double> ub) {
  const std::size_t ni = rec.eliminated.size();
  const std::size_t nb = rec.interface.size();
  if (ub.size() != nb)
    throw Error(ErrorKind::IncompleteSolution, "node " + std::to_string(rec.node) + " expects " +
                                                   std::to_string(nb) + " interface values, got " +
                                                   std::to_string(ub.size()));
  for (std::size_t k = 0; k < nb; ++k)
    if (std::isnan(ub[k]))
      throw Error(ErrorKind::IncompleteSolution, "missing value for interface DOF " +
                                                     std::to_string(rec.interface[k]) + " of node " +
                                                     std::to_string(rec.node));
  std::vector<double> y(ni);
  for (std::size_t j = 0; j < ni; ++j) y[j] = rec.rhs[j] - dot(rec.coupling.row(j), ub);
  for (std::size_t j = 0; j < ni; ++j) {
    const auto lj = rec.factor.row(j);
    y[j] = (y[j] - dot(lj.first(j), std::span<const double>(y).first(j))) / lj[j];
  }
  for (std::size_t j = ni; j-- > 0;) {
    const auto lj = rec.factor.row(j);
    y[j] /= lj[j];
    for (std::size_t k = 0; k < j; ++k) y[k] -= lj[k] * y[j];
  }
  return y;
}

std::vector<SchurContribution> node_inputs(const PartitionTree& tree, const Mesh& mesh, const FactorStore& store,
                                           NodeId id) {
  const TreeNode& node = tree.node(id);
  std::vector<SchurContribution> inputs;
  if (node.element) inputs.push_back(element_block(mesh.element(*node.element), id));
  for (NodeId c : node.children) inputs.push_back(store.at(static_cast<std::size_t>(c)).schur);
  return inputs;
}

SequentialResult solve_sequential(const PartitionTree& tree, const Mesh& mesh) {
  SequentialResult out;
  out.store.resize(tree.size());
  for (std::size_t i = tree.size(); i-- > 0;) {
    const auto id = static_cast<NodeId>(i);
    const auto inputs = node_inputs(tree, mesh, out.store, id);
    out.store[i] = condense(assemble(inputs, tree.node(id)));
  }
  out.solution = back_substitute_all(tree, out.store, mesh.n_dofs);
  return out;
}

Solution back_substitute_all(const PartitionTree& tree, const FactorStore& store, int n_dofs) {
  Solution sol;
  sol.values.assign(static_cast<std::size_t>(n_dofs), kMissing);
  std::vector<double> ub;
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const EliminationRecord& rec = store.at(i).record;
    ub.resize(rec.interface.size());
    for (std::size_t k = 0; k < ub.size(); ++k) ub[k] = sol.values[rec.interface[k]];
    const auto ui = back_substitute(rec, ub);
    for (std::size_t k = 0; k < ui.size(); ++k) sol.values[rec.eliminated[k]] = ui[k];
  }
  for (std::size_t d = 0; d < sol.values.size(); ++d)
    if (std::isnan(sol.values[d]))
      throw Error(ErrorKind::IncompleteSolution, "DOF " + std::to_string(d) + " was never eliminated");
  return sol;
}

std::pair<Matrix, std::vector<double>> assemble_global(const Mesh& mesh) {
  const auto n = static_cast<std::size_t>(mesh.n_dofs);
  Matrix K = Matrix::square(n);
  std::vector<double> d(n, 0.0);
  for (const Element& el : mesh.elements)
    for (std::size_t r = 0; r < el.size(); ++r) {
      for (std::size_t c = 0; c < el.size(); ++c) K(el.dof_ids[r], el.dof_ids[c]) += el.stiffness(r, c);
      d[el.dof_ids[r]] += el.load[r];
    }
  return {std::move(K), std::move(d)};
}

Solution dense_reference_solve(const Mesh& mesh) {
  auto [K, d] = assemble_global(mesh);
  const auto n = static_cast<Eigen::Index>(mesh.n_dofs);
  Solution sol;
  if (n == 0) return sol;
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> A(K.data().data(), n, n);
  Eigen::Map<const Eigen::VectorXd> b(d.data(), n);
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::SingularSystem, "global stiffness matrix is not positive definite");
  const Eigen::VectorXd x = llt.solve(b);
  sol.values.assign(x.data(), x.data() + n);
  return sol;
}

IncrementalResult incremental_resolve(const PartitionTree& tree, Mesh& mesh, FactorStore& store,
                                      std::span<const Modification> modifications) {
  if (store.size() != tree.size())
    throw Error(ErrorKind::Inconsistency, "record store does not match the tree");
  std::vector<char> dirty(tree.size(), 0);
  for (const Modification& m : modifications) {
    if (!mesh.find_element(m.element))
      throw Error(ErrorKind::InvalidArgument, "unknown element id " + std::to_string(m.element));
    if (!(m.factor > 0.0))
      throw Error(ErrorKind::InvalidArgument, "scale factor for element " + std::to_string(m.element) +
                                                  " must be positive");
    const auto leaf = tree.leaf_of(m.element);
    if (!leaf) throw Error(ErrorKind::Inconsistency, "element " + std::to_string(m.element) + " is not in the tree");
    for (NodeId v : tree.root_path(*leaf)) dirty[v] = 1;
  }
  for (const Modification& m : modifications) scale_element(mesh, m.element, m.factor);

  IncrementalResult out;
  for (std::size_t i = tree.size(); i-- > 0;) {
    if (!dirty[i]) continue;
    const auto id = static_cast<NodeId>(i);
    store[i] = condense(assemble(node_inputs(tree, mesh, store, id), tree.node(id)));
    out.recomputed.push_back(id);
  }
  std::reverse(out.recomputed.begin(), out.recomputed.end());
  out.recompute_count = static_cast<int>(out.recomputed.size());
  out.solution = back_substitute_all(tree, store, mesh.n_dofs);
  return out;
}

}  // namespace dissect

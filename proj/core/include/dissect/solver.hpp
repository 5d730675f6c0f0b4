#pragma once

#include <span>
#include <utility>
#include <vector>

#include "dissect/matrix.hpp"
#include "dissect/mesh.hpp"
#include "dissect/tree.hpp"

namespace dissect {

/// Local equation system K u = d of one tree node. Rows [0, n_eliminated)
/// are the node's eliminated DOFs, the rest its interface DOFs.
struct NodeSystem {
  NodeId node = 0;
  std::vector<DofId> dof_ids;
  Matrix K;
  std::vector<double> d;
  std::size_t n_eliminated = 0;
  std::size_t n_interface = 0;
};

/// Condensed system passed to the parent (or an element block at a leaf).
struct SchurContribution {
  NodeId source = 0;
  std::vector<DofId> dofs;
  Matrix S;
  std::vector<double> g;

  std::size_t byte_size() const { return 8 * (S.data().size() + g.size()) + 4 * dofs.size(); }
};

/// Everything needed to recover u_i = K_ii^{-1}(d_i - K_ib u_b) without
/// refactoring: Cholesky factor L of K_ii (lower, row-major), K_ib and d_i.
struct EliminationRecord {
  NodeId node = 0;
  std::vector<DofId> eliminated;
  std::vector<DofId> interface;
  Matrix factor;
  Matrix coupling;
  std::vector<double> rhs;

  std::size_t byte_size() const {
    return 8 * (factor.data().size() + coupling.data().size() + rhs.size()) +
           4 * (eliminated.size() + interface.size());
  }
};

struct Condensed {
  SchurContribution schur;
  EliminationRecord record;
};

/// Per-node condensation results of a solve, indexed by node id.
using FactorStore = std::vector<Condensed>;

/// Values of all n_dofs unknowns, indexed by DOF id.
struct Solution {
  std::vector<double> values;

  friend bool operator==(const Solution&, const Solution&) = default;
};

/// Element matrix as a contribution whose source is the given leaf node.
SchurContribution element_block(const Element& element, NodeId leaf);

/// Superposition of contributions into the node's local system. Inputs are
/// summed in canonical order (by source node id, then content), so any
/// permutation of `contributions` yields a bitwise identical system.
NodeSystem assemble(std::span<const SchurContribution> contributions, const TreeNode& node);
NodeSystem assemble(std::span<const SchurContribution* const> contributions, const TreeNode& node);

/// Static condensation of the eliminated block by Cholesky-based partial
/// elimination: S = K_bb - K_bi K_ii^{-1} K_ib, g = d_b - K_bi K_ii^{-1} d_i.
Condensed condense(const NodeSystem& system);

/// u_i = K_ii^{-1}(d_i - K_ib u_b); `interface_values` aligned with
/// record.interface. NaN marks a missing value.
std::vector<double> back_substitute(const EliminationRecord& record, std::span<const double> interface_values);

/// Contributions a node consumes: its element block (leaf) or the children's
/// condensed systems taken from `store`.
std::vector<SchurContribution> node_inputs(const PartitionTree& tree, const Mesh& mesh, const FactorStore& store,
                                           NodeId node);

struct SequentialResult {
  Solution solution;
  FactorStore store;
};

/// Bottom-up condensation followed by top-down back substitution.
SequentialResult solve_sequential(const PartitionTree& tree, const Mesh& mesh);

/// Top-down back substitution over all records of a finished condensation.
Solution back_substitute_all(const PartitionTree& tree, const FactorStore& store, int n_dofs);

/// Global system assembled by superposition of all element matrices.
std::pair<Matrix, std::vector<double>> assemble_global(const Mesh& mesh);

/// Dense symmetric factorization of the full system; reference oracle.
Solution dense_reference_solve(const Mesh& mesh);

struct Modification {
  ElementId element = 0;
  double factor = 1.0;
};

struct IncrementalResult {
  Solution solution;
  int recompute_count = 0;
  std::vector<NodeId> recomputed;  // ascending
};

/// Scales the modified elements in `mesh`, re-condenses exactly the union of
/// their root paths (reusing every other entry of `store`) and back
/// substitutes the whole tree. `mesh` and `store` are updated in place.
IncrementalResult incremental_resolve(const PartitionTree& tree, Mesh& mesh, FactorStore& store,
                                      std::span<const Modification> modifications);

}  // namespace dissect

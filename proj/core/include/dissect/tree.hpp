#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dissect/matrix.hpp"
#include "dissect/mesh.hpp"

namespace dissect {

struct Box {
  Point lo{0.0, 0.0, 0.0};
  Point hi{0.0, 0.0, 0.0};

  Point center() const { return {0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])}; }
  double extent(int axis) const { return hi[axis] - lo[axis]; }
};

struct TreeNode {
  NodeId id = 0;
  NodeId parent = -1;
  int depth = 0;
  Box bbox;
  std::vector<NodeId> children;         // 0, 2 or 8 entries before pruning
  std::optional<ElementId> element;     // leaves only
  std::vector<DofId> eliminated_dofs;   // ascending
  std::vector<DofId> interface_dofs;    // ascending
  double workload = 0.0;

  bool is_leaf() const { return children.empty(); }
};

/// Spatial partition hierarchy. Node ids are assigned breadth-first with
/// children in octant order, so every child id is larger than its parent id
/// and ids depend only on element positions.
struct PartitionTree {
  std::vector<TreeNode> nodes;
  NodeId root = 0;
  int depth = 0;
  int n_leaf_elements = 0;

  const TreeNode& node(NodeId id) const { return nodes.at(static_cast<std::size_t>(id)); }
  TreeNode& node(NodeId id) { return nodes.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return nodes.size(); }

  /// Leaf holding the given element, if any.
  std::optional<NodeId> leaf_of(ElementId element) const;
  /// Node ids on the path from `id` up to the root, `id` first.
  std::vector<NodeId> root_path(NodeId id) const;
  double total_workload() const;
  /// Sum of workloads over each node's subtree, indexed by node id.
  std::vector<double> subtree_workloads() const;
};

struct ElementBox {
  ElementId id = 0;
  Box box;
};

std::vector<ElementBox> element_boxes(const Mesh& mesh);

/// Recursive subdivision of the bounding box of all elements. A box whose
/// longest/shortest edge ratio exceeds `aspect_threshold` is halved along its
/// longest axis only; otherwise it is split into octants. Subdivision stops at
/// boxes holding at most one element centroid; empty children are dropped.
PartitionTree build_tree(std::span<const ElementBox> elements, double aspect_threshold);

/// Places every DOF at the lowest common ancestor of the leaves whose
/// elements reference it, fills interface sets and per-node workloads.
PartitionTree assign_dofs(PartitionTree tree, const Mesh& mesh);

/// Flop estimate for eliminating n_i unknowns from an (n_i + n_b) system.
double estimate_workload(std::size_t n_eliminated, std::size_t n_interface);

/// build_tree + assign_dofs.
PartitionTree build_partition(const Mesh& mesh, double aspect_threshold);

struct TraderPart {
  int id = 0;
  NodeId top = 0;               // part root (smallest depth node of the part)
  std::vector<NodeId> nodes;    // ascending
  double workload = 0.0;
  int trader = 0;
};

struct TraderAssignment {
  int n_traders = 1;
  std::vector<TraderPart> parts;
  std::vector<int> owner;           // node id -> trader
  std::vector<double> trader_load;  // trader -> summed workload
};

/// Cuts the tree into parts no heavier than total/(k*alpha) where possible,
/// keeps the cut upper nodes as one connected fragment and deals parts to
/// traders longest-processing-time first.
TraderAssignment partition_tasks(const PartitionTree& tree, int k_traders, double alpha = 2.0);

}  // namespace dissect

#pragma once

#include <cstdint>
#include <vector>

#include "dissect/tree.hpp"

namespace dissect {

/// Eliminated/interface DOF counts of a node in a synthetic tree.
struct NodeSize {
  std::size_t eliminated = 0;
  std::size_t interface = 0;
};

/// Complete tree with `branching` children per inner node and all leaves at
/// `depth`. `by_height[h]` sizes the nodes h levels above the leaves; the
/// last entry is reused for greater heights and the root's interface is
/// always empty. DOF ids are placeholders that keep the disjoint-union and
/// interface-subset properties; leaves carry element ids 0..N-1.
PartitionTree synthetic_tree(int branching, int depth, const std::vector<NodeSize>& by_height);

/// Leaf-heavy size profile: leaves eliminate 294 and pass up 678 DOFs;
/// inner nodes eliminate 90 * 2.83^(h-1) DOFs at height h with twice as many
/// interface DOFs, so separator sizes grow like those of a 3D octree.
std::vector<NodeSize> octree_size_profile(int depth);

/// Random tree of at most `max_nodes` nodes with 2- or 8-way branching and
/// random node sizes; deterministic for a given seed.
PartitionTree random_tree(std::uint64_t seed, int max_nodes);

}  // namespace dissect

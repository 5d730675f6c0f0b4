#include "dissect/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>

#include "dissect/error.hpp"

namespace dissect {

namespace {

void size_node(PartitionTree& tree, NodeId id, NodeSize size, DofId& next_dof) {
  TreeNode& n = tree.node(id);
  n.eliminated_dofs.resize(size.eliminated);
  for (auto& d : n.eliminated_dofs) d = next_dof++;
  if (n.parent < 0) return;
  // Interface ids come from the ancestors' eliminated sets, nearest first.
  for (NodeId a = n.parent; a >= 0 && n.interface_dofs.size() < size.interface; a = tree.node(a).parent) {
    const auto& src = tree.node(a).eliminated_dofs;
    const std::size_t take = std::min(src.size(), size.interface - n.interface_dofs.size());
    n.interface_dofs.insert(n.interface_dofs.end(), src.begin(), src.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(n.interface_dofs.begin(), n.interface_dofs.end());
}

void finish(PartitionTree& tree) {
  tree.root = 0;
  tree.depth = 0;
  tree.n_leaf_elements = 0;
  for (TreeNode& n : tree.nodes) {
    tree.depth = std::max(tree.depth, n.depth);
    if (n.is_leaf()) n.element = tree.n_leaf_elements++;
    n.workload = estimate_workload(n.eliminated_dofs.size(), n.interface_dofs.size());
  }
}

TreeNode& add_node(PartitionTree& tree, NodeId parent) {
  TreeNode n;
  n.id = static_cast<NodeId>(tree.nodes.size());
  n.parent = parent;
  n.depth = parent < 0 ? 0 : tree.node(parent).depth + 1;
  tree.nodes.push_back(std::move(n));
  if (parent >= 0) tree.node(parent).children.push_back(tree.nodes.back().id);
  return tree.nodes.back();
}

}  // namespace

PartitionTree synthetic_tree(int branching, int depth, const std::vector<NodeSize>& by_height) {
  if (branching < 2 || depth < 0 || by_height.empty())
    throw Error(ErrorKind::InvalidArgument, "synthetic tree needs branching >= 2, depth >= 0 and a size profile");
  PartitionTree tree;
  add_node(tree, -1);
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    if (tree.nodes[i].depth == depth) continue;
    for (int c = 0; c < branching; ++c) add_node(tree, static_cast<NodeId>(i));
  }
  DofId next = 0;
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto h = static_cast<std::size_t>(depth - tree.nodes[i].depth);
    NodeSize size = by_height[std::min(h, by_height.size() - 1)];
    if (i == 0) size.interface = 0;
    size_node(tree, static_cast<NodeId>(i), size, next);
  }
  finish(tree);
  return tree;
}

std::vector<NodeSize> octree_size_profile(int depth) {
  std::vector<NodeSize> out{{294, 678}};
  for (int h = 1; h <= depth; ++h) {
    const auto ni = static_cast<std::size_t>(std::lround(90.0 * std::pow(2.83, h - 1)));
    out.push_back({ni, 2 * ni});
  }
  return out;
}

PartitionTree random_tree(std::uint64_t seed, int max_nodes) {
  if (max_nodes < 1) throw Error(ErrorKind::InvalidArgument, "random tree needs at least one node");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> leaf_elim(1, 24), inner_elim(1, 32), iface(1, 48);
  PartitionTree tree;
  add_node(tree, -1);
  std::deque<NodeId> open{0};
  while (!open.empty()) {
    const NodeId id = open.front();
    open.pop_front();
    const int fanout = coin(rng) < 0.5 ? 2 : 8;
    const bool split = coin(rng) < (id == 0 ? 1.0 : 0.55);
    if (!split || static_cast<int>(tree.nodes.size()) + fanout > max_nodes) continue;
    for (int c = 0; c < fanout; ++c) open.push_back(add_node(tree, id).id);
  }
  DofId next = 0;
  for (TreeNode& n : tree.nodes) {
    NodeSize size{n.is_leaf() ? leaf_elim(rng) : inner_elim(rng), n.parent < 0 ? 0 : iface(rng)};
    size_node(tree, n.id, size, next);
  }
  finish(tree);
  return tree;
}

}  // namespace dissect

#include "dissect/tree.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <numeric>
#include <string>

#include "dissect/error.hpp"

namespace dissect {

namespace {

constexpr int kMaxDepth = 256;

Point centroid(const Box& b) { return b.center(); }

struct PendingBox {
  Box box;
  std::vector<std::size_t> members;
  NodeId parent;
  int depth;
};

NodeId lowest_common_ancestor(const PartitionTree& tree, NodeId a, NodeId b) {
  while (tree.node(a).depth > tree.node(b).depth) a = tree.node(a).parent;
  while (tree.node(b).depth > tree.node(a).depth) b = tree.node(b).parent;
  while (a != b) {
    a = tree.node(a).parent;
    b = tree.node(b).parent;
  }
  return a;
}

}  // namespace

std::optional<NodeId> PartitionTree::leaf_of(ElementId element) const {
  for (const TreeNode& n : nodes)
    if (n.element && *n.element == element) return n.id;
  return std::nullopt;
}

std::vector<NodeId> PartitionTree::root_path(NodeId id) const {
  std::vector<NodeId> path;
  for (NodeId v = id; v >= 0; v = node(v).parent) path.push_back(v);
  return path;
}

double PartitionTree::total_workload() const {
  double sum = 0.0;
  for (const TreeNode& n : nodes) sum += n.workload;
  return sum;
}

std::vector<double> PartitionTree::subtree_workloads() const {
  std::vector<double> sub(nodes.size(), 0.0);
  for (std::size_t i = nodes.size(); i-- > 0;) {
    sub[i] += nodes[i].workload;
    if (nodes[i].parent >= 0) sub[nodes[i].parent] += sub[i];
  }
  return sub;
}

std::vector<ElementBox> element_boxes(const Mesh& mesh) {
  std::vector<ElementBox> out;
  out.reserve(mesh.elements.size());
  for (const Element& el : mesh.elements) {
    Box b{el.corners[0], el.corners[0]};
    for (const Point& c : el.corners)
      for (int d = 0; d < 3; ++d) {
        b.lo[d] = std::min(b.lo[d], c[d]);
        b.hi[d] = std::max(b.hi[d], c[d]);
      }
    out.push_back({el.id, b});
  }
  return out;
}

PartitionTree build_tree(std::span<const ElementBox> elements, double aspect_threshold) {
  if (elements.empty()) throw Error(ErrorKind::InvalidArgument, "cannot build a tree without elements");
  if (!(aspect_threshold >= 1.0))
    throw Error(ErrorKind::InvalidArgument, "aspect threshold must be >= 1");

  std::vector<Point> centers(elements.size());
  Box domain = elements.front().box;
  for (std::size_t i = 0; i < elements.size(); ++i) {
    centers[i] = centroid(elements[i].box);
    for (int d = 0; d < 3; ++d) {
      domain.lo[d] = std::min(domain.lo[d], elements[i].box.lo[d]);
      domain.hi[d] = std::max(domain.hi[d], elements[i].box.hi[d]);
    }
  }
  {
    std::vector<std::size_t> order(elements.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return centers[a] < centers[b]; });
    for (std::size_t i = 1; i < order.size(); ++i)
      if (centers[order[i]] == centers[order[i - 1]])
        throw Error(ErrorKind::NonSeparable, "elements " + std::to_string(elements[order[i - 1]].id) + " and " +
                                                 std::to_string(elements[order[i]].id) + " share a centroid");
  }

  PartitionTree tree;
  std::deque<PendingBox> queue;
  {
    PendingBox root{domain, std::vector<std::size_t>(elements.size()), -1, 0};
    std::iota(root.members.begin(), root.members.end(), 0);
    queue.push_back(std::move(root));
  }

  while (!queue.empty()) {
    PendingBox item = std::move(queue.front());
    queue.pop_front();

    TreeNode node;
    node.id = static_cast<NodeId>(tree.nodes.size());
    node.parent = item.parent;
    node.depth = item.depth;
    node.bbox = item.box;
    if (item.parent >= 0) tree.node(item.parent).children.push_back(node.id);
    tree.depth = std::max(tree.depth, item.depth);

    if (item.members.size() <= 1) {
      if (!item.members.empty()) {
        node.element = elements[item.members.front()].id;
        ++tree.n_leaf_elements;
      }
      tree.nodes.push_back(std::move(node));
      continue;
    }
    if (item.depth >= kMaxDepth)
      throw Error(ErrorKind::NonSeparable, "element centroids could not be separated");

    const Box& box = item.box;
    const Point mid = box.center();
    double longest = 0.0;
    double shortest = std::numeric_limits<double>::infinity();
    int axis = 0;
    for (int d = 0; d < 3; ++d) {
      if (box.extent(d) > longest) {
        longest = box.extent(d);
        axis = d;
      }
      shortest = std::min(shortest, box.extent(d));
    }

    std::vector<PendingBox> children;
    if (longest > aspect_threshold * shortest) {
      children.resize(2);
      for (int half = 0; half < 2; ++half) {
        Box b = box;
        (half == 0 ? b.hi : b.lo)[axis] = mid[axis];
        children[half].box = b;
      }
      for (std::size_t m : item.members) children[centers[m][axis] >= mid[axis] ? 1 : 0].members.push_back(m);
    } else {
      children.resize(8);
      for (int oct = 0; oct < 8; ++oct) {
        Box b = box;
        for (int d = 0; d < 3; ++d) ((oct >> d) & 1 ? b.lo : b.hi)[d] = mid[d];
        children[oct].box = b;
      }
      for (std::size_t m : item.members) {
        int oct = 0;
        for (int d = 0; d < 3; ++d) oct |= (centers[m][d] >= mid[d] ? 1 : 0) << d;
        children[oct].members.push_back(m);
      }
    }
    tree.nodes.push_back(std::move(node));
    for (PendingBox& c : children) {
      if (c.members.empty()) continue;
      c.parent = tree.nodes.back().id;
      c.depth = item.depth + 1;
      queue.push_back(std::move(c));
    }
  }
  return tree;
}

double estimate_workload(std::size_t n_eliminated, std::size_t n_interface) {
  const double ni = static_cast<double>(n_eliminated);
  const double nb = static_cast<double>(n_interface);
  return ni * ni * ni / 3.0 + ni * ni * nb + ni * nb * nb;
}

PartitionTree assign_dofs(PartitionTree tree, const Mesh& mesh) {
  std::vector<NodeId> lca(static_cast<std::size_t>(mesh.n_dofs), -1);
  std::size_t tree_elements = 0;
  for (const TreeNode& n : tree.nodes) {
    if (!n.element) continue;
    ++tree_elements;
    if (!mesh.find_element(*n.element))
      throw Error(ErrorKind::Inconsistency,
                  "tree element " + std::to_string(*n.element) + " is missing from the mesh");
    for (DofId dof : mesh.element(*n.element).dof_ids) {
      if (dof < 0 || dof >= mesh.n_dofs)
        throw Error(ErrorKind::Inconsistency, "DOF id " + std::to_string(dof) + " out of range");
      NodeId& at = lca[dof];
      at = at < 0 ? n.id : lowest_common_ancestor(tree, at, n.id);
    }
  }
  if (tree_elements != mesh.elements.size())
    throw Error(ErrorKind::Inconsistency, "mesh has elements that are not placed in the tree");

  for (TreeNode& n : tree.nodes) {
    n.eliminated_dofs.clear();
    n.interface_dofs.clear();
  }
  for (DofId dof = 0; dof < mesh.n_dofs; ++dof) {
    if (lca[dof] < 0)
      throw Error(ErrorKind::Inconsistency, "DOF " + std::to_string(dof) + " is not referenced by any element");
    tree.node(lca[dof]).eliminated_dofs.push_back(dof);
  }

  // Children always carry larger ids, so a reverse sweep is bottom-up.
  for (std::size_t i = tree.nodes.size(); i-- > 0;) {
    TreeNode& n = tree.nodes[i];
    std::vector<DofId> seen;
    if (n.element) seen = mesh.element(*n.element).dof_ids;
    for (NodeId c : n.children) {
      const auto& ci = tree.node(c).interface_dofs;
      seen.insert(seen.end(), ci.begin(), ci.end());
    }
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    std::set_difference(seen.begin(), seen.end(), n.eliminated_dofs.begin(), n.eliminated_dofs.end(),
                        std::back_inserter(n.interface_dofs));
    n.workload = estimate_workload(n.eliminated_dofs.size(), n.interface_dofs.size());
  }
  return tree;
}

PartitionTree build_partition(const Mesh& mesh, double aspect_threshold) {
  const auto boxes = element_boxes(mesh);
  return assign_dofs(build_tree(boxes, aspect_threshold), mesh);
}

TraderAssignment partition_tasks(const PartitionTree& tree, int k_traders, double alpha) {
  if (k_traders < 1) throw Error(ErrorKind::InvalidArgument, "need at least one trader");
  if (!(alpha >= 1.0)) throw Error(ErrorKind::InvalidArgument, "alpha must be >= 1");

  const std::vector<double> sub = tree.subtree_workloads();
  const double limit = sub[tree.root] / (static_cast<double>(k_traders) * alpha);

  std::vector<TraderPart> parts;
  std::vector<NodeId> fragment;
  std::vector<NodeId> stack{tree.root};
  while (!stack.empty()) {
    const NodeId v = stack.back();
    stack.pop_back();
    const TreeNode& n = tree.node(v);
    if (sub[v] > limit && !n.is_leaf()) {
      fragment.push_back(v);
      for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) stack.push_back(*it);
      continue;
    }
    TraderPart part;
    part.top = v;
    part.workload = sub[v];
    std::vector<NodeId> walk{v};
    while (!walk.empty()) {
      const NodeId w = walk.back();
      walk.pop_back();
      part.nodes.push_back(w);
      for (NodeId c : tree.node(w).children) walk.push_back(c);
    }
    parts.push_back(std::move(part));
  }
  if (!fragment.empty()) {
    TraderPart upper;
    upper.top = tree.root;
    upper.nodes = fragment;
    for (NodeId v : fragment) upper.workload += tree.node(v).workload;
    parts.push_back(std::move(upper));
  }
  for (TraderPart& p : parts) std::sort(p.nodes.begin(), p.nodes.end());
  std::sort(parts.begin(), parts.end(), [](const TraderPart& a, const TraderPart& b) { return a.top < b.top; });
  for (std::size_t i = 0; i < parts.size(); ++i) parts[i].id = static_cast<int>(i);

  TraderAssignment out;
  out.n_traders = k_traders;
  out.owner.assign(tree.size(), -1);
  out.trader_load.assign(static_cast<std::size_t>(k_traders), 0.0);

  std::vector<std::size_t> order(parts.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (parts[a].workload != parts[b].workload) return parts[a].workload > parts[b].workload;
    return parts[a].top < parts[b].top;
  });
  for (std::size_t idx : order) {
    const auto least = std::min_element(out.trader_load.begin(), out.trader_load.end());
    const int trader = static_cast<int>(least - out.trader_load.begin());
    parts[idx].trader = trader;
    *least += parts[idx].workload;
    for (NodeId v : parts[idx].nodes) out.owner[v] = trader;
  }
  out.parts = std::move(parts);
  return out;
}

}  // namespace dissect

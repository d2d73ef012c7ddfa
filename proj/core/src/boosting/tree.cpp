#include "crashcast/boosting/tree.hpp"

#include <cmath>
#include <string>

#include "crashcast/error.hpp"

namespace crashcast::boosting {

namespace {

void malformed(const std::string& what) { throw Error(ErrorCode::kMalformedDocument, "tree: " + what); }

}  // namespace

DecisionTree::DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) malformed("no nodes");
  const int n = static_cast<int>(nodes_.size());
  std::vector<int> parents(nodes_.size(), 0);
  for (const auto& node : nodes_) {
    if (!std::isfinite(node.leaf_value) || !std::isfinite(node.cover)) malformed("non-finite value");
    if (node.is_leaf()) continue;
    if (node.left <= 0 || node.right <= 0 || node.left >= n || node.right >= n || node.left == node.right) {
      malformed("bad child index");
    }
    ++parents[static_cast<std::size_t>(node.left)];
    ++parents[static_cast<std::size_t>(node.right)];
  }
  for (std::size_t i = 1; i < parents.size(); ++i) {
    if (parents[i] != 1) malformed("node " + std::to_string(i) + " is not reached exactly once");
  }
  // Children always follow their parent, so a reverse sweep sees them first.
  expected_.assign(nodes_.size(), 0.0);
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    const auto& node = nodes_[i];
    if (node.is_leaf()) {
      expected_[i] = node.leaf_value;
      continue;
    }
    const auto l = static_cast<std::size_t>(node.left), r = static_cast<std::size_t>(node.right);
    if (l <= i || r <= i) malformed("child precedes parent");
    const double cl = nodes_[l].cover, cr = nodes_[r].cover;
    expected_[i] = cl + cr > 0.0 ? (cl * expected_[l] + cr * expected_[r]) / (cl + cr)
                                 : 0.5 * (expected_[l] + expected_[r]);
  }
}

std::size_t DecisionTree::leaf_index(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& node = nodes_[i];
    const double v = x[static_cast<std::size_t>(node.feature)];
    i = static_cast<std::size_t>(std::isnan(v) || v <= node.threshold ? node.left : node.right);
  }
  return i;
}

std::size_t DecisionTree::leaf_count() const noexcept {
  std::size_t n = 0;
  for (const auto& node : nodes_) n += node.is_leaf() ? 1 : 0;
  return n;
}

int DecisionTree::depth() const noexcept {
  std::vector<int> d(nodes_.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes_[i].is_leaf()) continue;
    d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
    d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
  }
  return best;
}

nlohmann::json to_json(const DecisionTree& tree) {
  auto nodes = nlohmann::json::array();
  for (const auto& n : tree.nodes()) {
    nodes.push_back({{"feature", n.feature},
                     {"threshold", n.threshold},
                     {"left", n.left},
                     {"right", n.right},
                     {"leaf_value", n.leaf_value},
                     {"cover", n.cover}});
  }
  return nodes;
}

DecisionTree tree_from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) malformed("expected an array of nodes");
  std::vector<TreeNode> nodes;
  nodes.reserve(doc.size());
  try {
    for (const auto& n : doc) {
      nodes.push_back(TreeNode{n.at("feature").get<int>(), n.at("threshold").get<double>(), n.at("left").get<int>(),
                               n.at("right").get<int>(), n.at("leaf_value").get<double>(), n.at("cover").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    malformed(e.what());
  }
  return DecisionTree(std::move(nodes));
}

}  // namespace crashcast::boosting

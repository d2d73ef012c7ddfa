#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace crashcast::boosting {

// A leaf has feature -1. Internal nodes send x to `left` when x[feature] is
// missing or x[feature] <= threshold. `leaf_value` of an internal node is the
// value it would carry as a leaf; `cover` is the hessian sum it saw in training.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double leaf_value = 0.0;
  double cover = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  // Throws kMalformedDocument when the structure is not a binary tree rooted
  // at node 0 or a leaf value is not finite.
  explicit DecisionTree(std::vector<TreeNode> nodes);

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  std::size_t leaf_index(std::span<const double> x) const;
  double predict(std::span<const double> x) const { return nodes_[leaf_index(x)].leaf_value; }

  std::size_t leaf_count() const noexcept;
  int depth() const noexcept;  // a lone leaf has depth 0

  // Cover-weighted mean of the leaf values below each node.
  const std::vector<double>& expected_values() const noexcept { return expected_; }

  friend bool operator==(const DecisionTree& a, const DecisionTree& b) { return a.nodes_ == b.nodes_; }

 private:
  std::vector<TreeNode> nodes_{TreeNode{}};
  std::vector<double> expected_{0.0};
};

nlohmann::json to_json(const DecisionTree& tree);
DecisionTree tree_from_json(const nlohmann::json& doc);

}  // namespace crashcast::boosting

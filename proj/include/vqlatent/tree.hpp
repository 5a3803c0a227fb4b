#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vqlatent/vqmodel.hpp"

namespace vql {

using FeatureRows = std::vector<std::vector<double>>;

struct TreeNode {
  // Internal nodes: samples with x[dim] <= threshold go left.
  int dim = -1;
  double threshold = 0.0;
  int left = -1, right = -1;
  // Leaves.
  std::array<std::size_t, 2> counts{};
  int label = 0;

  bool is_leaf() const { return dim < 0; }
  bool operator==(const TreeNode&) const = default;
};

/// Binary CART classifier over labels {0, 1}. Node 0 is the root.
struct DecisionTree {
  std::size_t max_depth = 6;
  std::size_t min_leaf = 5;
  std::vector<TreeNode> nodes;

  int predict(const std::vector<double>& x) const;
  std::size_t leaf_of(const std::vector<double>& x) const;
  std::size_t depth() const;
  bool operator==(const DecisionTree&) const = default;
};

/// Gini CART. Candidate thresholds are midpoints of consecutive distinct
/// values; a split must leave `min_leaf` samples per side and strictly lower
/// the impurity. Ties resolve to the lowest dim, then the lowest threshold.
/// Leaves take the majority label, 0 on a tie.
DecisionTree fit_tree(const FeatureRows& x, const std::vector<int>& labels, std::size_t max_depth = 6,
                      std::size_t min_leaf = 5);

struct TreeMetrics {
  double accuracy = 0.0;   // separability
  double precision = 0.0;  // density
  double recall = 0.0;
  double f1 = 0.0;
};

TreeMetrics tree_metrics(const DecisionTree& tree, const FeatureRows& x, const std::vector<int>& labels,
                         int positive = 1);

struct PathStep {
  std::size_t dim = 0;
  double threshold = 0.0;
  bool le = true;  // x[dim] <= threshold, otherwise x[dim] > threshold

  bool satisfied_by(const std::vector<double>& x) const { return le ? x[dim] <= threshold : x[dim] > threshold; }
  bool operator==(const PathStep&) const = default;
};

using TreePath = std::vector<PathStep>;

/// Root-to-leaf path of the purest leaf labelled `target`, larger target
/// count breaking purity ties, then depth-first order.
TreePath extract_path(const DecisionTree& tree, int target);

/// "dim 27 <= -0.493", one constraint per line.
std::string format_path(const TreePath& path);

nlohmann::json to_json(const DecisionTree& tree);
DecisionTree tree_from_json(const nlohmann::json& j);

/// Per-dimension edit margin: 0.05 of the feature range, at least 1e-3.
std::vector<double> edit_margins(const FeatureRows& x);

/// Mean of the pre-quantization encoder rows.
std::vector<double> pooled_latent(const VqModel& model, const std::vector<std::string>& words);

struct GuidedMove {
  std::vector<std::vector<std::string>> decoded;  // original, then one per edit
  std::vector<std::size_t> edited_dims;
  std::vector<double> pooled;  // edited pooled vector
};

/// Walks the constraints of `path`; each one the current pooled vector
/// violates sets that dim to threshold -/+ margin (kept inside the interval
/// the whole path allows), broadcasts the accumulated pooled delta onto every
/// encoder row, re-quantizes and decodes.
GuidedMove guided_move(const VqModel& model, const std::vector<std::string>& words, const TreePath& path,
                       const std::vector<double>& margins);

/// Fraction of sentences whose extracted feature equals `target`.
double cross_region_consistency(
    const std::vector<std::vector<std::string>>& sentences,
    const std::function<std::optional<std::string>(const std::vector<std::string>&)>& extractor,
    const std::string& target);

}  // namespace vql

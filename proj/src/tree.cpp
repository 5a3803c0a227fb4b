#include "vqlatent/tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "vqlatent/errors.hpp"

namespace vql {

namespace {

using i128 = __int128;

// Gini split quality up to constants: (a_l^2 + b_l^2) / n_l + (a_r^2 + b_r^2) / n_r,
// higher is better. Held as an exact fraction.
struct Score {
  i128 num = 0, den = 1;
};

bool better(const Score& a, const Score& b) {
  return a.num * b.den > b.num * a.den;
}

Score split_score(std::size_t al, std::size_t bl, std::size_t ar, std::size_t br) {
  const i128 nl = al + bl, nr = ar + br;
  const i128 ql = static_cast<i128>(al) * al + static_cast<i128>(bl) * bl;
  const i128 qr = static_cast<i128>(ar) * ar + static_cast<i128>(br) * br;
  return {ql * nr + qr * nl, nl * nr};
}

class Builder {
 public:
  Builder(const FeatureRows& x, const std::vector<int>& y, DecisionTree& tree) : x_(x), y_(y), tree_(tree) {}

  int build(std::vector<std::size_t> idx, std::size_t depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::array<std::size_t, 2> counts{};
    for (std::size_t i : idx) ++counts[static_cast<std::size_t>(y_[i])];
    const std::size_t n = idx.size();

    bool found = false;
    std::size_t best_dim = 0;
    double best_thr = 0.0;
    if (counts[0] > 0 && counts[1] > 0 && depth < tree_.max_depth && n >= 2 * tree_.min_leaf) {
      // The unsplit node scores (a^2 + b^2) / n.
      Score best{static_cast<i128>(counts[0]) * counts[0] + static_cast<i128>(counts[1]) * counts[1],
                 static_cast<i128>(n)};
      std::vector<std::pair<double, int>> col(n);
      for (std::size_t d = 0; d < x_[idx[0]].size(); ++d) {
        for (std::size_t k = 0; k < n; ++k) col[k] = {x_[idx[k]][d], y_[idx[k]]};
        std::sort(col.begin(), col.end());
        std::array<std::size_t, 2> left{};
        for (std::size_t k = 0; k + 1 < n; ++k) {
          ++left[static_cast<std::size_t>(col[k].second)];
          if (col[k].first == col[k + 1].first) continue;
          const std::size_t nl = k + 1;
          if (nl < tree_.min_leaf || n - nl < tree_.min_leaf) continue;
          const Score s = split_score(left[0], left[1], counts[0] - left[0], counts[1] - left[1]);
          if (better(s, best)) {
            best = s;
            best_dim = d;
            best_thr = col[k].first + (col[k + 1].first - col[k].first) / 2.0;
            found = true;
          }
        }
      }
    }
    if (!found) {
      TreeNode& leaf = tree_.nodes[static_cast<std::size_t>(id)];
      leaf.counts = counts;
      leaf.label = counts[1] > counts[0] ? 1 : 0;
      return id;
    }
    std::vector<std::size_t> l, r;
    for (std::size_t i : idx) (x_[i][best_dim] <= best_thr ? l : r).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    const int left = build(std::move(l), depth + 1);
    const int right = build(std::move(r), depth + 1);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.dim = static_cast<int>(best_dim);
    node.threshold = best_thr;
    node.left = left;
    node.right = right;
    return id;
  }

 private:
  const FeatureRows& x_;
  const std::vector<int>& y_;
  DecisionTree& tree_;
};

}  // namespace

std::size_t DecisionTree::leaf_of(const std::vector<double>& x) const {
  if (nodes.empty()) throw ContractError("tree: empty tree");
  std::size_t n = 0;
  while (!nodes[n].is_leaf()) {
    const auto d = static_cast<std::size_t>(nodes[n].dim);
    if (d >= x.size()) throw ShapeError("tree: sample has " + std::to_string(x.size()) + " dims");
    n = static_cast<std::size_t>(x[d] <= nodes[n].threshold ? nodes[n].left : nodes[n].right);
  }
  return n;
}

int DecisionTree::predict(const std::vector<double>& x) const {
  return nodes[leaf_of(x)].label;
}

std::size_t DecisionTree::depth() const {
  std::function<std::size_t(std::size_t)> rec = [&](std::size_t n) -> std::size_t {
    if (nodes[n].is_leaf()) return 0;
    return 1 + std::max(rec(static_cast<std::size_t>(nodes[n].left)), rec(static_cast<std::size_t>(nodes[n].right)));
  };
  return nodes.empty() ? 0 : rec(0);
}

DecisionTree fit_tree(const FeatureRows& x, const std::vector<int>& labels, std::size_t max_depth,
                      std::size_t min_leaf) {
  if (x.size() != labels.size()) throw ContractError("fit_tree: sample and label counts differ");
  if (min_leaf == 0) throw ContractError("fit_tree: min_leaf must be positive");
  if (x.size() < 2 * min_leaf) throw ContractError("fit_tree: need at least 2 * min_leaf samples");
  bool has0 = false, has1 = false;
  for (int l : labels) {
    if (l != 0 && l != 1) throw ContractError("fit_tree: labels must be 0 or 1");
    has0 = has0 || l == 0;
    has1 = has1 || l == 1;
  }
  if (!has0 || !has1) throw ContractError("fit_tree: both classes must be present");
  for (const auto& row : x) {
    if (row.size() != x[0].size() || row.empty()) throw ShapeError("fit_tree: ragged or empty feature rows");
    for (double v : row)
      if (!std::isfinite(v)) throw NumericError("fit_tree: non-finite feature");
  }
  DecisionTree tree;
  tree.max_depth = max_depth;
  tree.min_leaf = min_leaf;
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  Builder(x, labels, tree).build(std::move(idx), 0);
  return tree;
}

TreeMetrics tree_metrics(const DecisionTree& tree, const FeatureRows& x, const std::vector<int>& labels,
                         int positive) {
  if (x.size() != labels.size()) throw ContractError("tree_metrics: sample and label counts differ");
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const int p = tree.predict(x[i]);
    correct += p == labels[i];
    if (p == positive && labels[i] == positive) ++tp;
    if (p == positive && labels[i] != positive) ++fp;
    if (p != positive && labels[i] == positive) ++fn;
  }
  TreeMetrics m;
  if (!x.empty()) m.accuracy = static_cast<double>(correct) / static_cast<double>(x.size());
  if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

TreePath extract_path(const DecisionTree& tree, int target) {
  if (target != 0 && target != 1) throw ContractError("extract_path: target must be 0 or 1");
  const auto t = static_cast<std::size_t>(target);
  TreePath best_path;
  const TreeNode* best = nullptr;
  TreePath current;
  std::function<void(std::size_t)> walk = [&](std::size_t n) {
    const TreeNode& node = tree.nodes[n];
    if (node.is_leaf()) {
      if (node.label != target) return;
      if (best) {
        const i128 tot = node.counts[0] + node.counts[1];
        const i128 best_tot = best->counts[0] + best->counts[1];
        // purity node.counts[t] / tot against best->counts[t] / best_tot
        const i128 lhs = static_cast<i128>(node.counts[t]) * best_tot;
        const i128 rhs = static_cast<i128>(best->counts[t]) * tot;
        if (lhs < rhs || (lhs == rhs && node.counts[t] <= best->counts[t])) return;
      }
      best = &node;
      best_path = current;
      return;
    }
    current.push_back({static_cast<std::size_t>(node.dim), node.threshold, true});
    walk(static_cast<std::size_t>(node.left));
    current.back().le = false;
    walk(static_cast<std::size_t>(node.right));
    current.pop_back();
  };
  if (tree.nodes.empty()) throw ContractError("extract_path: empty tree");
  walk(0);
  if (!best) throw ContractError("extract_path: no leaf predicts class " + std::to_string(target));
  return best_path;
}

std::string format_path(const TreePath& path) {
  std::string out;
  char buf[96];
  for (const auto& s : path) {
    std::snprintf(buf, sizeof buf, "dim %zu %s %.3f\n", s.dim, s.le ? "<=" : ">", s.threshold);
    out += buf;
  }
  return out;
}

namespace {

nlohmann::json node_json(const DecisionTree& tree, std::size_t n) {
  const TreeNode& node = tree.nodes[n];
  if (node.is_leaf()) return {{"counts", node.counts}, {"label", node.label}};
  return {{"dim", node.dim},
          {"threshold", node.threshold},
          {"left", node_json(tree, static_cast<std::size_t>(node.left))},
          {"right", node_json(tree, static_cast<std::size_t>(node.right))}};
}

int node_from_json(const nlohmann::json& j, DecisionTree& tree) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (j.contains("counts")) {
    TreeNode& leaf = tree.nodes.back();
    leaf.counts = j.at("counts").get<std::array<std::size_t, 2>>();
    leaf.label = j.at("label").get<int>();
    return id;
  }
  const int dim = j.at("dim").get<int>();
  const double thr = j.at("threshold").get<double>();
  if (dim < 0) throw InputError("tree: negative split dim");
  const int left = node_from_json(j.at("left"), tree);
  const int right = node_from_json(j.at("right"), tree);
  TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
  node.dim = dim;
  node.threshold = thr;
  node.left = left;
  node.right = right;
  return id;
}

}  // namespace

nlohmann::json to_json(const DecisionTree& tree) {
  if (tree.nodes.empty()) throw ContractError("tree: cannot serialize an empty tree");
  return {{"max_depth", tree.max_depth}, {"min_leaf", tree.min_leaf}, {"root", node_json(tree, 0)}};
}

DecisionTree tree_from_json(const nlohmann::json& j) {
  try {
    DecisionTree tree;
    tree.max_depth = j.at("max_depth").get<std::size_t>();
    tree.min_leaf = j.at("min_leaf").get<std::size_t>();
    node_from_json(j.at("root"), tree);
    return tree;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("tree: malformed JSON: ") + e.what());
  }
}

std::vector<double> edit_margins(const FeatureRows& x) {
  if (x.empty()) throw ContractError("edit_margins: no samples");
  std::vector<double> lo(x[0]), hi(x[0]);
  for (const auto& row : x)
    for (std::size_t d = 0; d < row.size(); ++d) {
      lo[d] = std::min(lo[d], row[d]);
      hi[d] = std::max(hi[d], row[d]);
    }
  std::vector<double> m(lo.size());
  for (std::size_t d = 0; d < m.size(); ++d) m[d] = std::max(0.05 * (hi[d] - lo[d]), 1e-3);
  return m;
}

std::vector<double> pooled_latent(const VqModel& model, const std::vector<std::string>& words) {
  const SentenceLatents s = encode_sentence(model, words);
  const std::size_t L = s.encoded.dim(0), I = s.encoded.dim(1);
  std::vector<double> p(I, 0.0);
  for (std::size_t r = 0; r < L; ++r)
    for (std::size_t d = 0; d < I; ++d) p[d] += s.encoded.data()[r * I + d];
  for (double& v : p) v /= static_cast<double>(L);
  return p;
}

GuidedMove guided_move(const VqModel& model, const std::vector<std::string>& words, const TreePath& path,
                       const std::vector<double>& margins) {
  const SentenceLatents s = encode_sentence(model, words);
  const std::size_t L = s.encoded.dim(0), I = s.encoded.dim(1);
  if (margins.size() != I) throw ShapeError("guided_move: margins must have one entry per latent dim");
  for (const auto& step : path)
    if (step.dim >= I) throw ShapeError("guided_move: path dim out of range");

  std::vector<double> pooled(I, 0.0);
  for (std::size_t r = 0; r < L; ++r)
    for (std::size_t d = 0; d < I; ++d) pooled[d] += s.encoded.data()[r * I + d];
  for (double& v : pooled) v /= static_cast<double>(L);
  const std::vector<double> original = pooled;

  // Feasible interval (lo, hi] per dim implied by the whole path.
  std::vector<double> lo(I, -std::numeric_limits<double>::infinity()), hi(I, std::numeric_limits<double>::infinity());
  for (const auto& step : path) {
    if (step.le) {
      hi[step.dim] = std::min(hi[step.dim], step.threshold);
    } else {
      lo[step.dim] = std::max(lo[step.dim], step.threshold);
    }
  }

  GuidedMove out;
  out.decoded.push_back(decode_latents(model, s.quantized));
  for (const auto& step : path) {
    if (step.satisfied_by(pooled)) continue;
    const std::size_t d = step.dim;
    double v = step.le ? step.threshold - margins[d] : step.threshold + margins[d];
    if (!(v > lo[d] && v <= hi[d])) {
      if (std::isfinite(lo[d]) && std::isfinite(hi[d])) {
        v = lo[d] + (hi[d] - lo[d]) / 2.0;
      } else if (std::isfinite(lo[d])) {
        v = lo[d] + margins[d];
      } else {
        v = hi[d] - margins[d];
      }
    }
    pooled[d] = v;
    out.edited_dims.push_back(d);

    std::vector<float> rows(s.encoded.data().begin(), s.encoded.data().end());
    for (std::size_t r = 0; r < L; ++r)
      for (std::size_t k = 0; k < I; ++k) rows[r * I + k] += static_cast<float>(pooled[k] - original[k]);
    const Tensor<float> moved({L, I}, std::move(rows));
    out.decoded.push_back(decode_indices(model, assign_codes(model, moved)));
  }
  out.pooled = pooled;
  return out;
}

double cross_region_consistency(
    const std::vector<std::vector<std::string>>& sentences,
    const std::function<std::optional<std::string>(const std::vector<std::string>&)>& extractor,
    const std::string& target) {
  if (sentences.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : sentences) {
    const auto f = extractor(s);
    hits += f && *f == target;
  }
  return static_cast<double>(hits) / static_cast<double>(sentences.size());
}

}  // namespace vql

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "vqlatent/tree.hpp"

namespace vqtest {

namespace detail {

struct Frac {
  __int128 num = 0, den = 1;
};

// Weighted Gini impurity of a partition, up to the constant 1: minus
// sum over sides of (sum_c count_c^2) / n_side, as an exact fraction.
inline Frac neg_quality(const std::vector<int>& labels, const std::vector<std::size_t>& left,
                        const std::vector<std::size_t>& right) {
  auto q = [&](const std::vector<std::size_t>& side) {
    __int128 c[2] = {0, 0};
    for (std::size_t i : side) ++c[labels[i]];
    return c[0] * c[0] + c[1] * c[1];
  };
  const __int128 nl = static_cast<__int128>(left.size()), nr = static_cast<__int128>(right.size());
  return {-(q(left) * nr + q(right) * nl), nl * nr};
}

inline bool less(const Frac& a, const Frac& b) {
  return a.num * b.den < b.num * a.den;
}

inline int oracle_build(const vql::FeatureRows& x, const std::vector<int>& y, const std::vector<std::size_t>& idx,
                        std::size_t depth, vql::DecisionTree& tree) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  std::array<std::size_t, 2> counts{};
  for (std::size_t i : idx) ++counts[static_cast<std::size_t>(y[i])];

  bool found = false;
  std::size_t best_dim = 0;
  double best_thr = 0;
  std::vector<std::size_t> best_l, best_r;
  if (depth < tree.max_depth && counts[0] > 0 && counts[1] > 0) {
    // The unsplit node; a split has to beat it strictly.
    Frac best;
    best.den = static_cast<__int128>(idx.size());
    best.num = -(static_cast<__int128>(counts[0]) * counts[0] + static_cast<__int128>(counts[1]) * counts[1]);
    for (std::size_t d = 0; d < x[idx[0]].size(); ++d) {
      std::vector<double> values;
      for (std::size_t i : idx) values.push_back(x[i][d]);
      std::sort(values.begin(), values.end());
      values.erase(std::unique(values.begin(), values.end()), values.end());
      for (std::size_t k = 0; k + 1 < values.size(); ++k) {
        const double thr = values[k] + (values[k + 1] - values[k]) / 2.0;
        std::vector<std::size_t> l, r;
        for (std::size_t i : idx) (x[i][d] <= thr ? l : r).push_back(i);
        if (l.size() < tree.min_leaf || r.size() < tree.min_leaf) continue;
        const Frac s = neg_quality(y, l, r);
        if (less(s, best)) {
          best = s;
          best_dim = d;
          best_thr = thr;
          best_l = l;
          best_r = r;
          found = true;
        }
      }
    }
  }
  if (!found) {
    tree.nodes[static_cast<std::size_t>(id)].counts = counts;
    tree.nodes[static_cast<std::size_t>(id)].label = counts[1] > counts[0] ? 1 : 0;
    return id;
  }
  const int left = oracle_build(x, y, best_l, depth + 1, tree);
  const int right = oracle_build(x, y, best_r, depth + 1, tree);
  auto& node = tree.nodes[static_cast<std::size_t>(id)];
  node.dim = static_cast<int>(best_dim);
  node.threshold = best_thr;
  node.left = left;
  node.right = right;
  return id;
}

}  // namespace detail

/// Exhaustive CART: at every node each dim and every midpoint between
/// consecutive distinct values is tried by partitioning the samples directly.
inline vql::DecisionTree brute_force_tree(const vql::FeatureRows& x, const std::vector<int>& y, std::size_t max_depth,
                                          std::size_t min_leaf) {
  vql::DecisionTree tree;
  tree.max_depth = max_depth;
  tree.min_leaf = min_leaf;
  std::vector<std::size_t> idx(x.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  detail::oracle_build(x, y, idx, 0, tree);
  return tree;
}

struct TreeInstance {
  vql::FeatureRows x;
  std::vector<int> y;
};

/// `n` points in `dim` dims labelled by a noisy rule over two coordinates.
/// Every other instance uses a coarse integer grid so equal values and tied
/// splits are frequent.
inline TreeInstance random_tree_instance(std::size_t n, std::size_t dim, std::mt19937_64& rng, bool grid) {
  TreeInstance t;
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_int_distribution<int> cell(-3, 3);
  std::bernoulli_distribution flip(0.1);
  const std::size_t a = std::uniform_int_distribution<std::size_t>(0, dim - 1)(rng);
  const std::size_t b = std::uniform_int_distribution<std::size_t>(0, dim - 1)(rng);
  bool has[2] = {false, false};
  while (!has[0] || !has[1]) {
    t.x.clear();
    t.y.clear();
    has[0] = has[1] = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row(dim);
      for (auto& v : row) v = grid ? cell(rng) : u(rng);
      int label = (row[a] > 0) != (row[b] > 0.3) ? 1 : 0;
      if (flip(rng)) label = 1 - label;
      has[label] = true;
      t.x.push_back(std::move(row));
      t.y.push_back(label);
    }
  }
  return t;
}

struct CartOracleResult {
  std::size_t cases = 0;
  std::size_t mismatches = 0;
};

inline CartOracleResult run_cart_oracle(std::size_t cases, std::uint64_t seed, std::size_t n = 200,
                                        std::size_t dim = 8, std::size_t depth = 3) {
  std::mt19937_64 rng(seed);
  CartOracleResult r;
  for (std::size_t c = 0; c < cases; ++c) {
    const auto inst = random_tree_instance(n, dim, rng, c % 2 == 1);
    const std::size_t min_leaf = c % 3 == 0 ? 1 : 5;
    const auto fitted = vql::fit_tree(inst.x, inst.y, depth, min_leaf);
    const auto oracle = brute_force_tree(inst.x, inst.y, depth, min_leaf);
    ++r.cases;
    if (!(fitted == oracle)) ++r.mismatches;
  }
  return r;
}

/// Two regions on either side of a random hyperplane with a margin, split
/// into train and held-out halves; returns held-out accuracy.
inline double separable_accuracy(std::uint64_t seed, std::size_t n = 400, std::size_t dim = 16) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 1);
  std::vector<double> w(dim);
  double norm = 0;
  for (auto& v : w) v = g(rng), norm += v * v;
  for (auto& v : w) v /= std::sqrt(norm);
  vql::FeatureRows x;
  std::vector<int> y;
  while (x.size() < 2 * n) {
    std::vector<double> row(dim);
    for (auto& v : row) v = g(rng);
    double proj = 0;
    for (std::size_t d = 0; d < dim; ++d) proj += row[d] * w[d];
    if (std::abs(proj) < 0.5) continue;  // margin
    // Push each region away from the hyperplane along w.
    for (std::size_t d = 0; d < dim; ++d) row[d] += (proj > 0 ? 2.0 : -2.0) * w[d];
    x.push_back(std::move(row));
    y.push_back(proj > 0 ? 1 : 0);
  }
  const vql::FeatureRows train_x(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
  const vql::FeatureRows test_x(x.begin() + static_cast<std::ptrdiff_t>(n), x.end());
  const std::vector<int> train_y(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
  const std::vector<int> test_y(y.begin() + static_cast<std::ptrdiff_t>(n), y.end());
  const auto tree = vql::fit_tree(train_x, train_y, 6, 5);
  return vql::tree_metrics(tree, test_x, test_y).accuracy;
}

}  // namespace vqtest

#pragma once

#include <cstddef>
#include <vector>

namespace vql {

/// One embedding per token.
using EmbeddingBag = std::vector<std::vector<double>>;

struct AlignmentResult {
  std::size_t rows = 0, cols = 0;
  std::vector<double> plan;  // [rows x cols], row sums 1/rows, column sums 1/cols
  double cost = 0.0;
};

/// Exact optimal transport between uniform distributions over `rows` and
/// `cols` points with ground cost `cost` [rows x cols]. Solved as a min-cost
/// flow over integer masses scaled by lcm(rows, cols).
AlignmentResult optimal_transport(const std::vector<double>& cost, std::size_t rows, std::size_t cols);

/// Word Mover's Distance with Euclidean ground cost.
AlignmentResult wmd(const EmbeddingBag& a, const EmbeddingBag& b);

}  // namespace vql

#include "vqlatent/transport.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "vqlatent/errors.hpp"

namespace vql {

namespace {

struct Edge {
  std::size_t to;
  long cap;
  double cost;
};

class FlowGraph {
 public:
  explicit FlowGraph(std::size_t n) : adj_(n) {}

  std::size_t add_edge(std::size_t from, std::size_t to, long cap, double cost) {
    adj_[from].push_back(edges_.size());
    edges_.push_back({to, cap, cost});
    adj_[to].push_back(edges_.size());
    edges_.push_back({from, 0, -cost});
    return edges_.size() - 2;
  }

  // Successive shortest augmenting paths found by Bellman-Ford.
  void min_cost_flow(std::size_t s, std::size_t t, long amount) {
    const std::size_t n = adj_.size();
    constexpr double kTol = 1e-12;
    while (amount > 0) {
      std::vector<double> dist(n, std::numeric_limits<double>::infinity());
      std::vector<std::size_t> via(n, edges_.size());
      dist[s] = 0.0;
      for (std::size_t round = 0; round < n; ++round) {
        bool changed = false;
        for (std::size_t u = 0; u < n; ++u) {
          if (!std::isfinite(dist[u])) continue;
          for (std::size_t e : adj_[u]) {
            const Edge& ed = edges_[e];
            if (ed.cap > 0 && dist[u] + ed.cost < dist[ed.to] - kTol) {
              dist[ed.to] = dist[u] + ed.cost;
              via[ed.to] = e;
              changed = true;
            }
          }
        }
        if (!changed) break;
      }
      if (!std::isfinite(dist[t])) throw ContractError("transport: infeasible flow");
      long push = amount;
      for (std::size_t v = t; v != s; v = edges_[via[v] ^ 1].to) push = std::min(push, edges_[via[v]].cap);
      for (std::size_t v = t; v != s; v = edges_[via[v] ^ 1].to) {
        edges_[via[v]].cap -= push;
        edges_[via[v] ^ 1].cap += push;
      }
      amount -= push;
    }
  }

  long flow_on(std::size_t edge) const { return edges_[edge ^ 1].cap; }

 private:
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<Edge> edges_;
};

}  // namespace

AlignmentResult optimal_transport(const std::vector<double>& cost, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw ContractError("transport: empty sequence");
  if (cost.size() != rows * cols) throw ShapeError("transport: cost matrix size does not match rows x cols");
  const long total = static_cast<long>(std::lcm(rows, cols));
  const long supply = total / static_cast<long>(rows);
  const long demand = total / static_cast<long>(cols);
  const std::size_t source = 0, sink = rows + cols + 1;
  FlowGraph g(rows + cols + 2);
  for (std::size_t i = 0; i < rows; ++i) g.add_edge(source, 1 + i, supply, 0.0);
  for (std::size_t j = 0; j < cols; ++j) g.add_edge(1 + rows + j, sink, demand, 0.0);
  std::vector<std::size_t> pair_edge(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) pair_edge[i * cols + j] = g.add_edge(1 + i, 1 + rows + j, total, cost[i * cols + j]);
  g.min_cost_flow(source, sink, total);

  AlignmentResult r;
  r.rows = rows;
  r.cols = cols;
  r.plan.resize(rows * cols);
  double acc = 0.0;
  for (std::size_t k = 0; k < rows * cols; ++k) {
    const long f = g.flow_on(pair_edge[k]);
    r.plan[k] = static_cast<double>(f) / static_cast<double>(total);
    acc += static_cast<double>(f) * cost[k];
  }
  r.cost = acc / static_cast<double>(total);
  return r;
}

AlignmentResult wmd(const EmbeddingBag& a, const EmbeddingBag& b) {
  if (a.empty() || b.empty()) throw ContractError("wmd: empty sequence");
  std::vector<double> cost(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (a[i].size() != b[j].size()) throw ShapeError("wmd: embedding widths differ");
      double s = 0.0;
      for (std::size_t d = 0; d < a[i].size(); ++d) {
        const double diff = a[i][d] - b[j][d];
        s += diff * diff;
      }
      cost[i * b.size() + j] = std::sqrt(s);
    }
  }
  return optimal_transport(cost, a.size(), b.size());
}

}  // namespace vql

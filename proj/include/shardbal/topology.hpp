#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "shardbal/error.hpp"

namespace shardbal {

using ShardIndex = std::size_t;
using Edge = std::pair<ShardIndex, ShardIndex>;

// Undirected, connected overlay network between shards. Immutable once built.
class TopologyGraph {
 public:
  // Cycle 0-1-...-(n-1)-0. Needs at least three nodes so that every shard has
  // two distinct neighbours.
  static TopologyGraph ring(std::size_t n) {
    if (n < 3)
      throw InvalidTopology("ring needs at least 3 shards, got " + std::to_string(n));
    std::vector<Edge> edges;
    edges.reserve(n);
    for (std::size_t i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
    return TopologyGraph(n, std::move(edges));
  }

  // Arbitrary connected graph. Duplicate edges (in either orientation) are
  // dropped; self-loops, out-of-range indices and disconnected graphs throw.
  static TopologyGraph from_edges(std::size_t n, const std::vector<Edge>& edges) {
    return TopologyGraph(n, edges);
  }

  std::size_t node_count() const noexcept { return neighbors_.size(); }

  // Normalised (min, max) pairs in ascending order.
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  // Ascending neighbour list of node i.
  const std::vector<ShardIndex>& neighbors(ShardIndex i) const { return neighbors_.at(i); }

  std::size_t degree(ShardIndex i) const { return neighbors_.at(i).size(); }

  bool adjacent(ShardIndex i, ShardIndex j) const {
    const auto& nb = neighbors_.at(i);
    return std::binary_search(nb.begin(), nb.end(), j);
  }

  friend bool operator==(const TopologyGraph& a, const TopologyGraph& b) {
    return a.edges_ == b.edges_ && a.neighbors_.size() == b.neighbors_.size();
  }

 private:
  TopologyGraph(std::size_t n, std::vector<Edge> edges) : neighbors_(n) {
    if (n == 0) throw InvalidTopology("topology needs at least one node");
    for (auto& [a, b] : edges) {
      if (a >= n || b >= n)
        throw InvalidTopology("edge (" + std::to_string(a) + "," + std::to_string(b) +
                              ") out of range for " + std::to_string(n) + " nodes");
      if (a == b) throw InvalidTopology("self-loop on node " + std::to_string(a));
      if (a > b) std::swap(a, b);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    edges_ = std::move(edges);
    for (const auto& [a, b] : edges_) {
      neighbors_[a].push_back(b);
      neighbors_[b].push_back(a);
    }
    for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
    if (!connected()) throw InvalidTopology("topology is not connected");
  }

  bool connected() const {
    std::vector<bool> seen(neighbors_.size(), false);
    std::vector<ShardIndex> stack{0};
    seen[0] = true;
    std::size_t reached = 1;
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (auto v : neighbors_[u])
        if (!seen[v]) {
          seen[v] = true;
          ++reached;
          stack.push_back(v);
        }
    }
    return reached == neighbors_.size();
  }

  std::vector<Edge> edges_;
  std::vector<std::vector<ShardIndex>> neighbors_;
};

enum class WeightMode {
  exact,         // 1 / (1 + max(d_i, d_j))
  table_compat,  // off-diagonals rounded to 2 decimals (1/3 -> 0.33) first
};

// Dense symmetric, row-stochastic consensus weights.
class WeightMatrix {
 public:
  WeightMatrix(std::size_t n, WeightMode mode) : n_(n), mode_(mode), w_(n * n, 0.0) {}

  std::size_t size() const noexcept { return n_; }
  WeightMode mode() const noexcept { return mode_; }

  double operator()(std::size_t i, std::size_t j) const { return w_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return w_[i * n_ + j]; }

  friend bool operator==(const WeightMatrix&, const WeightMatrix&) = default;

 private:
  std::size_t n_;
  WeightMode mode_;
  std::vector<double> w_;
};

// Metropolis-Hastings weights: neighbours get 1/(1+max(d_i,d_j)), the
// diagonal absorbs whatever is needed for the row to sum to one.
inline WeightMatrix metropolis_weights(const TopologyGraph& g,
                                       WeightMode mode = WeightMode::exact) {
  const auto n = g.node_count();
  WeightMatrix w(n, mode);
  for (ShardIndex i = 0; i < n; ++i) {
    for (auto j : g.neighbors(i)) {
      double v = 1.0 / (1.0 + static_cast<double>(std::max(g.degree(i), g.degree(j))));
      if (mode == WeightMode::table_compat) v = std::round(v * 100.0) / 100.0;
      w(i, j) = v;
    }
  }
  for (ShardIndex i = 0; i < n; ++i) {
    double off = 0.0;
    for (auto j : g.neighbors(i)) off += w(i, j);
    w(i, i) = 1.0 - off;
  }
  return w;
}

// Hop distances from `source` to every node.
inline std::vector<std::size_t> bfs_distances(const TopologyGraph& g, ShardIndex source) {
  constexpr auto kUnreached = static_cast<std::size_t>(-1);
  std::vector<std::size_t> dist(g.node_count(), kUnreached);
  std::queue<ShardIndex> q;
  dist.at(source) = 0;
  q.push(source);
  while (!q.empty()) {
    const auto u = q.front();
    q.pop();
    for (auto v : g.neighbors(u))
      if (dist[v] == kUnreached) {
        dist[v] = dist[u] + 1;
        q.push(v);
      }
  }
  return dist;
}

inline std::size_t diameter(const TopologyGraph& g) {
  std::size_t best = 0;
  for (ShardIndex s = 0; s < g.node_count(); ++s) {
    const auto d = bfs_distances(g, s);
    best = std::max(best, *std::max_element(d.begin(), d.end()));
  }
  return best;
}

}  // namespace shardbal

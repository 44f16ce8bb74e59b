#pragma once

#include <algorithm>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "shardbal/error.hpp"
#include "shardbal/format.hpp"
#include "shardbal/topology.hpp"

namespace shardbal {

// Loads of every shard at iteration `iteration` plus each shard's transfer
// vector: delta(i, j) is the cumulative load shard i has to push to
// neighbour j (negative: receive). Zero for non-neighbours.
struct DiffusionState {
  std::size_t iteration = 0;
  std::vector<double> loads;
  std::vector<double> deltas;  // row-major n x n

  DiffusionState() = default;
  explicit DiffusionState(std::vector<double> initial)
      : loads(std::move(initial)), deltas(loads.size() * loads.size(), 0.0) {}

  std::size_t size() const noexcept { return loads.size(); }
  double delta(std::size_t i, std::size_t j) const { return deltas[i * loads.size() + j]; }
  double& delta(std::size_t i, std::size_t j) { return deltas[i * loads.size() + j]; }
};

inline double spread(std::span<const double> loads) {
  if (loads.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(loads.begin(), loads.end());
  return *hi - *lo;
}

// One synchronous round: every shard reads the iteration-t loads only.
//   delta_i[j] += w_ij (L_i - L_j)            for j in N(i)
//   L_i        -= sum_j w_ij (L_i - L_j)
inline DiffusionState diffusion_step(const DiffusionState& state, const WeightMatrix& w,
                                     const TopologyGraph& g) {
  const auto n = state.size();
  if (w.size() != n || g.node_count() != n || state.deltas.size() != n * n)
    throw DataError("diffusion dimensions disagree: " + std::to_string(n) + " loads, " +
                    std::to_string(w.size()) + "x" + std::to_string(w.size()) +
                    " weights, " + std::to_string(g.node_count()) + " nodes");
  DiffusionState next = state;
  for (ShardIndex i = 0; i < n; ++i) {
    double outflow = 0.0;
    for (auto j : g.neighbors(i)) {
      const double flow = w(i, j) * (state.loads[i] - state.loads[j]);
      next.delta(i, j) += flow;
      outflow += flow;
    }
    next.loads[i] = state.loads[i] - outflow;
  }
  next.iteration = state.iteration + 1;
  return next;
}

struct DiffusionOptions {
  double tolerance = 1.0;              // stop once max - min <= tolerance
  std::size_t max_iterations = 10000;
  bool record_loads = false;           // keep every iteration's loads for tracing
};

struct DiffusionResult {
  DiffusionState final_state;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> spread_history;              // entry t = spread at iteration t
  std::vector<std::vector<double>> load_history;   // only with record_loads
};

inline DiffusionResult run_diffusion(std::span<const double> initial_loads,
                                     const WeightMatrix& w, const TopologyGraph& g,
                                     const DiffusionOptions& opt = {}) {
  if (!(opt.tolerance > 0.0)) throw DataError("diffusion tolerance must be positive");
  if (opt.max_iterations < 1) throw DataError("diffusion max_iterations must be at least 1");

  DiffusionResult r;
  DiffusionState state(std::vector<double>(initial_loads.begin(), initial_loads.end()));
  auto record = [&](const DiffusionState& s) {
    r.spread_history.push_back(spread(s.loads));
    if (opt.record_loads) r.load_history.push_back(s.loads);
  };

  record(state);
  while (r.spread_history.back() > opt.tolerance && state.iteration < opt.max_iterations) {
    state = diffusion_step(state, w, g);
    record(state);
  }
  r.converged = r.spread_history.back() <= opt.tolerance;
  r.iterations = state.iteration;
  r.final_state = std::move(state);
  return r;
}

inline DiffusionResult run_diffusion(std::span<const double> initial_loads,
                                     const WeightMatrix& w, const TopologyGraph& g,
                                     double tolerance, std::size_t max_iterations) {
  return run_diffusion(initial_loads, w, g, DiffusionOptions{tolerance, max_iterations, false});
}

// Trace CSV: iter,load_0,...,load_{n-1},spread. Needs record_loads.
inline void write_diffusion_trace(std::ostream& out, const DiffusionResult& r) {
  if (r.load_history.size() != r.spread_history.size())
    throw DataError("diffusion trace requested but loads were not recorded");
  const auto n = r.final_state.size();
  out << "iter";
  for (std::size_t i = 0; i < n; ++i) out << ",load_" << i;
  out << ",spread\n";
  for (std::size_t t = 0; t < r.load_history.size(); ++t) {
    out << t;
    for (double v : r.load_history[t]) out << ',' << format_real(v);
    out << ',' << format_real(r.spread_history[t]) << '\n';
  }
}

}  // namespace shardbal

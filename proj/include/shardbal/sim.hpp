#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "shardbal/diffusion.hpp"
#include "shardbal/error.hpp"
#include "shardbal/fixed_point.hpp"
#include "shardbal/migration.hpp"
#include "shardbal/schedulers.hpp"
#include "shardbal/topology.hpp"
#include "shardbal/workload.hpp"

namespace shardbal {

enum class Algorithm { diffusion, lpt, multifit, none };
enum class EpochMode { replay, time_partition };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::diffusion: return "diffusion";
    case Algorithm::lpt: return "lpt";
    case Algorithm::multifit: return "multifit";
    case Algorithm::none: return "none";
  }
  return "?";
}

inline std::string_view to_string(EpochMode m) {
  return m == EpochMode::replay ? "replay" : "time-partition";
}

struct TopologySpec {
  enum class Kind { automatic, ring, edges };
  Kind kind = Kind::automatic;  // ring when n >= 3, otherwise a path
  std::vector<Edge> edges;

  TopologyGraph build(std::size_t n) const {
    switch (kind) {
      case Kind::ring: return TopologyGraph::ring(n);
      case Kind::edges: return TopologyGraph::from_edges(n, edges);
      case Kind::automatic: break;
    }
    if (n >= 3) return TopologyGraph::ring(n);
    return TopologyGraph::from_edges(n, n == 2 ? std::vector<Edge>{{0, 1}} : std::vector<Edge>{});
  }
};

struct SimConfig {
  std::size_t shards = 10;
  TopologySpec topology;
  Algorithm algorithm = Algorithm::diffusion;
  double tolerance = 1.0;
  std::size_t max_iterations = 10000;
  WeightMode weights = WeightMode::exact;
  std::size_t multifit_rounds = 7;
  PackingRule packing = PackingRule::first_fit_decreasing;
  std::optional<std::size_t> migration_max_rounds;  // default 4 x diameter
  std::optional<Units> outlier_threshold;           // in scaled units; none = keep all
  std::uint64_t seed = 1;
  EpochMode mode = EpochMode::replay;
  std::size_t epochs = 2;
  DecimalScale scale;
};

inline void validate(const SimConfig& cfg) {
  if (cfg.shards < 1) throw DataError("shards must be at least 1");
  if (!(cfg.tolerance > 0.0)) throw DataError("diffusion tolerance must be positive");
  if (cfg.max_iterations < 1) throw DataError("diffusion max_iterations must be at least 1");
  if (cfg.multifit_rounds < 1) throw DataError("multifit rounds must be at least 1");
  if (cfg.epochs < 1) throw DataError("epoch count must be at least 1");
  validate(cfg.scale);
}

struct ShardStats {
  Units load = 0;
  std::size_t accounts = 0;
  std::size_t transactions = 0;

  friend bool operator==(const ShardStats&, const ShardStats&) = default;
};

struct DiffusionTelemetry {
  std::size_t iterations = 0;
  bool converged = false;
  double final_spread = 0.0;
  std::size_t migration_rounds = 0;
  bool migration_complete = true;
  double residual_total = 0.0;
  std::size_t accounts_moved = 0;

  friend bool operator==(const DiffusionTelemetry&, const DiffusionTelemetry&) = default;
};

struct SchedulerTelemetry {
  double makespan = 0.0;
  std::size_t accounts_moved = 0;
  std::vector<CapacityProbe> capacity_trace;  // multifit only
  double final_upper = 0.0;                   // multifit only
};

struct RebalanceTelemetry {
  Algorithm algorithm = Algorithm::none;
  std::optional<DiffusionTelemetry> diffusion;
  std::optional<SchedulerTelemetry> scheduler;
};

struct EpochReport {
  std::size_t epoch = 1;  // 1-based
  std::vector<ShardStats> shards;
  double scale_to_real = 1.0;  // multiply units to get native currency
  double spread = 0.0;
  double mean = 0.0;
  double imbalance = 1.0;  // max / mean; 1 when the epoch carries no load
  std::optional<RebalanceTelemetry> rebalance;  // run at the end of this epoch

  std::vector<double> loads() const {
    std::vector<double> v;
    for (const auto& s : shards) v.push_back(static_cast<double>(s.load) * scale_to_real);
    return v;
  }
};

// Last-value prediction: next epoch's cost of an account is what it cost in
// the epoch just measured. Accounts absent here count as zero when balancing.
inline AccountCosts predict_costs(const AccountCosts& previous) { return previous; }

struct EpochOutcome {
  AccountCosts costs;
  EpochReport report;
};

inline void fill_metrics(EpochReport& r) {
  const auto loads = r.loads();
  const auto n = static_cast<double>(loads.size());
  double total = 0.0;
  for (double v : loads) total += v;
  r.spread = spread(loads);
  r.mean = total / n;
  const double hi = *std::max_element(loads.begin(), loads.end());
  r.imbalance = r.mean > 0.0 ? hi / r.mean : 1.0;
}

// Measures one epoch. Sources not yet in `asg` are placed, on first
// appearance, on the shard with the least load accumulated so far this
// epoch (ties: lowest index); `asg` is updated in place.
inline EpochOutcome run_epoch(Assignment& asg, std::span<const Transaction> epoch_txs,
                              const DecimalScale& scale, std::size_t epoch_index = 1) {
  const auto n = asg.shard_count();
  EpochOutcome out;
  out.costs = AccountCosts(scale);
  out.report.epoch = epoch_index;
  out.report.scale_to_real = scale.to_real(1);
  out.report.shards.assign(n, ShardStats{});
  auto& shards = out.report.shards;

  for (const auto& tx : epoch_txs) {
    auto s = asg.shard_of(tx.source);
    if (!s) {
      ShardIndex lightest = 0;
      for (ShardIndex i = 1; i < n; ++i)
        if (shards[i].load < shards[lightest].load) lightest = i;
      asg.assign(tx.source, lightest);
      s = lightest;
    }
    out.costs.add(tx.source, tx.fee);
    shards[*s].load = checked_add(shards[*s].load, tx.fee);
    ++shards[*s].transactions;
  }
  const auto sizes = asg.shard_sizes();
  for (ShardIndex i = 0; i < n; ++i) shards[i].accounts = sizes[i];
  fill_metrics(out.report);
  return out;
}

struct RebalanceOutcome {
  Assignment assignment;
  RebalanceTelemetry telemetry;
  std::optional<DiffusionResult> diffusion;  // with loads recorded when tracing
  std::vector<AccountMove> moves;
};

inline std::size_t count_moved(const Assignment& before, const Assignment& after) {
  std::size_t moved = 0;
  for (const auto& [a, s] : after.entries()) {
    const auto old = before.shard_of(a);
    if (!old || *old != s) ++moved;
  }
  return moved;
}

// One rebalancing step on predicted costs. Every account of `asg` takes part;
// those without a prediction weigh zero.
inline RebalanceOutcome rebalance(const Assignment& asg, const AccountCosts& predicted,
                                  const SimConfig& cfg, const TopologyGraph& g,
                                  const WeightMatrix& w, bool record_trace = false) {
  for (const auto& [a, _] : predicted.entries())
    if (!asg.contains(a)) throw DataError("predicted account '" + a + "' is not assigned");

  RebalanceOutcome out{asg, {}, std::nullopt, {}};
  out.telemetry.algorithm = cfg.algorithm;
  const auto n = asg.shard_count();

  switch (cfg.algorithm) {
    case Algorithm::none:
      return out;

    case Algorithm::diffusion: {
      if (g.node_count() != n) throw DataError("topology size differs from shard count");
      const auto loads = to_real(shard_loads(asg, predicted), predicted.scale());
      auto diff = run_diffusion(loads, w, g,
                                DiffusionOptions{cfg.tolerance, cfg.max_iterations, record_trace});
      // Without convergence the last transfer vectors are still migrated,
      // best effort; the flag travels in the telemetry.
      const auto plan = TransferPlan::from_diffusion(diff.final_state, g);
      auto mig = run_migration(asg, predicted, plan, g, cfg.migration_max_rounds);
      DiffusionTelemetry t;
      t.iterations = diff.iterations;
      t.converged = diff.converged;
      t.final_spread = diff.spread_history.back();
      t.migration_rounds = mig.rounds_used;
      t.migration_complete = mig.complete;
      t.residual_total = mig.residual_total();
      t.accounts_moved = mig.moves.size();
      out.telemetry.diffusion = t;
      out.assignment = std::move(mig.assignment);
      out.moves = std::move(mig.moves);
      out.diffusion = std::move(diff);
      return out;
    }

    case Algorithm::lpt:
    case Algorithm::multifit: {
      AccountCosts all(predicted.scale());
      for (const auto& [a, _] : asg.entries()) all.set(a, predicted.cost(a));
      auto sched = cfg.algorithm == Algorithm::lpt
                       ? lpt_schedule(all, n)
                       : multifit_schedule(all, n, cfg.multifit_rounds, cfg.packing);
      SchedulerTelemetry t;
      t.makespan = all.scale().to_real(sched.detail.makespan);
      t.accounts_moved = count_moved(asg, sched.assignment);
      t.capacity_trace = sched.detail.capacity_trace;
      t.final_upper = sched.detail.final_upper * all.scale().to_real(1);
      for (auto& p : t.capacity_trace) {
        p.lower *= all.scale().to_real(1);
        p.upper *= all.scale().to_real(1);
        p.capacity *= all.scale().to_real(1);
      }
      out.telemetry.scheduler = std::move(t);
      out.assignment = std::move(sched.assignment);
      return out;
    }
  }
  return out;
}

// Per-epoch artefacts kept for tracing.
struct EpochArtifacts {
  std::optional<DiffusionResult> diffusion;
  std::vector<AccountMove> moves;
};

struct SimulationRun {
  std::size_t transactions_in = 0;
  std::size_t transactions_kept = 0;
  std::size_t transactions_removed = 0;
  std::size_t accounts = 0;
  std::vector<EpochReport> epochs;
  std::vector<EpochArtifacts> artifacts;  // parallel to epochs
};

// Splits transactions into `count` equal-length, contiguous start_time
// windows covering [min, max]. Order within a window follows the input.
inline std::vector<std::vector<Transaction>> partition_by_time(std::span<const Transaction> txs,
                                                               std::size_t count) {
  if (count < 1) throw DataError("epoch count must be at least 1");
  if (txs.size() < count)
    throw DataError("time-partition needs at least as many transactions as epochs (" +
                    std::to_string(txs.size()) + " < " + std::to_string(count) + ")");
  const auto [lo_it, hi_it] = std::minmax_element(
      txs.begin(), txs.end(),
      [](const Transaction& a, const Transaction& b) { return a.start_time < b.start_time; });
  const std::int64_t lo = lo_it->start_time;
  const std::int64_t span_s = hi_it->start_time - lo + 1;
  const auto k = static_cast<std::int64_t>(count);
  const std::int64_t length = (span_s + k - 1) / k;
  std::vector<std::vector<Transaction>> windows(count);
  for (const auto& tx : txs) {
    const auto idx = static_cast<std::size_t>((tx.start_time - lo) / length);
    windows[std::min(idx, count - 1)].push_back(tx);
  }
  return windows;
}

inline SimulationRun run_simulation(const SimConfig& cfg, std::span<const Transaction> txs,
                                    bool record_trace = false) {
  validate(cfg);
  const auto g = cfg.topology.build(cfg.shards);
  const auto w = metropolis_weights(g, cfg.weights);

  SimulationRun run;
  run.transactions_in = txs.size();
  auto filtered = filter_outliers(txs, cfg.outlier_threshold);
  run.transactions_kept = filtered.kept.size();
  run.transactions_removed = filtered.removed;

  std::vector<std::vector<Transaction>> windows;
  if (cfg.mode == EpochMode::time_partition) windows = partition_by_time(filtered.kept, cfg.epochs);

  auto epoch_txs = [&](std::size_t e) -> std::span<const Transaction> {
    if (cfg.mode == EpochMode::replay) return filtered.kept;
    return windows[e];
  };

  const auto seed_accounts = account_universe(epoch_txs(0));
  Assignment asg = initial_assignment(seed_accounts, cfg.shards, cfg.seed);

  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    auto outcome = run_epoch(asg, epoch_txs(e), cfg.scale, e + 1);
    EpochArtifacts art;
    if (e + 1 < cfg.epochs) {
      auto rb = rebalance(asg, predict_costs(outcome.costs), cfg, g, w, record_trace);
      outcome.report.rebalance = std::move(rb.telemetry);
      asg = std::move(rb.assignment);
      art.diffusion = std::move(rb.diffusion);
      art.moves = std::move(rb.moves);
    }
    run.epochs.push_back(std::move(outcome.report));
    run.artifacts.push_back(std::move(art));
  }
  run.accounts = asg.size();
  return run;
}

}  // namespace shardbal

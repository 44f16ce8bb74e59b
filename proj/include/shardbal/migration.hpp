#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <unordered_set>
#include <utility>
#include <vector>

#include "shardbal/diffusion.hpp"
#include "shardbal/error.hpp"
#include "shardbal/format.hpp"
#include "shardbal/topology.hpp"
#include "shardbal/workload.hpp"

namespace shardbal {

// Positive transfer obligations between neighbouring shards, keyed by
// (sender, receiver).
class TransferPlan {
 public:
  TransferPlan() = default;

  // Positive entries of the transfer vectors. Antisymmetry of the deltas
  // means at most one direction per edge survives.
  static TransferPlan from_diffusion(const DiffusionState& state, const TopologyGraph& g) {
    TransferPlan plan;
    for (ShardIndex i = 0; i < g.node_count(); ++i)
      for (auto j : g.neighbors(i))
        if (state.delta(i, j) > 0.0) plan.amounts_[{i, j}] = state.delta(i, j);
    return plan;
  }

  void set(ShardIndex from, ShardIndex to, double amount) {
    if (!(amount >= 0.0) || !std::isfinite(amount))
      throw DataError("transfer amounts must be finite and non-negative");
    if (amount == 0.0)
      amounts_.erase({from, to});
    else
      amounts_[{from, to}] = amount;
  }

  double amount(ShardIndex from, ShardIndex to) const {
    const auto it = amounts_.find({from, to});
    return it == amounts_.end() ? 0.0 : it->second;
  }

  double total() const {
    double t = 0.0;
    for (const auto& [_, v] : amounts_) t += v;
    return t;
  }

  bool empty() const noexcept { return amounts_.empty(); }
  const std::map<Edge, double>& entries() const noexcept { return amounts_; }

 private:
  std::map<Edge, double> amounts_;
};

struct ResidentAccount {
  AccountId id;
  double cost = 0.0;
};

struct TransferSelection {
  std::vector<ResidentAccount> selected;  // in scan order
  double achieved = 0.0;
};

// Greedy subset-sum: scan by cost descending (ties: id ascending) and take
// every account whose cost still fits in the remaining target. Zero-cost
// accounts are never taken; they cannot reduce an obligation.
inline TransferSelection select_accounts_for_transfer(std::span<const ResidentAccount> accounts,
                                                      double target) {
  TransferSelection sel;
  if (!(target > 0.0)) return sel;
  std::vector<const ResidentAccount*> order;
  order.reserve(accounts.size());
  for (const auto& a : accounts) {
    if (a.cost < 0.0) throw DataError("account '" + a.id + "' has negative cost");
    if (a.cost > 0.0) order.push_back(&a);
  }
  std::sort(order.begin(), order.end(), [](const ResidentAccount* x, const ResidentAccount* y) {
    if (x->cost != y->cost) return x->cost > y->cost;
    return x->id < y->id;
  });
  double remaining = target;
  for (const auto* a : order) {
    if (a->cost <= remaining) {
      sel.selected.push_back(*a);
      sel.achieved += a->cost;
      remaining -= a->cost;
    }
  }
  return sel;
}

struct AccountMove {
  AccountId account;
  ShardIndex from = 0;
  ShardIndex to = 0;
  double cost = 0.0;
  std::size_t round = 0;  // 1-based
};

struct MigrationResult {
  Assignment assignment;
  std::size_t rounds_used = 0;
  bool complete = true;  // false: round budget exhausted while still reducible
  TransferPlan residual;
  std::vector<AccountMove> moves;

  double residual_total() const { return residual.total(); }
};

inline std::size_t default_migration_rounds(const TopologyGraph& g) { return 4 * diameter(g); }

// Realises a transfer plan by moving whole accounts between neighbours.
// Each round every shard fills its outgoing obligations (receiver ascending)
// from the accounts it held at the start of the round; moves commit together
// at the end of the round, so received accounts can be relayed next round.
// Stops when a round moves nothing or after `max_rounds`.
inline MigrationResult run_migration(const Assignment& asg, const AccountCosts& costs,
                                     const TransferPlan& plan, const TopologyGraph& g,
                                     std::optional<std::size_t> max_rounds = std::nullopt) {
  const auto n = g.node_count();
  if (asg.shard_count() != n)
    throw DataError("assignment has " + std::to_string(asg.shard_count()) +
                    " shards, topology has " + std::to_string(n));
  for (const auto& [edge, _] : plan.entries())
    if (edge.first >= n || edge.second >= n || !g.adjacent(edge.first, edge.second))
      throw DataError("transfer (" + std::to_string(edge.first) + "->" +
                      std::to_string(edge.second) + ") is not along a topology edge");
  for (const auto& [a, _] : costs.entries())
    if (!asg.contains(a)) throw DataError("account '" + a + "' has a cost but no shard");

  std::vector<std::vector<ResidentAccount>> residents(n);
  for (const auto& [a, s] : asg.entries()) residents[s].push_back({a, costs.real_cost(a)});

  MigrationResult r;
  r.assignment = asg;
  r.residual = plan;
  const std::size_t budget = max_rounds.value_or(default_migration_rounds(g));

  auto can_progress = [&] {
    for (const auto& [edge, remaining] : r.residual.entries())
      for (const auto& acc : residents[edge.first])
        if (acc.cost > 0.0 && acc.cost <= remaining) return true;
    return false;
  };

  for (std::size_t round = 1; round <= budget; ++round) {
    std::vector<AccountMove> wave;
    std::vector<std::vector<ResidentAccount>> staying(n);
    for (ShardIndex i = 0; i < n; ++i) {
      std::vector<ResidentAccount> pool = residents[i];
      for (auto j : g.neighbors(i)) {
        const double remaining = r.residual.amount(i, j);
        if (remaining <= 0.0) continue;
        auto sel = select_accounts_for_transfer(pool, remaining);
        if (sel.selected.empty()) continue;
        r.residual.set(i, j, std::max(0.0, remaining - sel.achieved));
        for (const auto& acc : sel.selected) wave.push_back({acc.id, i, j, acc.cost, round});
        std::unordered_set<AccountId> taken;
        for (const auto& acc : sel.selected) taken.insert(acc.id);
        std::erase_if(pool, [&](const ResidentAccount& x) { return taken.count(x.id) != 0; });
      }
      staying[i] = std::move(pool);
    }
    if (wave.empty()) break;
    residents = std::move(staying);
    for (const auto& mv : wave) {
      residents[mv.to].push_back({mv.account, mv.cost});
      r.assignment.assign(mv.account, mv.to);
    }
    r.rounds_used = round;
    r.moves.insert(r.moves.end(), wave.begin(), wave.end());
  }
  r.complete = !can_progress();
  return r;
}

// Migration log CSV: round,account,from,to,cost.
inline void write_migration_log(std::ostream& out, std::span<const AccountMove> moves) {
  out << "round,account,from,to,cost\n";
  for (const auto& m : moves)
    out << m.round << ',' << detail::csv_escape(m.account) << ',' << m.from << ',' << m.to
        << ',' << format_real(m.cost) << '\n';
}

}  // namespace shardbal

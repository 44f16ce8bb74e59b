#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shardbal/error.hpp"
#include "shardbal/topology.hpp"
#include "shardbal/workload.hpp"

namespace shardbal {

template <typename T>
concept CostValue = std::integral<T> || std::floating_point<T>;

enum class SchedulerKind { lpt, multifit, brute_force };

inline std::string_view to_string(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::lpt: return "lpt";
    case SchedulerKind::multifit: return "multifit";
    case SchedulerKind::brute_force: return "brute_force";
  }
  return "?";
}

enum class PackingRule {
  first_fit_decreasing,
  next_fit,  // fill bin b until an item overflows it, then move on to b+1
};

// One MULTIFIT bisection probe.
struct CapacityProbe {
  double lower;     // A
  double upper;     // B
  double capacity;  // C = (A + B) / 2
  bool fits;
};

template <CostValue Cost>
struct ScheduleResult {
  SchedulerKind algorithm = SchedulerKind::lpt;
  std::vector<ShardIndex> shard_of;  // per input item
  std::vector<Cost> loads;           // per shard
  Cost makespan{};
  // MULTIFIT only.
  std::size_t rounds_used = 0;
  std::vector<CapacityProbe> capacity_trace;
  double final_upper = 0.0;
};

template <CostValue Cost>
std::vector<Cost> loads_of(std::span<const ShardIndex> shard_of, std::span<const Cost> costs,
                           std::size_t n) {
  if (shard_of.size() != costs.size()) throw DataError("schedule and cost list differ in length");
  std::vector<Cost> loads(n, Cost{});
  for (std::size_t i = 0; i < costs.size(); ++i) {
    if (shard_of[i] >= n) throw DataError("item assigned to shard out of range");
    loads[shard_of[i]] += costs[i];
  }
  return loads;
}

template <CostValue Cost>
Cost makespan(std::span<const ShardIndex> shard_of, std::span<const Cost> costs, std::size_t n) {
  const auto loads = loads_of(shard_of, costs, n);
  return loads.empty() ? Cost{} : *std::max_element(loads.begin(), loads.end());
}

inline Units makespan(const Assignment& asg, const AccountCosts& costs) {
  const auto loads = shard_loads(asg, costs);
  return *std::max_element(loads.begin(), loads.end());
}

namespace detail {

inline void require_shards(std::size_t n) {
  if (n == 0) throw DataError("shard count must be at least 1");
}

// Item indices by cost descending, index ascending.
template <CostValue Cost>
std::vector<std::size_t> decreasing_order(std::span<const Cost> costs) {
  std::vector<std::size_t> order(costs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return costs[a] > costs[b]; });
  return order;
}

template <CostValue Cost>
void check_costs(std::span<const Cost> costs) {
  for (auto c : costs) {
    if (c < Cost{}) throw DataError("costs must be non-negative");
    if constexpr (std::floating_point<Cost>)
      if (!std::isfinite(c)) throw DataError("costs must be finite");
  }
}

template <CostValue Cost>
ScheduleResult<Cost> finish(SchedulerKind kind, std::vector<ShardIndex> shard_of,
                            std::span<const Cost> costs, std::size_t n) {
  ScheduleResult<Cost> r;
  r.algorithm = kind;
  r.loads = loads_of<Cost>(shard_of, costs, n);
  r.makespan = *std::max_element(r.loads.begin(), r.loads.end());
  r.shard_of = std::move(shard_of);
  return r;
}

}  // namespace detail

// Longest processing time first: heaviest item to the currently lightest
// shard (ties: lowest shard index).
template <CostValue Cost>
ScheduleResult<Cost> lpt_schedule(std::span<const Cost> costs, std::size_t n) {
  detail::require_shards(n);
  detail::check_costs(costs);
  std::vector<Cost> loads(n, Cost{});
  std::vector<ShardIndex> shard_of(costs.size(), 0);
  for (auto item : detail::decreasing_order(costs)) {
    const auto target =
        static_cast<ShardIndex>(std::min_element(loads.begin(), loads.end()) - loads.begin());
    loads[target] += costs[item];
    shard_of[item] = target;
  }
  return detail::finish<Cost>(SchedulerKind::lpt, std::move(shard_of), costs, n);
}

// Packs `sorted_costs` (non-increasing) into n bins of equal capacity.
// Returns the bin of each position, or nullopt when some item cannot be placed.
template <CostValue Cost>
std::optional<std::vector<ShardIndex>> ffd_pack(std::span<const Cost> sorted_costs, std::size_t n,
                                                double capacity,
                                                PackingRule rule = PackingRule::first_fit_decreasing) {
  detail::require_shards(n);
  if (!std::is_sorted(sorted_costs.begin(), sorted_costs.end(), std::greater<>{}))
    throw DataError("ffd_pack expects costs in non-increasing order");
  std::vector<Cost> loads(n, Cost{});
  std::vector<ShardIndex> bin_of(sorted_costs.size(), 0);
  auto fits = [&](std::size_t b, Cost c) {
    return static_cast<double>(loads[b] + c) <= capacity;
  };
  std::size_t current = 0;
  for (std::size_t k = 0; k < sorted_costs.size(); ++k) {
    const Cost c = sorted_costs[k];
    std::optional<std::size_t> bin;
    if (rule == PackingRule::first_fit_decreasing) {
      for (std::size_t b = 0; b < n && !bin; ++b)
        if (fits(b, c)) bin = b;
    } else {
      while (current < n && !fits(current, c)) ++current;
      if (current < n) bin = current;
    }
    if (!bin) return std::nullopt;
    loads[*bin] += c;
    bin_of[k] = *bin;
  }
  return bin_of;
}

// Capacity bisection over bin packing. Starts from A = sum/n and
// B = max(2 sum/n, max cost), which always packs; each fitting probe lowers
// B, each failing one raises A. The schedule is the packing at the final B.
template <CostValue Cost>
ScheduleResult<Cost> multifit_schedule(std::span<const Cost> costs, std::size_t n,
                                       std::size_t rounds = 7,
                                       PackingRule rule = PackingRule::first_fit_decreasing) {
  detail::require_shards(n);
  if (rounds < 1) throw DataError("MULTIFIT needs at least one round");
  detail::check_costs(costs);

  const auto order = detail::decreasing_order(costs);
  std::vector<Cost> sorted(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) sorted[k] = costs[order[k]];

  double total = 0.0;
  for (auto c : costs) total += static_cast<double>(c);
  const double max_cost = sorted.empty() ? 0.0 : static_cast<double>(sorted.front());
  double lower = total / static_cast<double>(n);
  double upper = std::max(2.0 * total / static_cast<double>(n), max_cost);

  ScheduleResult<Cost> r;
  std::optional<std::vector<ShardIndex>> best;
  for (std::size_t round = 0; round < rounds; ++round) {
    const double capacity = 0.5 * (lower + upper);
    auto packing = ffd_pack<Cost>(sorted, n, capacity, rule);
    r.capacity_trace.push_back({lower, upper, capacity, packing.has_value()});
    if (packing) {
      upper = capacity;
      best = std::move(packing);
    } else {
      lower = capacity;
    }
  }
  if (!best) {
    best = ffd_pack<Cost>(sorted, n, upper, rule);
    if (!best) throw InvariantViolation("MULTIFIT upper capacity failed to pack");
  }

  std::vector<ShardIndex> shard_of(costs.size(), 0);
  for (std::size_t k = 0; k < order.size(); ++k) shard_of[order[k]] = (*best)[k];
  auto out = detail::finish<Cost>(SchedulerKind::multifit, std::move(shard_of), costs, n);
  out.rounds_used = rounds;
  out.capacity_trace = std::move(r.capacity_trace);
  out.final_upper = upper;
  return out;
}

inline constexpr double kBruteForceLimit = 1e7;

// Exhaustive optimum. Shards are interchangeable, so only canonical
// assignments are visited (item i may open at most one new shard; item 0
// always sits on shard 0), which caps the search at n^(m-1) leaves. Among
// optimal assignments the lexicographically smallest canonical one is
// returned.
template <CostValue Cost>
ScheduleResult<Cost> brute_force_optimal(std::span<const Cost> costs, std::size_t n) {
  detail::require_shards(n);
  detail::check_costs(costs);
  const std::size_t m = costs.size();
  if (m > 1 && (m - 1) * std::log10(static_cast<double>(n)) > std::log10(kBruteForceLimit))
    throw DataError("brute-force instance too large: " + std::to_string(n) + "^" +
                    std::to_string(m - 1) + " assignments exceed 1e7");

  const Cost bound = lpt_schedule(costs, n).makespan;
  Cost best = bound;
  bool found = false;
  std::vector<ShardIndex> current(m, 0), best_assignment(m, 0);
  std::vector<Cost> loads(n, Cost{});

  // Depth-first in lexicographic order. `peak` is the max load so far.
  auto visit = [&](auto&& self, std::size_t item, std::size_t used, Cost peak) -> void {
    if (peak > best || (found && peak >= best)) return;
    if (item == m) {
      best = peak;
      best_assignment = current;
      found = true;
      return;
    }
    const std::size_t limit = std::min(n, used + 1);
    for (std::size_t s = 0; s < limit; ++s) {
      loads[s] += costs[item];
      current[item] = s;
      self(self, item + 1, std::max(used, s + 1), std::max(peak, loads[s]));
      loads[s] -= costs[item];
    }
  };
  visit(visit, 0, 0, Cost{});
  if (!found) throw InvariantViolation("brute force found nothing within the LPT bound");
  return detail::finish<Cost>(SchedulerKind::brute_force, std::move(best_assignment), costs, n);
}

// Account-level adapters: items are the accounts of `costs` in ascending id
// order, so "ties by index" is "ties by account id".
struct AccountSchedule {
  Assignment assignment;
  ScheduleResult<Units> detail;
};

namespace detail {

inline AccountSchedule to_accounts(const AccountCosts& costs, std::size_t n,
                                   ScheduleResult<Units> r) {
  AccountSchedule out{Assignment(n), std::move(r)};
  std::size_t k = 0;
  for (const auto& [a, _] : costs.entries()) out.assignment.assign(a, out.detail.shard_of[k++]);
  return out;
}

inline std::vector<Units> cost_list(const AccountCosts& costs) {
  std::vector<Units> v;
  v.reserve(costs.size());
  for (const auto& [_, c] : costs.entries()) v.push_back(c);
  return v;
}

}  // namespace detail

inline AccountSchedule lpt_schedule(const AccountCosts& costs, std::size_t n) {
  const auto v = detail::cost_list(costs);
  return detail::to_accounts(costs, n, lpt_schedule<Units>(v, n));
}

inline AccountSchedule multifit_schedule(const AccountCosts& costs, std::size_t n,
                                         std::size_t rounds = 7,
                                         PackingRule rule = PackingRule::first_fit_decreasing) {
  const auto v = detail::cost_list(costs);
  return detail::to_accounts(costs, n, multifit_schedule<Units>(v, n, rounds, rule));
}

inline AccountSchedule brute_force_optimal(const AccountCosts& costs, std::size_t n) {
  const auto v = detail::cost_list(costs);
  return detail::to_accounts(costs, n, brute_force_optimal<Units>(v, n));
}

}  // namespace shardbal

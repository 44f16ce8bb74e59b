#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "shardbal/error.hpp"
#include "shardbal/fixed_point.hpp"
#include "shardbal/random.hpp"
#include "shardbal/workload.hpp"

namespace shardbal {

enum class Skew {
  uniform,    // every fee in [0.5, 1.5)
  pareto,     // Pareto fees, x_m = 0.5, alpha = 1.5, capped at 100
  pointmass,  // accounts that the seeded initial assignment puts on shard 0
              // pay ten times more; the rest as `uniform`
};

inline Skew parse_skew(std::string_view s) {
  if (s == "uniform") return Skew::uniform;
  if (s == "pareto") return Skew::pareto;
  if (s == "pointmass") return Skew::pointmass;
  throw ParseError("unknown skew '" + std::string(s) + "'");
}

struct FixtureSpec {
  std::size_t accounts = 1000;
  std::size_t shards = 10;
  std::uint64_t seed = 1;
  Skew skew = Skew::pareto;
  DecimalScale scale;
  std::int64_t start_time = 1700000000;
  std::int64_t duration = 86400;  // seconds covered by start_time values
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::string hex_id(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string account_name(std::size_t i, std::size_t count) {
  const auto width = std::to_string(count > 0 ? count - 1 : 0).size();
  std::string digits = std::to_string(i);
  return "acct" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

}  // namespace detail

// Fee units are abstract ("unit-scale"): shard loads land in the hundreds for
// the default size. Output is identical for identical specs.
inline std::vector<Transaction> generate_fixture(const FixtureSpec& spec) {
  if (spec.accounts < 1) throw DataError("fixture needs at least one account");
  if (spec.shards < 1) throw DataError("fixture needs at least one shard");
  if (spec.duration < 1) throw DataError("fixture duration must be positive");
  validate(spec.scale);

  std::vector<AccountId> ids;
  ids.reserve(spec.accounts);
  for (std::size_t i = 0; i < spec.accounts; ++i)
    ids.push_back(detail::account_name(i, spec.accounts));

  std::vector<bool> heavy(spec.accounts, false);
  if (spec.skew == Skew::pointmass) {
    const auto asg = initial_assignment(ids, spec.shards, spec.seed);
    for (std::size_t i = 0; i < spec.accounts; ++i) heavy[i] = asg.shard_of(ids[i]) == 0u;
  }

  Rng rng(detail::splitmix64(spec.seed) ^ 0x5348415244ULL);
  const double factor = static_cast<double>(spec.scale.factor());
  auto draw_fee = [&](std::size_t account) {
    const double u = uniform01(rng);
    switch (spec.skew) {
      case Skew::uniform: return 0.5 + u;
      case Skew::pareto: return std::min(100.0, 0.5 / std::pow(1.0 - u, 1.0 / 1.5));
      case Skew::pointmass: return heavy[account] ? 5.0 + 10.0 * u : 0.5 + u;
    }
    return 1.0;
  };

  std::vector<Transaction> txs;
  std::uint64_t counter = 0;
  for (std::size_t a = 0; a < spec.accounts; ++a) {
    std::size_t count = 1;
    while (count < 8 && uniform01(rng) < 0.5) ++count;
    for (std::size_t k = 0; k < count; ++k) {
      Transaction tx;
      tx.tx_hash = detail::hex_id(detail::splitmix64(counter++));
      tx.source = ids[a];
      const auto other = spec.accounts > 1 ? uniform_index(rng, spec.accounts - 1) : 0;
      tx.destination = ids[spec.accounts > 1 ? (a + 1 + other) % spec.accounts : a];
      tx.start_time = spec.start_time +
                      static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(spec.duration)));
      tx.block_hash = detail::hex_id(detail::splitmix64(static_cast<std::uint64_t>(tx.start_time / 12)));
      tx.amount = format_decimal(static_cast<Units>(uniform_index(rng, 1000000)), DecimalScale{6});
      tx.fee = static_cast<Units>(std::llround(draw_fee(a) * factor));
      txs.push_back(std::move(tx));
    }
  }
  std::sort(txs.begin(), txs.end(), [](const Transaction& x, const Transaction& y) {
    return std::tie(x.start_time, x.tx_hash) < std::tie(y.start_time, y.tx_hash);
  });
  return txs;
}

}  // namespace shardbal

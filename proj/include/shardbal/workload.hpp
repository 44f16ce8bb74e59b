#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "shardbal/error.hpp"
#include "shardbal/fixed_point.hpp"
#include "shardbal/random.hpp"
#include "shardbal/topology.hpp"

namespace shardbal {

using AccountId = std::string;

struct Transaction {
  std::string tx_hash;
  std::string block_hash;
  AccountId source;
  AccountId destination;
  std::int64_t start_time = 0;  // seconds since the Unix epoch
  std::string amount;           // validated non-negative decimal, kept verbatim
  Units fee = 0;                // processing time, in scaled units

  friend bool operator==(const Transaction&, const Transaction&) = default;
};

namespace detail {

inline std::vector<std::string> split_csv_record(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool field_started_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty() && !field_started_quoted) {
      quoted = true;
      field_started_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
      field_started_quoted = false;
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line_no);
  fields.push_back(std::move(cur));
  return fields;
}

inline bool is_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline int to_int(std::string_view s) {
  int v = 0;
  for (char c : s) v = v * 10 + (c - '0');
  return v;
}

inline std::string csv_escape(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace detail

// Integer seconds ("1700000000") or ISO-8601 date-time
// ("2021-03-04T05:06:07Z", optional fraction, 'Z' or +hh:mm offset, ' '
// accepted in place of 'T'). Fractional seconds are truncated.
inline std::int64_t parse_timestamp(std::string_view s) {
  using detail::is_digits;
  using detail::to_int;
  if (is_digits(s)) {
    if (s.size() > 18) throw ParseError("timestamp out of range '" + std::string(s) + "'");
    std::int64_t v = 0;
    for (char c : s) v = v * 10 + (c - '0');
    return v;
  }
  auto fail = [&]() -> std::int64_t {
    throw ParseError("unparsable timestamp '" + std::string(s) + "'");
  };
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':')
    return fail();
  const auto y = s.substr(0, 4), mo = s.substr(5, 2), d = s.substr(8, 2), h = s.substr(11, 2),
             mi = s.substr(14, 2), se = s.substr(17, 2);
  for (auto part : {y, mo, d, h, mi, se})
    if (!is_digits(part)) return fail();
  std::string_view rest = s.substr(19);
  if (!rest.empty() && rest.front() == '.') {
    std::size_t k = 1;
    while (k < rest.size() && rest[k] >= '0' && rest[k] <= '9') ++k;
    if (k == 1) return fail();
    rest.remove_prefix(k);
  }
  std::int64_t offset = 0;
  if (rest == "Z" || rest.empty()) {
  } else if (rest.size() == 6 && (rest[0] == '+' || rest[0] == '-') && rest[3] == ':' &&
             is_digits(rest.substr(1, 2)) && is_digits(rest.substr(4, 2))) {
    offset = (to_int(rest.substr(1, 2)) * 3600 + to_int(rest.substr(4, 2)) * 60) *
             (rest[0] == '-' ? -1 : 1);
  } else {
    return fail();
  }
  const std::chrono::year_month_day ymd{std::chrono::year{to_int(y)},
                                        std::chrono::month{static_cast<unsigned>(to_int(mo))},
                                        std::chrono::day{static_cast<unsigned>(to_int(d))}};
  if (!ymd.ok() || to_int(h) > 23 || to_int(mi) > 59 || to_int(se) > 60) return fail();
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + to_int(h) * 3600 + to_int(mi) * 60 +
         to_int(se) - offset;
}

inline constexpr std::array<std::string_view, 7> kTransactionColumns = {
    "tx_hash", "block_hash", "source", "destination", "start_time", "amount", "fee"};

struct CsvFormat {
  DecimalScale scale;
};

// Reads `tx_hash,block_hash,source,destination,start_time,amount,fee` records.
// Columns are located by header name, so their order is free; extra columns
// are ignored. Blank lines are skipped.
inline std::vector<Transaction> parse_transactions(std::istream& in, const CsvFormat& fmt = {}) {
  validate(fmt.scale);
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line()) throw ParseError("missing CSV header", 1);
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = detail::split_csv_record(line, line_no);
  std::array<std::size_t, kTransactionColumns.size()> col{};
  for (std::size_t c = 0; c < kTransactionColumns.size(); ++c) {
    const auto it = std::find(header.begin(), header.end(), kTransactionColumns[c]);
    if (it == header.end())
      throw ParseError("header lacks column '" + std::string(kTransactionColumns[c]) + "'", 1);
    col[c] = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<Transaction> txs;
  std::unordered_set<std::string> hashes;
  while (next_line()) {
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto f = detail::split_csv_record(line, line_no);
    if (f.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(f.size()),
                       line_no);
    Transaction tx;
    try {
      tx.tx_hash = std::move(f[col[0]]);
      tx.block_hash = std::move(f[col[1]]);
      tx.source = std::move(f[col[2]]);
      tx.destination = std::move(f[col[3]]);
      tx.start_time = parse_timestamp(f[col[4]]);
      parse_decimal(f[col[5]], fmt.scale);
      tx.amount = std::move(f[col[5]]);
      tx.fee = parse_decimal(f[col[6]], fmt.scale);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
    if (tx.tx_hash.empty()) throw ParseError("empty tx_hash", line_no);
    if (tx.source.empty()) throw ParseError("empty source account", line_no);
    if (!hashes.insert(tx.tx_hash).second)
      throw ParseError("duplicate tx_hash '" + tx.tx_hash + "'", line_no);
    txs.push_back(std::move(tx));
  }
  return txs;
}

// Writes the canonical column order; fees are printed with exactly
// `scale.exponent` fractional digits so that re-parsing is lossless.
inline void write_transactions(std::ostream& out, std::span<const Transaction> txs,
                               const CsvFormat& fmt = {}) {
  using detail::csv_escape;
  out << "tx_hash,block_hash,source,destination,start_time,amount,fee\n";
  for (const auto& tx : txs) {
    out << csv_escape(tx.tx_hash) << ',' << csv_escape(tx.block_hash) << ','
        << csv_escape(tx.source) << ',' << csv_escape(tx.destination) << ',' << tx.start_time
        << ',' << csv_escape(tx.amount) << ',' << format_decimal(tx.fee, fmt.scale) << '\n';
  }
}

struct FilterResult {
  std::vector<Transaction> kept;
  std::size_t removed = 0;
};

// Keeps transactions with fee <= threshold; no threshold keeps everything.
inline FilterResult filter_outliers(std::span<const Transaction> txs,
                                    std::optional<Units> threshold) {
  FilterResult r;
  r.kept.reserve(txs.size());
  for (const auto& tx : txs)
    if (!threshold || tx.fee <= *threshold) r.kept.push_back(tx);
  r.removed = txs.size() - r.kept.size();
  return r;
}

// Per-account summed fees of initiated transactions for one epoch.
class AccountCosts {
 public:
  AccountCosts() = default;
  explicit AccountCosts(DecimalScale scale) : scale_(scale) {}

  const DecimalScale& scale() const noexcept { return scale_; }

  // Accounts not present cost nothing.
  Units cost(const AccountId& a) const {
    const auto it = costs_.find(a);
    return it == costs_.end() ? 0 : it->second;
  }
  double real_cost(const AccountId& a) const { return scale_.to_real(cost(a)); }

  bool contains(const AccountId& a) const { return costs_.count(a) != 0; }

  void add(const AccountId& a, Units c) {
    if (c < 0) throw DataError("negative cost for account '" + a + "'");
    auto& slot = costs_[a];
    slot = checked_add(slot, c);
  }

  void set(const AccountId& a, Units c) {
    if (c < 0) throw DataError("negative cost for account '" + a + "'");
    costs_[a] = c;
  }

  Units total() const {
    Units t = 0;
    for (const auto& [_, c] : costs_) t = checked_add(t, c);
    return t;
  }

  std::size_t size() const noexcept { return costs_.size(); }
  bool empty() const noexcept { return costs_.empty(); }

  // Ascending by account id.
  const std::map<AccountId, Units>& entries() const noexcept { return costs_; }

  std::vector<AccountId> accounts() const {
    std::vector<AccountId> ids;
    ids.reserve(costs_.size());
    for (const auto& [a, _] : costs_) ids.push_back(a);
    return ids;
  }

  friend bool operator==(const AccountCosts&, const AccountCosts&) = default;

 private:
  DecimalScale scale_;
  std::map<AccountId, Units> costs_;
};

// Every source account gets an entry (possibly zero); destination-only
// accounts carry no load and get none.
inline AccountCosts account_costs(std::span<const Transaction> txs, DecimalScale scale = {}) {
  AccountCosts costs(scale);
  for (const auto& tx : txs) costs.add(tx.source, tx.fee);
  return costs;
}

// Distinct source accounts, ascending.
inline std::vector<AccountId> account_universe(std::span<const Transaction> txs) {
  std::vector<AccountId> ids;
  ids.reserve(txs.size());
  for (const auto& tx : txs) ids.push_back(tx.source);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

// account -> shard map over a fixed number of shards.
class Assignment {
 public:
  explicit Assignment(std::size_t shard_count = 1) : shard_count_(shard_count) {
    if (shard_count == 0) throw DataError("shard count must be at least 1");
  }

  std::size_t shard_count() const noexcept { return shard_count_; }

  void assign(const AccountId& a, ShardIndex s) {
    if (s >= shard_count_)
      throw DataError("shard " + std::to_string(s) + " out of range for " +
                      std::to_string(shard_count_) + " shards");
    map_[a] = s;
  }

  std::optional<ShardIndex> shard_of(const AccountId& a) const {
    const auto it = map_.find(a);
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(const AccountId& a) const { return map_.count(a) != 0; }
  std::size_t size() const noexcept { return map_.size(); }

  const std::map<AccountId, ShardIndex>& entries() const noexcept { return map_; }

  std::vector<std::size_t> shard_sizes() const {
    std::vector<std::size_t> sizes(shard_count_, 0);
    for (const auto& [_, s] : map_) ++sizes[s];
    return sizes;
  }

  // Residents of shard s, ascending by id.
  std::vector<AccountId> accounts_on(ShardIndex s) const {
    std::vector<AccountId> out;
    for (const auto& [a, sh] : map_)
      if (sh == s) out.push_back(a);
    return out;
  }

  friend bool operator==(const Assignment&, const Assignment&) = default;

 private:
  std::size_t shard_count_;
  std::map<AccountId, ShardIndex> map_;
};

// Seeded shuffle of `accounts`, then round-robin over the shards: sizes
// differ by at most one.
inline Assignment initial_assignment(std::span<const AccountId> accounts, std::size_t n,
                                     std::uint64_t seed) {
  if (n == 0) throw DataError("shard count must be at least 1");
  std::vector<AccountId> order(accounts.begin(), accounts.end());
  Rng rng(seed);
  shuffle(order, rng);
  Assignment asg(n);
  for (std::size_t k = 0; k < order.size(); ++k) asg.assign(order[k], k % n);
  return asg;
}

using LoadVector = std::vector<Units>;

inline LoadVector shard_loads(const Assignment& asg, const AccountCosts& costs) {
  LoadVector loads(asg.shard_count(), 0);
  for (const auto& [a, c] : costs.entries()) {
    const auto s = asg.shard_of(a);
    if (!s) throw DataError("account '" + a + "' has a cost but no shard");
    loads[*s] = checked_add(loads[*s], c);
  }
  return loads;
}

inline std::vector<double> to_real(const LoadVector& loads, const DecimalScale& scale) {
  std::vector<double> out(loads.size());
  std::transform(loads.begin(), loads.end(), out.begin(),
                 [&](Units u) { return scale.to_real(u); });
  return out;
}

}  // namespace shardbal

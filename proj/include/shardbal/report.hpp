#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>

#include "shardbal/config.hpp"
#include "shardbal/sim.hpp"
#include "shardbal/workload.hpp"

namespace shardbal {

inline constexpr const char* kReportSchema = "shardbal.report";
inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kCostsSchema = "shardbal.costs";
inline constexpr int kCostsSchemaVersion = 1;

inline Json telemetry_to_json(const RebalanceTelemetry& t) {
  Json j;
  j["algorithm"] = to_string(t.algorithm);
  if (t.diffusion) {
    const auto& d = *t.diffusion;
    j["diffusion"] = {{"iterations", d.iterations},
                      {"converged", d.converged},
                      {"final_spread", d.final_spread}};
    j["migration"] = {{"rounds", d.migration_rounds},
                      {"complete", d.migration_complete},
                      {"residual_total", d.residual_total},
                      {"accounts_moved", d.accounts_moved}};
  }
  if (t.scheduler) {
    const auto& s = *t.scheduler;
    j["scheduler"] = {{"makespan", s.makespan}, {"accounts_moved", s.accounts_moved}};
    if (t.algorithm == Algorithm::multifit) {
      Json trace = Json::array();
      for (const auto& p : s.capacity_trace)
        trace.push_back({{"A", p.lower}, {"B", p.upper}, {"C", p.capacity}, {"fits", p.fits}});
      j["scheduler"]["capacity_trace"] = std::move(trace);
      j["scheduler"]["final_B"] = s.final_upper;
    }
  }
  return j;
}

inline Json epoch_report_to_json(const EpochReport& r) {
  Json j;
  j["epoch"] = r.epoch;
  Json shards = Json::array();
  for (std::size_t i = 0; i < r.shards.size(); ++i) {
    const auto& s = r.shards[i];
    shards.push_back({{"shard", i},
                      {"load", static_cast<double>(s.load) * r.scale_to_real},
                      {"load_units", s.load},
                      {"accounts", s.accounts},
                      {"transactions", s.transactions}});
  }
  j["shards"] = std::move(shards);
  j["spread"] = r.spread;
  j["mean"] = r.mean;
  j["imbalance_ratio"] = r.imbalance;
  j["rebalance"] = r.rebalance ? telemetry_to_json(*r.rebalance) : Json(nullptr);
  return j;
}

// `generated_at` is the only field that may differ between identical runs.
inline Json simulation_report_to_json(const SimConfig& cfg, const SimulationRun& run,
                                      std::optional<std::string> generated_at = std::nullopt) {
  Json j;
  j["schema"] = kReportSchema;
  j["schema_version"] = kReportSchemaVersion;
  j["generated_at"] = generated_at ? Json(*generated_at) : Json(nullptr);
  j["config"] = config_to_json(cfg);
  j["input"] = {{"transactions", run.transactions_in},
                {"kept", run.transactions_kept},
                {"removed", run.transactions_removed},
                {"accounts", run.accounts}};
  Json epochs = Json::array();
  for (const auto& e : run.epochs) epochs.push_back(epoch_report_to_json(e));
  j["epochs"] = std::move(epochs);
  return j;
}

// Plot-ready per-shard table: epoch,shard,load,accounts,transactions.
inline void write_shard_csv(std::ostream& out, std::span<const EpochReport> epochs) {
  out << "epoch,shard,load,accounts,transactions\n";
  for (const auto& e : epochs)
    for (std::size_t i = 0; i < e.shards.size(); ++i)
      out << e.epoch << ',' << i << ','
          << format_real(static_cast<double>(e.shards[i].load) * e.scale_to_real) << ','
          << e.shards[i].accounts << ',' << e.shards[i].transactions << '\n';
}

// Costs file, shared by `ingest` (writer) and `balance` / `oracle` (readers):
//   {"schema":"shardbal.costs","schema_version":1,"decimal_exponent":9,
//    "costs":{"acct":"0.003",...}, "assignment":{"acct":0,...}, "shards":10}
// `assignment` and `shards` are optional.
struct CostsFile {
  AccountCosts costs;
  std::optional<Assignment> assignment;
  std::optional<std::size_t> shards;
};

inline Json costs_to_json(const AccountCosts& costs, const Assignment* asg = nullptr) {
  Json j;
  j["schema"] = kCostsSchema;
  j["schema_version"] = kCostsSchemaVersion;
  j["decimal_exponent"] = costs.scale().exponent;
  Json c = Json::object();
  for (const auto& [a, v] : costs.entries()) c[a] = format_decimal(v, costs.scale());
  j["costs"] = std::move(c);
  if (asg) {
    j["shards"] = asg->shard_count();
    Json m = Json::object();
    for (const auto& [a, s] : asg->entries()) m[a] = s;
    j["assignment"] = std::move(m);
  }
  return j;
}

inline CostsFile costs_from_json(const Json& j) {
  detail::reject_unknown_keys(j, "costs file",
                              {"schema", "schema_version", "decimal_exponent", "costs",
                               "assignment", "shards", "summary"});
  DecimalScale scale;
  scale.exponent = detail::get_or<int>(j, "decimal_exponent", scale.exponent);
  validate(scale);
  if (!j.contains("costs") || !j.at("costs").is_object())
    throw ParseError("costs file needs a 'costs' object");
  CostsFile f{AccountCosts(scale), std::nullopt, std::nullopt};
  for (const auto& [a, v] : j.at("costs").items()) {
    try {
      f.costs.set(a, decimal_from_json(v, scale));
    } catch (const ParseError& e) {
      throw ParseError("account '" + a + "': " + e.what());
    }
  }
  if (j.contains("shards")) f.shards = detail::get_or<std::size_t>(j, "shards", 0);
  if (j.contains("assignment")) {
    const auto& m = j.at("assignment");
    if (!m.is_object()) throw ParseError("'assignment' must be an object");
    std::size_t n = f.shards.value_or(0);
    if (!f.shards)
      for (const auto& [_, s] : m.items()) n = std::max(n, s.get<std::size_t>() + 1);
    if (n == 0) throw ParseError("cannot infer shard count from an empty assignment");
    Assignment asg(n);
    for (const auto& [a, s] : m.items()) {
      if (!s.is_number_unsigned()) throw ParseError("shard of '" + a + "' must be an integer");
      asg.assign(a, s.get<std::size_t>());
    }
    f.assignment = std::move(asg);
  }
  return f;
}

}  // namespace shardbal

#pragma once

#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "shardbal/error.hpp"
#include "shardbal/fixed_point.hpp"
#include "shardbal/sim.hpp"

namespace shardbal {

using Json = nlohmann::ordered_json;

namespace detail {

inline void reject_unknown_keys(const Json& obj, std::string_view where,
                                std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ParseError(std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ParseError("unknown key '" + key + "' in " + std::string(where));
  }
}

template <typename T>
T get_or(const Json& obj, const char* key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace detail

// Decimal quantities may be JSON strings ("0.2") or numbers (0.2). Numbers
// go through their shortest textual form, so 0.2 means exactly 0.2.
inline Units decimal_from_json(const Json& v, const DecimalScale& scale) {
  if (v.is_string()) return parse_decimal(v.get<std::string>(), scale);
  if (v.is_number_unsigned() || v.is_number_integer()) {
    return parse_decimal(v.dump(), scale);
  }
  if (v.is_number_float()) return parse_decimal(format_real(v.get<double>()), scale);
  throw ParseError("expected a decimal string or number, got " + v.dump());
}

inline Algorithm parse_algorithm(std::string_view s) {
  if (s == "diffusion") return Algorithm::diffusion;
  if (s == "lpt") return Algorithm::lpt;
  if (s == "multifit") return Algorithm::multifit;
  if (s == "none") return Algorithm::none;
  throw ParseError("unknown algorithm '" + std::string(s) + "'");
}

inline EpochMode parse_epoch_mode(std::string_view s) {
  if (s == "replay") return EpochMode::replay;
  if (s == "time-partition") return EpochMode::time_partition;
  throw ParseError("unknown epoch mode '" + std::string(s) + "'");
}

inline WeightMode parse_weight_mode(std::string_view s) {
  if (s == "exact") return WeightMode::exact;
  if (s == "table-compat") return WeightMode::table_compat;
  throw ParseError("unknown weight mode '" + std::string(s) + "'");
}

inline PackingRule parse_packing(std::string_view s) {
  if (s == "ffd") return PackingRule::first_fit_decreasing;
  if (s == "next-fit") return PackingRule::next_fit;
  throw ParseError("unknown packing rule '" + std::string(s) + "'");
}

inline std::string_view to_string(WeightMode m) {
  return m == WeightMode::exact ? "exact" : "table-compat";
}
inline std::string_view to_string(PackingRule p) {
  return p == PackingRule::first_fit_decreasing ? "ffd" : "next-fit";
}

// {"kind":"ring","n":10}, {"kind":"edges","n":4,"edges":[[0,1],...]} or
// {"kind":"auto"} (ring, or a path below 3 shards).
// `n` is optional; when present it must match the shard count.
inline TopologySpec topology_from_json(const Json& j, std::size_t shards) {
  detail::reject_unknown_keys(j, "topology", {"kind", "n", "edges"});
  TopologySpec spec;
  const auto kind = detail::get_or<std::string>(j, "kind", "ring");
  const auto n = detail::get_or<std::size_t>(j, "n", shards);
  if (n != shards)
    throw ParseError("topology n=" + std::to_string(n) + " differs from shards=" +
                     std::to_string(shards));
  if (kind == "auto") {
    spec.kind = TopologySpec::Kind::automatic;
  } else if (kind == "ring") {
    spec.kind = TopologySpec::Kind::ring;
  } else if (kind == "edges") {
    spec.kind = TopologySpec::Kind::edges;
    if (!j.contains("edges") || !j.at("edges").is_array())
      throw ParseError("topology kind 'edges' needs an 'edges' array");
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() || !e[1].is_number_unsigned())
        throw ParseError("topology edge must be a pair of non-negative integers, got " + e.dump());
      spec.edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
    }
  } else {
    throw ParseError("unknown topology kind '" + kind + "'");
  }
  return spec;
}

inline Json topology_to_json(const TopologySpec& spec, std::size_t shards) {
  Json j;
  switch (spec.kind) {
    case TopologySpec::Kind::automatic:
      j["kind"] = "auto";
      break;
    case TopologySpec::Kind::ring: j["kind"] = "ring"; break;
    case TopologySpec::Kind::edges: {
      j["kind"] = "edges";
      Json edges = Json::array();
      for (const auto& [a, b] : spec.edges) edges.push_back({a, b});
      j["edges"] = std::move(edges);
      break;
    }
  }
  j["n"] = shards;
  return j;
}

inline SimConfig config_from_json(const Json& j) {
  using detail::get_or;
  detail::reject_unknown_keys(j, "config",
                              {"shards", "topology", "algorithm", "diffusion", "multifit",
                               "migration", "outlier_threshold", "seed", "epochs",
                               "decimal_exponent"});
  SimConfig cfg;
  cfg.shards = get_or<std::size_t>(j, "shards", cfg.shards);
  cfg.scale.exponent = get_or<int>(j, "decimal_exponent", cfg.scale.exponent);
  validate(cfg.scale);
  if (j.contains("topology")) cfg.topology = topology_from_json(j.at("topology"), cfg.shards);
  cfg.algorithm = parse_algorithm(get_or<std::string>(j, "algorithm", "diffusion"));
  if (j.contains("diffusion")) {
    const auto& d = j.at("diffusion");
    detail::reject_unknown_keys(d, "diffusion", {"tolerance", "max_iterations", "weights"});
    cfg.tolerance = get_or<double>(d, "tolerance", cfg.tolerance);
    cfg.max_iterations = get_or<std::size_t>(d, "max_iterations", cfg.max_iterations);
    cfg.weights = parse_weight_mode(get_or<std::string>(d, "weights", "exact"));
  }
  if (j.contains("multifit")) {
    const auto& m = j.at("multifit");
    detail::reject_unknown_keys(m, "multifit", {"rounds", "packing"});
    cfg.multifit_rounds = get_or<std::size_t>(m, "rounds", cfg.multifit_rounds);
    cfg.packing = parse_packing(get_or<std::string>(m, "packing", "ffd"));
  }
  if (j.contains("migration")) {
    const auto& m = j.at("migration");
    detail::reject_unknown_keys(m, "migration", {"max_rounds"});
    if (m.contains("max_rounds") && !m.at("max_rounds").is_null())
      cfg.migration_max_rounds = get_or<std::size_t>(m, "max_rounds", 0);
  }
  if (j.contains("outlier_threshold") && !j.at("outlier_threshold").is_null())
    cfg.outlier_threshold = decimal_from_json(j.at("outlier_threshold"), cfg.scale);
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
  if (j.contains("epochs")) {
    const auto& e = j.at("epochs");
    detail::reject_unknown_keys(e, "epochs", {"mode", "count"});
    cfg.mode = parse_epoch_mode(get_or<std::string>(e, "mode", "replay"));
    cfg.epochs = get_or<std::size_t>(e, "count", cfg.epochs);
  }
  validate(cfg);
  return cfg;
}

// Fully resolved config, every default spelled out.
inline Json config_to_json(const SimConfig& cfg) {
  Json j;
  j["shards"] = cfg.shards;
  j["topology"] = topology_to_json(cfg.topology, cfg.shards);
  j["algorithm"] = to_string(cfg.algorithm);
  j["diffusion"] = {{"tolerance", cfg.tolerance},
                    {"max_iterations", cfg.max_iterations},
                    {"weights", to_string(cfg.weights)}};
  j["multifit"] = {{"rounds", cfg.multifit_rounds}, {"packing", to_string(cfg.packing)}};
  j["migration"] = Json::object();
  if (cfg.migration_max_rounds)
    j["migration"]["max_rounds"] = *cfg.migration_max_rounds;
  else
    j["migration"]["max_rounds"] = nullptr;
  if (cfg.outlier_threshold)
    j["outlier_threshold"] = format_decimal(*cfg.outlier_threshold, cfg.scale);
  else
    j["outlier_threshold"] = nullptr;
  j["seed"] = cfg.seed;
  j["epochs"] = {{"mode", to_string(cfg.mode)}, {"count", cfg.epochs}};
  j["decimal_exponent"] = cfg.scale.exponent;
  return j;
}

}  // namespace shardbal

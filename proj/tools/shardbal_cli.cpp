// shardbal: ingest transaction CSVs, run epoch simulations, rebalance a
// single cost snapshot, compute brute-force optima, generate fixtures.
//
// Exit codes: 0 ok, 1 usage error, 2 data error, 3 soft failure under --strict
// (diffusion did not converge or migration ran out of rounds).

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "shardbal/shardbal.hpp"

namespace fs = std::filesystem;
using namespace shardbal;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitStrict = 3;

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  return out;
}

Json read_json(const std::string& path) {
  auto in = open_in(path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_json(const fs::path& path, const Json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// "9.000000000" -> "9", "0.250000000" -> "0.25".
std::string trimmed(Units v, const DecimalScale& s) {
  auto text = format_decimal(v, s);
  if (text.find('.') != std::string::npos) {
    while (text.back() == '0') text.pop_back();
    if (text.back() == '.') text.pop_back();
  }
  return text;
}

std::vector<Transaction> read_transactions(const std::string& path, const DecimalScale& scale) {
  auto in = open_in(path);
  try {
    return parse_transactions(in, CsvFormat{scale});
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void print_loads(std::ostream& os, const char* label, const std::vector<double>& loads) {
  os << label;
  for (double v : loads) os << ' ' << format_real(v);
  os << "  (spread " << format_real(spread(loads)) << ")\n";
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
  std::string input;
  std::string out;
  std::optional<std::string> threshold;
  int exponent = 9;
};

int run_ingest(const IngestArgs& a) {
  const DecimalScale scale{a.exponent};
  validate(scale);
  const auto txs = read_transactions(a.input, scale);
  std::optional<Units> threshold;
  if (a.threshold) threshold = parse_decimal(*a.threshold, scale);
  const auto filtered = filter_outliers(txs, threshold);
  const auto costs = account_costs(filtered.kept, scale);

  Json j = costs_to_json(costs);
  j["summary"] = {{"transactions", txs.size()},
                  {"kept", filtered.kept.size()},
                  {"removed", filtered.removed},
                  {"accounts", costs.size()},
                  {"total_fee", format_decimal(costs.total(), scale)},
                  {"outlier_threshold",
                   threshold ? Json(format_decimal(*threshold, scale)) : Json(nullptr)}};
  write_json(a.out, j);
  std::cout << "transactions " << txs.size() << "\nkept " << filtered.kept.size() << "\nremoved "
            << filtered.removed << "\naccounts " << costs.size() << "\ntotal_fee "
            << trimmed(costs.total(), scale) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config;
  std::string input;
  std::string out;
  std::string trace_dir;
  std::string shard_csv;
  bool strict = false;
  // Overrides; flags win over the config file.
  std::optional<std::string> algo, mode, threshold;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> shards, epochs;
  std::optional<double> tol;
};

bool soft_failure(const SimulationRun& run) {
  for (const auto& e : run.epochs)
    if (e.rebalance && e.rebalance->diffusion &&
        (!e.rebalance->diffusion->converged || !e.rebalance->diffusion->migration_complete))
      return true;
  return false;
}

int run_simulate(const SimulateArgs& a) {
  Json jc = a.config.empty() ? Json::object() : read_json(a.config);
  if (a.shards) {
    jc["shards"] = *a.shards;
    if (jc.contains("topology") && jc["topology"].contains("n")) jc["topology"]["n"] = *a.shards;
  }
  if (a.algo) jc["algorithm"] = *a.algo;
  if (a.seed) jc["seed"] = *a.seed;
  if (a.tol) jc["diffusion"]["tolerance"] = *a.tol;
  if (a.epochs) jc["epochs"]["count"] = *a.epochs;
  if (a.mode) jc["epochs"]["mode"] = *a.mode;
  if (a.threshold) jc["outlier_threshold"] = *a.threshold;
  const auto cfg = config_from_json(jc);

  const auto txs = read_transactions(a.input, cfg.scale);
  const bool tracing = !a.trace_dir.empty();
  const auto run = run_simulation(cfg, txs, tracing);

  write_json(a.out, simulation_report_to_json(cfg, run, utc_now()));
  if (!a.shard_csv.empty()) {
    auto out = open_out(a.shard_csv);
    write_shard_csv(out, run.epochs);
  }
  if (tracing) {
    const fs::path dir(a.trace_dir);
    fs::create_directories(dir);
    {
      auto out = open_out(dir / "shards.csv");
      write_shard_csv(out, run.epochs);
    }
    for (std::size_t e = 0; e < run.epochs.size(); ++e) {
      const auto& art = run.artifacts[e];
      const auto tag = std::to_string(run.epochs[e].epoch);
      if (art.diffusion) {
        auto out = open_out(dir / ("diffusion_epoch" + tag + ".csv"));
        write_diffusion_trace(out, *art.diffusion);
        auto log = open_out(dir / ("migration_epoch" + tag + ".csv"));
        write_migration_log(log, art.moves);
      }
    }
  }

  std::cout << "transactions " << run.transactions_in << " (kept " << run.transactions_kept
            << ", removed " << run.transactions_removed << "), accounts " << run.accounts << '\n';
  for (const auto& e : run.epochs) {
    std::cout << "epoch " << e.epoch << ": spread " << format_real(e.spread) << ", imbalance "
              << format_real(e.imbalance);
    if (e.rebalance) {
      std::cout << ", rebalance " << to_string(e.rebalance->algorithm);
      if (const auto& d = e.rebalance->diffusion)
        std::cout << " (" << d->iterations << " iterations" << (d->converged ? "" : ", NOT converged")
                  << ", " << d->migration_rounds << " migration rounds"
                  << (d->migration_complete ? "" : ", incomplete") << ")";
      if (const auto& s = e.rebalance->scheduler)
        std::cout << " (makespan " << format_real(s->makespan) << ")";
    }
    std::cout << '\n';
  }
  if (a.strict && soft_failure(run)) {
    std::cerr << "strict: diffusion did not converge or migration is incomplete\n";
    return kExitStrict;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- balance

struct BalanceArgs {
  std::string algo;
  std::string input;
  std::string out;
  std::string trace_dir;
  std::string topology;  // JSON file with a topology object
  std::optional<std::size_t> shards;
  std::uint64_t seed = 1;
  double tol = 1.0;
  std::size_t max_iters = 10000;
  std::string weights = "exact";
  std::size_t k = 7;
  std::string packing = "ffd";
  std::optional<std::size_t> max_rounds;
  bool strict = false;
};

int run_balance(const BalanceArgs& a) {
  auto file = costs_from_json(read_json(a.input));
  const std::size_t n = a.shards.value_or(file.shards.value_or(
      file.assignment ? file.assignment->shard_count() : std::size_t{10}));

  Assignment asg(n);
  if (file.assignment) {
    if (file.assignment->shard_count() != n)
      throw DataError("assignment in input uses " + std::to_string(file.assignment->shard_count()) +
                      " shards, --shards says " + std::to_string(n));
    asg = *file.assignment;
    for (const auto& [acct, _] : file.costs.entries())
      if (!asg.contains(acct)) throw DataError("account '" + acct + "' has no shard in input");
  } else {
    asg = initial_assignment(file.costs.accounts(), n, a.seed);
  }

  SimConfig cfg;
  cfg.shards = n;
  cfg.algorithm = parse_algorithm(a.algo);
  cfg.tolerance = a.tol;
  cfg.max_iterations = a.max_iters;
  cfg.weights = parse_weight_mode(a.weights);
  cfg.multifit_rounds = a.k;
  cfg.packing = parse_packing(a.packing);
  cfg.migration_max_rounds = a.max_rounds;
  cfg.scale = file.costs.scale();
  if (!a.topology.empty()) cfg.topology = topology_from_json(read_json(a.topology), n);
  validate(cfg);

  const auto g = cfg.topology.build(n);
  const auto w = metropolis_weights(g, cfg.weights);
  const bool tracing = !a.trace_dir.empty();
  const auto before = to_real(shard_loads(asg, file.costs), cfg.scale);
  auto result = rebalance(asg, file.costs, cfg, g, w, tracing);
  const auto after = to_real(shard_loads(result.assignment, file.costs), cfg.scale);

  print_loads(std::cout, "before", before);
  print_loads(std::cout, "after ", after);
  std::cout << "makespan " << trimmed(makespan(result.assignment, file.costs), cfg.scale) << '\n';
  if (const auto& d = result.telemetry.diffusion)
    std::cout << "diffusion iterations " << d->iterations << (d->converged ? "" : " (NOT converged)")
              << ", migration rounds " << d->migration_rounds
              << (d->migration_complete ? "" : " (incomplete)") << ", residual "
              << format_real(d->residual_total) << '\n';

  if (!a.out.empty()) {
    Json j = costs_to_json(file.costs, &result.assignment);
    j["result"] = telemetry_to_json(result.telemetry);
    j["result"]["makespan"] = trimmed(makespan(result.assignment, file.costs), cfg.scale);
    write_json(a.out, j);
  }
  if (tracing && result.diffusion) {
    const fs::path dir(a.trace_dir);
    auto out = open_out(dir / "diffusion.csv");
    write_diffusion_trace(out, *result.diffusion);
    auto log = open_out(dir / "migration.csv");
    write_migration_log(log, result.moves);
  }
  if (a.strict && result.telemetry.diffusion &&
      (!result.telemetry.diffusion->converged || !result.telemetry.diffusion->migration_complete))
    return kExitStrict;
  return kExitOk;
}

// ---------------------------------------------------------------- oracle

int run_oracle(const std::string& input, std::size_t shards, const std::string& out) {
  const auto file = costs_from_json(read_json(input));
  const auto best = brute_force_optimal(file.costs, shards);
  std::cout << trimmed(best.detail.makespan, file.costs.scale()) << '\n';
  if (!out.empty()) {
    Json j = costs_to_json(file.costs, &best.assignment);
    j["result"] = {{"algorithm", "brute_force"},
                   {"makespan", trimmed(best.detail.makespan, file.costs.scale())}};
    write_json(out, j);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- gen-fixture

int run_gen_fixture(const FixtureSpec& spec, const std::string& out) {
  const auto txs = generate_fixture(spec);
  auto os = open_out(out);
  write_transactions(os, txs, CsvFormat{spec.scale});
  std::cout << "wrote " << txs.size() << " transactions for " << spec.accounts << " accounts to "
            << out << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Epoch simulator and load balancers for account-based sharded blockchains"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Parse and filter a transaction CSV, emit per-account costs");
  ingest_cmd->add_option("--input", ingest.input, "Transaction CSV")->required();
  ingest_cmd->add_option("--out", ingest.out, "Costs JSON to write")->required();
  ingest_cmd->add_option("--outlier-threshold", ingest.threshold, "Drop transactions with a larger fee");
  ingest_cmd->add_option("--decimal-exponent", ingest.exponent, "Fee units are 10^-exponent")
      ->capture_default_str();

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run the multi-epoch simulation");
  sim_cmd->add_option("--config", sim.config, "Simulation config JSON");
  sim_cmd->add_option("--input", sim.input, "Transaction CSV")->required();
  sim_cmd->add_option("--out", sim.out, "Report JSON to write")->required();
  sim_cmd->add_option("--trace-dir", sim.trace_dir, "Directory for diffusion/migration CSV traces");
  sim_cmd->add_option("--shard-csv", sim.shard_csv, "Per-shard CSV (epoch,shard,load,accounts,transactions)");
  sim_cmd->add_option("--algo", sim.algo, "Override: diffusion|lpt|multifit|none");
  sim_cmd->add_option("--seed", sim.seed, "Override: assignment seed");
  sim_cmd->add_option("--shards", sim.shards, "Override: shard count");
  sim_cmd->add_option("--tol", sim.tol, "Override: diffusion spread tolerance");
  sim_cmd->add_option("--epochs", sim.epochs, "Override: epoch count");
  sim_cmd->add_option("--mode", sim.mode, "Override: replay|time-partition");
  sim_cmd->add_option("--outlier-threshold", sim.threshold, "Override: outlier fee threshold");
  sim_cmd->add_flag("--strict", sim.strict, "Exit 3 on non-convergence or incomplete migration");

  BalanceArgs bal;
  auto* bal_cmd = app.add_subcommand("balance", "Rebalance one cost snapshot");
  bal_cmd->add_option("--algo", bal.algo, "diffusion|lpt|multifit|none")->required();
  bal_cmd->add_option("--input", bal.input, "Costs JSON (from ingest), optional assignment")->required();
  bal_cmd->add_option("--out", bal.out, "Costs JSON with the new assignment");
  bal_cmd->add_option("--shards", bal.shards, "Shard count (default: from input, else 10)");
  bal_cmd->add_option("--seed", bal.seed, "Seed for the initial assignment when the input has none")
      ->capture_default_str();
  bal_cmd->add_option("--topology", bal.topology, "Topology JSON (default ring)");
  bal_cmd->add_option("--tol", bal.tol, "Diffusion spread tolerance")->capture_default_str();
  bal_cmd->add_option("--max-iters", bal.max_iters, "Diffusion iteration cap")->capture_default_str();
  bal_cmd->add_option("--weights", bal.weights, "exact|table-compat")->capture_default_str();
  bal_cmd->add_option("--k", bal.k, "MULTIFIT rounds")->capture_default_str();
  bal_cmd->add_option("--packing", bal.packing, "ffd|next-fit")->capture_default_str();
  bal_cmd->add_option("--max-rounds", bal.max_rounds, "Migration round cap (default 4 x diameter)");
  bal_cmd->add_option("--trace-dir", bal.trace_dir, "Directory for diffusion/migration CSV traces");
  bal_cmd->add_flag("--strict", bal.strict, "Exit 3 on non-convergence or incomplete migration");

  std::string oracle_input, oracle_out;
  std::size_t oracle_shards = 0;
  auto* oracle_cmd = app.add_subcommand("oracle", "Brute-force optimal makespan for small instances");
  oracle_cmd->add_option("--input", oracle_input, "Costs JSON")->required();
  oracle_cmd->add_option("--shards", oracle_shards, "Shard count")->required()->check(CLI::PositiveNumber);
  oracle_cmd->add_option("--out", oracle_out, "Optimal assignment JSON");

  FixtureSpec fx;
  std::string fx_out, fx_skew = "pareto";
  auto* fx_cmd = app.add_subcommand("gen-fixture", "Write a synthetic transaction CSV");
  fx_cmd->add_option("--accounts", fx.accounts, "Number of source accounts")->capture_default_str();
  fx_cmd->add_option("--shards", fx.shards, "Shard count (pointmass skew targets shard 0)")
      ->capture_default_str();
  fx_cmd->add_option("--seed", fx.seed, "Seed")->capture_default_str();
  fx_cmd->add_option("--skew", fx_skew, "uniform|pointmass|pareto")
      ->check(CLI::IsMember({"uniform", "pointmass", "pareto"}))
      ->capture_default_str();
  fx_cmd->add_option("--decimal-exponent", fx.scale.exponent, "Fee units are 10^-exponent")
      ->capture_default_str();
  fx_cmd->add_option("--out", fx_out, "CSV to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (ingest_cmd->parsed()) return run_ingest(ingest);
    if (sim_cmd->parsed()) return run_simulate(sim);
    if (bal_cmd->parsed()) return run_balance(bal);
    if (oracle_cmd->parsed()) return run_oracle(oracle_input, oracle_shards, oracle_out);
    if (fx_cmd->parsed()) {
      fx.skew = parse_skew(fx_skew);
      return run_gen_fixture(fx, fx_out);
    }
  } catch (const shardbal::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

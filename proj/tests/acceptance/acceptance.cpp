// Acceptance gate: one PASS/FAIL line per criterion.
//   acceptance [--cli PATH] [criterion...]
// Exit status is the number of failing criteria (capped at 255).

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "shardbal/shardbal.hpp"

namespace fs = std::filesystem;
using namespace shardbal;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

std::string cli_path;

// ------------------------------------------------------------------ 1

struct TraceRow {
  std::size_t iteration;
  std::vector<double> loads;   // empty: not printed
  std::vector<double> deltas;  // D0[4] D0[1] D1[0] D1[2] D2[1] D2[3] D3[2] D3[4] D4[3] D4[0]
};

const std::vector<TraceRow> kGolden{
    {0, {}, {0.00, -8.58, 8.58, 8.58, -8.58, 0, 0, 0, 0, 0}},
    {1, {8.58, 8.84, 8.58, 0, 0}, {2.83, -8.66, 8.66, 8.66, -8.66, 2.83, -2.83, 0, 0, -2.83}},
    {2, {5.83, 8.66, 5.83, 2.83, 2.83}, {3.82, -9.60, 9.60, 9.60, -9.60, 3.82, -3.82, 0, 0, -3.82}},
    {3, {5.77, 6.79, 5.77, 3.82, 3.82}, {}},
    {4, {5.46, 6.12, 5.46, 4.46, 4.46}, {}},
    {5, {5.35, 5.69, 5.35, 4.69, 5.35}, {}},
    {8, {}, {5.16, -10.37, 10.37, 10.37, -10.37, 5.16, -5.16, 0, 0, -5.16}},
    {9, {5.21, 5.24, 5.21, 5.16, 5.16}, {}},
    {14, {}, {5.19, -10.39, 10.39, 10.39, -10.39, 5.19, -5.19, 0, 0, -5.19}},
    {15, {5.20, 5.20, 5.20, 5.19, 5.19}, {}},
};

const std::vector<std::pair<ShardIndex, ShardIndex>> kDeltaColumns{
    {0, 4}, {0, 1}, {1, 0}, {1, 2}, {2, 1}, {2, 3}, {3, 2}, {3, 4}, {4, 3}, {4, 0}};

Outcome golden_trace() {
  Outcome o;
  const auto g = TopologyGraph::ring(5);
  const auto w = metropolis_weights(g, WeightMode::table_compat);
  // states[t] = after t steps. The printed loads of row k are states[k]; the
  // printed transfer vectors of row k are those computed during iteration k,
  // i.e. states[k + 1].
  std::vector<DiffusionState> states{DiffusionState(std::vector<double>{0, 26, 0, 0, 0})};
  for (int t = 0; t < 16; ++t) states.push_back(diffusion_step(states.back(), w, g));

  std::size_t cells = 0, misses = 0;
  for (const auto& row : kGolden) {
    for (std::size_t i = 0; i < row.loads.size(); ++i) {
      ++cells;
      const double got = states[row.iteration].loads[i];
      if (std::abs(got - row.loads[i]) > 0.02) {
        ++misses;
        o.check(false, "load row " + std::to_string(row.iteration) + " shard " +
                           std::to_string(i) + ": " + fmt(got) + " vs " + fmt(row.loads[i]));
      }
    }
    for (std::size_t c = 0; c < row.deltas.size(); ++c) {
      ++cells;
      const auto [i, j] = kDeltaColumns[c];
      const double got = states[row.iteration + 1].delta(i, j);
      if (std::abs(got - row.deltas[c]) > 0.02) {
        ++misses;
        o.check(false, "delta row " + std::to_string(row.iteration) + " D" + std::to_string(i) +
                           "[" + std::to_string(j) + "]: " + fmt(got) + " vs " + fmt(row.deltas[c]));
      }
    }
  }
  const std::string summary = std::to_string(cells - misses) + "/" + std::to_string(cells) + " cells";
  o.detail = o.detail.empty() ? summary : summary + "; " + o.detail;
  return o;
}

// ------------------------------------------------------------------ 2

std::size_t point_mass_iterations(std::size_t n) {
  const auto g = TopologyGraph::ring(n);
  std::vector<double> loads(n, 0.0);
  loads[1] = 26.0;
  const auto r = run_diffusion(loads, metropolis_weights(g, WeightMode::table_compat), g, 1.0, 10000);
  return r.converged ? r.iterations : 0;
}

Outcome convergence_counts() {
  Outcome o;
  const auto five = point_mass_iterations(5);
  const auto ten = point_mass_iterations(10);
  const auto twenty = point_mass_iterations(20);
  o.check(five == 5, "ring(5) took " + std::to_string(five));
  o.check(ten >= 14 && ten <= 20, "ring(10) took " + std::to_string(ten));
  o.check(twenty >= 48 && twenty <= 54, "ring(20) took " + std::to_string(twenty));
  if (o.pass)
    o.detail = "ring(5)=" + std::to_string(five) + " ring(10)=" + std::to_string(ten) +
               " ring(20)=" + std::to_string(twenty) + " (point mass 26, 0.33 weights)";
  return o;
}

// ------------------------------------------------------------------ 3, 4

struct Instance {
  std::vector<std::int64_t> costs;
  std::size_t shards;
};

std::vector<Instance> bound_instances() {
  Rng rng(20240101);
  std::vector<Instance> out;
  for (int k = 0; k < 500; ++k) {
    Instance inst;
    const auto m = 2 + uniform_index(rng, 11);
    inst.shards = 2 + static_cast<std::size_t>(uniform_index(rng, 3));
    for (std::uint64_t i = 0; i < m; ++i)
      inst.costs.push_back(static_cast<std::int64_t>(1 + uniform_index(rng, 50)));
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<std::int64_t> optima(const std::vector<Instance>& insts) {
  std::vector<std::int64_t> opt;
  for (const auto& in : insts) opt.push_back(brute_force_optimal<std::int64_t>(in.costs, in.shards).makespan);
  return opt;
}

Outcome lpt_bound() {
  Outcome o;
  const auto insts = bound_instances();
  const auto opt = optima(insts);
  std::size_t violations = 0;
  double worst = 0.0;
  for (std::size_t k = 0; k < insts.size(); ++k) {
    const auto n = static_cast<double>(insts[k].shards);
    const double lpt = static_cast<double>(lpt_schedule<std::int64_t>(insts[k].costs, insts[k].shards).makespan);
    const double ratio = lpt / static_cast<double>(opt[k]);
    worst = std::max(worst, ratio);
    if (ratio > 4.0 / 3.0 - 1.0 / (3.0 * n) + 1e-12) ++violations;
  }
  o.check(violations == 0, std::to_string(violations) + " violations");
  if (o.pass) o.detail = "500 instances, worst LPT/OPT " + fmt(worst, 5);
  return o;
}

Outcome multifit_bound() {
  Outcome o;
  const auto insts = bound_instances();
  const auto opt = optima(insts);
  const double bound = 1.22 + std::ldexp(1.0, -7);
  std::size_t violations = 0, halving = 0;
  double worst = 0.0;
  for (std::size_t k = 0; k < insts.size(); ++k) {
    const auto r = multifit_schedule<std::int64_t>(insts[k].costs, insts[k].shards, 7);
    const double ratio = static_cast<double>(r.makespan) / static_cast<double>(opt[k]);
    worst = std::max(worst, ratio);
    if (ratio > bound + 1e-12) ++violations;
    for (std::size_t t = 1; t < r.capacity_trace.size(); ++t) {
      const auto& p = r.capacity_trace[t - 1];
      const auto& q = r.capacity_trace[t];
      const double expected = 0.5 * (p.upper - p.lower);
      if (std::abs((q.upper - q.lower) - expected) > 1e-12 * std::max(1.0, p.upper)) ++halving;
    }
    if (r.capacity_trace.size() != 7) ++halving;
  }
  o.check(violations == 0, std::to_string(violations) + " bound violations");
  o.check(halving == 0, std::to_string(halving) + " non-halving rounds");
  if (o.pass) o.detail = "500 instances, worst MULTIFIT/OPT " + fmt(worst, 5);
  return o;
}

// ------------------------------------------------------------------ 5

TopologyGraph random_connected(Rng& rng, std::size_t n) {
  std::vector<Edge> edges;
  for (std::size_t v = 1; v < n; ++v) edges.emplace_back(uniform_index(rng, v), v);
  const auto extra = uniform_index(rng, 2 * n + 1);
  for (std::uint64_t e = 0; e < extra; ++e) {
    const auto a = uniform_index(rng, n), b = uniform_index(rng, n);
    if (a != b) edges.emplace_back(a, b);
  }
  return TopologyGraph::from_edges(n, edges);
}

Outcome conservation() {
  Outcome o;
  Rng rng(5);
  double drift = 0.0, ledger = 0.0, antisym = 0.0;
  std::size_t increases = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = 2 + static_cast<std::size_t>(uniform_index(rng, 31));
    const auto g = random_connected(rng, n);
    const auto w = metropolis_weights(g);
    std::vector<double> x0(n);
    for (auto& v : x0) v = 100.0 * uniform01(rng);
    const double total0 = std::accumulate(x0.begin(), x0.end(), 0.0);
    DiffusionState s(x0);
    double prev = spread(s.loads);
    for (int t = 0; t < 1000; ++t) {
      s = diffusion_step(s, w, g);
      const double total = std::accumulate(s.loads.begin(), s.loads.end(), 0.0);
      drift = std::max(drift, std::abs(total - total0) / total0);
      for (std::size_t i = 0; i < n; ++i) {
        double out = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          out += s.delta(i, j);
          antisym = std::max(antisym, std::abs(s.delta(i, j) + s.delta(j, i)));
        }
        ledger = std::max(ledger, std::abs(s.loads[i] - (x0[i] - out)));
      }
      const double sp = spread(s.loads);
      // Rounding slack relative to the load magnitude; see the README.
      if (sp > prev + 1e-12 * 100.0) ++increases;
      prev = sp;
    }
  }
  o.check(drift <= 1e-9, "drift " + fmt(drift));
  o.check(ledger <= 1e-9, "ledger " + fmt(ledger));
  o.check(antisym <= 1e-12, "antisymmetry " + fmt(antisym));
  o.check(increases == 0, std::to_string(increases) + " spread increases");
  if (o.pass)
    o.detail = "drift " + fmt(drift, 3) + ", ledger " + fmt(ledger, 3) + ", antisymmetry " +
               fmt(antisym, 3);
  return o;
}

// ------------------------------------------------------------------ 6

Outcome migration_locality() {
  Outcome o;
  const double tol = 1.0;
  std::string summary;
  for (std::size_t n : {5u, 10u, 20u}) {
    const auto g = TopologyGraph::ring(n);
    Assignment asg(n);
    AccountCosts costs(DecimalScale{0});
    for (int k = 0; k < 26; ++k) {
      const auto id = "u" + std::to_string(k);
      asg.assign(id, 1);
      costs.set(id, 1);
    }
    SimConfig cfg;
    cfg.shards = n;
    cfg.tolerance = tol;
    cfg.scale = costs.scale();
    const auto r = rebalance(asg, costs, cfg, g, metropolis_weights(g));
    const auto& t = *r.telemetry.diffusion;
    for (const auto& mv : r.moves)
      o.check(g.adjacent(mv.from, mv.to), "ring(" + std::to_string(n) + ") move off-edge");
    o.check(t.migration_rounds <= diameter(g),
            "ring(" + std::to_string(n) + ") rounds " + std::to_string(t.migration_rounds));
    const auto loads = to_real(shard_loads(r.assignment, costs), costs.scale());
    const double sp = spread(loads);
    o.check(sp <= tol + 1.0, "ring(" + std::to_string(n) + ") spread " + fmt(sp));
    summary += " ring(" + std::to_string(n) + "): " + std::to_string(t.migration_rounds) +
               " rounds, spread " + fmt(sp);
  }
  if (o.pass) o.detail = "26 unit accounts, tol 1;" + summary;
  return o;
}

// ------------------------------------------------------------------ 7

Outcome replay_parity() {
  Outcome o;
  FixtureSpec spec;  // 1000 accounts, 10 shards, seed 1, pareto
  const auto txs = generate_fixture(spec);
  SimConfig cfg;
  cfg.algorithm = Algorithm::lpt;
  const double lpt = run_simulation(cfg, txs).epochs.at(1).imbalance;
  cfg.algorithm = Algorithm::diffusion;
  const double diff = run_simulation(cfg, txs).epochs.at(1).imbalance;
  o.check(std::abs(diff - lpt) <= 0.01 * lpt, "diffusion " + fmt(diff, 6) + " vs lpt " + fmt(lpt, 6));
  o.check(diff <= 1.05 && lpt <= 1.05, "imbalance above 1.05");
  if (o.pass) o.detail = "epoch-2 imbalance diffusion " + fmt(diff, 6) + ", lpt " + fmt(lpt, 6);
  return o;
}

// ------------------------------------------------------------------ 8

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string without_timestamp(const fs::path& report) {
  std::ifstream in(report);
  auto j = Json::parse(in);
  j.erase("generated_at");
  return j.dump();
}

Outcome determinism() {
  Outcome o;
  if (cli_path.empty()) {
    o.check(false, "no --cli given");
    return o;
  }
  const auto dir = fs::temp_directory_path() / ("shardbal_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };
  const auto cli = q(cli_path);
  const auto fixture = dir / "fx.csv";
  o.check(shell(cli + " gen-fixture --skew pointmass --out " + q(fixture) + " > /dev/null") == 0,
          "gen-fixture failed");
  std::size_t compared = 0;
  for (const char* algo : {"diffusion", "lpt", "multifit", "none"}) {
    for (const char* mode : {"replay", "time-partition"}) {
      std::string reports[2];
      for (int rep = 0; rep < 2; ++rep) {
        const auto out = dir / (std::string(algo) + "_" + mode + "_" + std::to_string(rep) + ".json");
        const int rc = shell(cli + " simulate --input " + q(fixture) + " --algo " + algo +
                           " --mode " + mode + " --epochs 3 --out " + q(out) + " > /dev/null");
        o.check(rc == 0, std::string("simulate ") + algo + " " + mode + " exit " + std::to_string(rc));
        if (rc == 0) reports[rep] = without_timestamp(out);
      }
      o.check(!reports[0].empty() && reports[0] == reports[1],
              std::string(algo) + " " + mode + " reports differ");
      ++compared;
    }
  }
  fs::remove_all(dir);
  if (o.pass) o.detail = std::to_string(compared) + " report pairs identical";
  return o;
}

// ------------------------------------------------------------------ driver

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--cli" && i + 1 < argc) {
      cli_path = argv[++i];
    } else {
      wanted.push_back(std::atoi(arg.c_str()));
    }
  }

  const std::vector<Criterion> criteria{
      {1, "golden_trace", 1.0, golden_trace},
      {2, "convergence_counts", 1.0, convergence_counts},
      {3, "lpt_bound", 30.0, lpt_bound},
      {4, "multifit_bound", 60.0, multifit_bound},
      {5, "conservation_ledger", 30.0, conservation},
      {6, "migration_locality", 10.0, migration_locality},
      {7, "replay_parity", 10.0, replay_parity},
      {8, "determinism", 1e9, determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) o.check(false, "runtime " + fmt(secs, 3) + " s over " + fmt(c.budget_s) + " s");
    if (!o.pass) ++failures;
    std::printf("%s c%d %s (%.3f s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                o.detail.c_str());
  }
  return std::min(failures, 255);
}

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "shardbal/config.hpp"
#include "shardbal/fixture.hpp"
#include "shardbal/report.hpp"
#include "shardbal/sim.hpp"

using namespace shardbal;

namespace {

const DecimalScale kUnits{0};

Transaction tx(std::string hash, std::string src, Units fee, std::int64_t t = 0) {
  Transaction x;
  x.tx_hash = std::move(hash);
  x.block_hash = "b";
  x.source = std::move(src);
  x.destination = "sink";
  x.start_time = t;
  x.amount = "0";
  x.fee = fee;
  return x;
}

std::vector<Transaction> fixture(Skew skew, std::size_t accounts = 1000, std::uint64_t seed = 1) {
  FixtureSpec spec;
  spec.accounts = accounts;
  spec.shards = 10;
  spec.seed = seed;
  spec.skew = skew;
  return generate_fixture(spec);
}

SimConfig config(Algorithm a) {
  SimConfig cfg;
  cfg.algorithm = a;
  return cfg;
}

}  // namespace

TEST(Predict, LastValue) {
  AccountCosts c(kUnits);
  c.set("A", 5);
  c.set("B", 0);
  EXPECT_EQ(predict_costs(c), c);
}

TEST(RunEpoch, TwoAccounts) {
  Assignment asg(2);
  asg.assign("A", 0);
  asg.assign("B", 1);
  const std::vector<Transaction> txs{tx("1", "A", 2), tx("2", "A", 3), tx("3", "B", 4)};
  const auto out = run_epoch(asg, txs, kUnits);
  EXPECT_EQ(out.costs.cost("A"), 5);
  EXPECT_EQ(out.costs.cost("B"), 4);
  EXPECT_EQ(out.report.loads(), (std::vector<double>{5, 4}));
  EXPECT_EQ(out.report.spread, 1.0);
  EXPECT_DOUBLE_EQ(out.report.mean, 4.5);
  EXPECT_DOUBLE_EQ(out.report.imbalance, 5.0 / 4.5);
  EXPECT_EQ(out.report.shards[0].transactions, 2u);
  EXPECT_EQ(out.report.shards[1].accounts, 1u);
}

TEST(RunEpoch, EmptyAndConcentrated) {
  Assignment asg(4);
  asg.assign("A", 2);
  const auto empty = run_epoch(asg, std::vector<Transaction>{}, kUnits);
  EXPECT_EQ(empty.report.spread, 0.0);
  EXPECT_EQ(empty.report.imbalance, 1.0);
  const auto one = run_epoch(asg, std::vector<Transaction>{tx("1", "A", 7)}, kUnits);
  EXPECT_DOUBLE_EQ(one.report.imbalance, 4.0);
}

TEST(RunEpoch, NewAccountsGoToLightestShard) {
  Assignment asg(3);
  asg.assign("A", 0);
  const std::vector<Transaction> txs{tx("1", "A", 5), tx("2", "N1", 2), tx("3", "N2", 1),
                                     tx("4", "N3", 1)};
  const auto out = run_epoch(asg, txs, kUnits);
  EXPECT_EQ(asg.shard_of("N1"), 1u);
  EXPECT_EQ(asg.shard_of("N2"), 2u);
  EXPECT_EQ(asg.shard_of("N3"), 2u);
  EXPECT_EQ(out.report.loads(), (std::vector<double>{5, 2, 2}));
}

TEST(Rebalance, NoneIsIdentity) {
  const auto txs = fixture(Skew::pointmass, 200);
  auto asg = initial_assignment(account_universe(txs), 10, 1);
  const auto costs = account_costs(txs);
  const auto g = TopologyGraph::ring(10);
  const auto r = rebalance(asg, costs, config(Algorithm::none), g, metropolis_weights(g));
  EXPECT_EQ(r.assignment, asg);
  EXPECT_FALSE(r.telemetry.diffusion);
  EXPECT_FALSE(r.telemetry.scheduler);
}

TEST(Rebalance, SchedulersAndDiffusionOnPointMass) {
  const auto txs = fixture(Skew::pointmass);
  const auto asg = initial_assignment(account_universe(txs), 10, 1);
  const auto costs = account_costs(txs);
  const auto g = TopologyGraph::ring(10);
  const auto w = metropolis_weights(g);
  const auto before = makespan(asg, costs);

  const auto lpt = rebalance(asg, costs, config(Algorithm::lpt), g, w);
  const auto lpt_ms = makespan(lpt.assignment, costs);
  Units max_cost = 0;
  for (const auto& [_, c] : costs.entries()) max_cost = std::max(max_cost, c);
  // Graham: LPT <= mean + max item.
  EXPECT_LE(lpt_ms, costs.total() / 10 + max_cost);
  EXPECT_LT(lpt_ms, before);
  EXPECT_DOUBLE_EQ(lpt.telemetry.scheduler->makespan, costs.scale().to_real(lpt_ms));

  const auto mf = rebalance(asg, costs, config(Algorithm::multifit), g, w);
  EXPECT_LT(makespan(mf.assignment, costs), before);
  EXPECT_EQ(mf.telemetry.scheduler->capacity_trace.size(), 7u);

  const auto diff = rebalance(asg, costs, config(Algorithm::diffusion), g, w, true);
  ASSERT_TRUE(diff.telemetry.diffusion);
  const auto& t = *diff.telemetry.diffusion;
  EXPECT_TRUE(t.converged);
  EXPECT_TRUE(t.migration_complete);
  EXPECT_LT(makespan(diff.assignment, costs), before);
  const auto after = to_real(shard_loads(diff.assignment, costs), costs.scale());
  // Residual obligations are mostly on different edges; their sum bounds the gap.
  EXPECT_LE(spread(after), 1.0 + 2.0 * t.residual_total);
  ASSERT_TRUE(diff.diffusion);
  EXPECT_EQ(diff.diffusion->load_history.size(), t.iterations + 1);
  EXPECT_EQ(diff.moves.size(), t.accounts_moved);
}

TEST(Rebalance, RejectsUnassignedPredictions) {
  Assignment asg(3);
  AccountCosts c(kUnits);
  c.set("ghost", 1);
  const auto g = TopologyGraph::ring(3);
  EXPECT_THROW(rebalance(asg, c, config(Algorithm::lpt), g, metropolis_weights(g)), DataError);
}

TEST(Simulation, ReplayWithNoneRepeatsTheEpoch) {
  const auto txs = fixture(Skew::pareto, 300);
  const auto run = run_simulation(config(Algorithm::none), txs);
  ASSERT_EQ(run.epochs.size(), 2u);
  EXPECT_EQ(run.epochs[0].shards, run.epochs[1].shards);
  EXPECT_EQ(run.epochs[0].imbalance, run.epochs[1].imbalance);
  EXPECT_EQ(run.accounts, 300u);
  EXPECT_TRUE(run.epochs[0].rebalance);
  EXPECT_FALSE(run.epochs[1].rebalance);
}

TEST(Simulation, SkewedFixtureBalancers) {
  const auto txs = fixture(Skew::pareto);
  auto cfg = config(Algorithm::lpt);
  const auto lpt = run_simulation(cfg, txs);
  EXPECT_LE(lpt.epochs[1].imbalance, 1.01);

  cfg.algorithm = Algorithm::diffusion;
  cfg.weights = WeightMode::table_compat;
  const auto diff = run_simulation(cfg, txs);
  EXPECT_LE(diff.epochs[1].imbalance, 1.01 * lpt.epochs[1].imbalance);
}

TEST(Simulation, EveryBalancerImproves) {
  for (auto skew : {Skew::pareto, Skew::pointmass}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto txs = fixture(skew, 600, seed);
      for (auto algo : {Algorithm::diffusion, Algorithm::lpt, Algorithm::multifit}) {
        auto cfg = config(algo);
        cfg.seed = seed;
        const auto run = run_simulation(cfg, txs);
        EXPECT_LE(run.epochs[1].imbalance, run.epochs[0].imbalance)
            << to_string(algo) << " seed " << seed;
      }
    }
  }
}

TEST(Simulation, Deterministic) {
  const auto txs = fixture(Skew::pointmass, 400);
  for (auto algo : {Algorithm::diffusion, Algorithm::lpt, Algorithm::multifit}) {
    auto cfg = config(algo);
    cfg.epochs = 3;
    const auto a = simulation_report_to_json(cfg, run_simulation(cfg, txs));
    const auto b = simulation_report_to_json(cfg, run_simulation(cfg, txs));
    EXPECT_EQ(a.dump(), b.dump());
  }
}

TEST(Simulation, OutlierFilter) {
  std::vector<Transaction> txs{tx("1", "A", 1), tx("2", "B", 50), tx("3", "C", 2)};
  auto cfg = config(Algorithm::none);
  cfg.scale = kUnits;
  cfg.shards = 3;
  cfg.outlier_threshold = 10;
  const auto run = run_simulation(cfg, txs);
  EXPECT_EQ(run.transactions_kept, 2u);
  EXPECT_EQ(run.transactions_removed, 1u);
  EXPECT_EQ(run.accounts, 2u);
}

TEST(TimePartition, WindowsAndErrors) {
  std::vector<Transaction> txs;
  for (int k = 0; k < 10; ++k) txs.push_back(tx("h" + std::to_string(k), "a", 1, 100 + k));
  const auto w = partition_by_time(txs, 2);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].size(), 5u);
  EXPECT_EQ(w[1].size(), 5u);
  EXPECT_EQ(w[1].front().start_time, 105);
  EXPECT_EQ(partition_by_time(txs, 3)[2].size(), 2u);
  EXPECT_THROW(partition_by_time(std::span<const Transaction>(txs).first(1), 2), DataError);
}

TEST(TimePartition, LaterAccountsJoinMidRun) {
  std::vector<Transaction> txs{tx("1", "A", 6, 0), tx("2", "B", 2, 1), tx("3", "A", 6, 10),
                               tx("4", "C", 3, 11), tx("5", "B", 2, 12)};
  auto cfg = config(Algorithm::lpt);
  cfg.scale = kUnits;
  cfg.shards = 2;
  cfg.mode = EpochMode::time_partition;
  const auto run = run_simulation(cfg, txs);
  ASSERT_EQ(run.epochs.size(), 2u);
  auto first = run.epochs[0].loads();
  std::sort(first.begin(), first.end());
  EXPECT_EQ(first, (std::vector<double>{2, 6}));
  EXPECT_EQ(run.accounts, 3u);
  const auto l = run.epochs[1].loads();
  EXPECT_EQ(l[0] + l[1], 11.0);
  EXPECT_EQ(spread(l), 1.0);

  cfg.epochs = 6;
  EXPECT_THROW(run_simulation(cfg, txs), DataError);
}

TEST(Config, DefaultsAndRoundTrip) {
  const auto cfg = config_from_json(Json::object());
  EXPECT_EQ(cfg.shards, 10u);
  EXPECT_EQ(cfg.algorithm, Algorithm::diffusion);
  EXPECT_EQ(cfg.tolerance, 1.0);
  EXPECT_EQ(cfg.max_iterations, 10000u);
  EXPECT_EQ(cfg.multifit_rounds, 7u);
  EXPECT_EQ(cfg.epochs, 2u);
  EXPECT_FALSE(cfg.outlier_threshold);

  const auto j = Json::parse(R"({
    "shards": 5, "topology": {"kind": "edges", "n": 5,
                              "edges": [[0,1],[1,2],[2,3],[3,4]]},
    "algorithm": "multifit", "diffusion": {"tolerance": 0.03, "weights": "table-compat"},
    "multifit": {"rounds": 9, "packing": "next-fit"}, "migration": {"max_rounds": 3},
    "outlier_threshold": "0.2", "seed": 7, "epochs": {"mode": "time-partition", "count": 4},
    "decimal_exponent": 6})");
  const auto c = config_from_json(j);
  EXPECT_EQ(c.shards, 5u);
  EXPECT_EQ(c.topology.edges.size(), 4u);
  EXPECT_EQ(c.weights, WeightMode::table_compat);
  EXPECT_EQ(c.packing, PackingRule::next_fit);
  EXPECT_EQ(c.migration_max_rounds, 3u);
  EXPECT_EQ(c.outlier_threshold, 200000);
  EXPECT_EQ(c.mode, EpochMode::time_partition);
  const auto again = config_to_json(config_from_json(config_to_json(c)));
  EXPECT_EQ(again, config_to_json(c));
  EXPECT_EQ(diameter(c.topology.build(5)), 4u);

  auto numeric = j;
  numeric["outlier_threshold"] = 0.2;
  EXPECT_EQ(config_from_json(numeric).outlier_threshold, 200000);
}

TEST(Config, Errors) {
  for (const char* bad : {
           R"({"shard": 3})",
           R"({"algorithm": "magic"})",
           R"({"shards": 4, "topology": {"kind": "ring", "n": 5}})",
           R"({"topology": {"kind": "star"}})",
           R"({"diffusion": {"tol": 1}})",
           R"({"diffusion": {"weights": "rounded"}})",
           R"({"multifit": {"packing": "best-fit"}})",
           R"({"epochs": {"mode": "sliding"}})",
           R"({"outlier_threshold": "-1"})",
           R"({"shards": "ten"})",
           R"([])"}) {
    EXPECT_THROW(config_from_json(Json::parse(bad)), Error) << bad;
  }
  EXPECT_THROW(config_from_json(Json::parse(R"({"shards": 0})")), DataError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"diffusion": {"tolerance": 0}})")), DataError);
  EXPECT_THROW(config_from_json(Json::parse(R"({"shards": 2, "topology": {"kind": "ring"}})"))
                   .topology.build(2),
               InvalidTopology);
}

TEST(Report, ShapeAndCsv) {
  const auto txs = fixture(Skew::pointmass, 100);
  auto cfg = config(Algorithm::multifit);
  const auto run = run_simulation(cfg, txs);
  const auto j = simulation_report_to_json(cfg, run, "2026-01-01T00:00:00Z");
  EXPECT_EQ(j["schema"], "shardbal.report");
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["epochs"].size(), 2u);
  EXPECT_EQ(j["epochs"][0]["shards"].size(), 10u);
  EXPECT_EQ(j["epochs"][0]["rebalance"]["scheduler"]["capacity_trace"].size(), 7u);
  EXPECT_TRUE(j["epochs"][1]["rebalance"].is_null());
  std::ostringstream csv;
  write_shard_csv(csv, run.epochs);
  const auto text = csv.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "epoch,shard,load,accounts,transactions");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 21);
}

TEST(CostsFile, RoundTrip) {
  AccountCosts c(DecimalScale{3});
  c.set("x", 1500);
  c.set("y", 2);
  Assignment asg(4);
  asg.assign("x", 3);
  asg.assign("y", 0);
  const auto f = costs_from_json(costs_to_json(c, &asg));
  EXPECT_EQ(f.costs, c);
  ASSERT_TRUE(f.assignment);
  EXPECT_EQ(*f.assignment, asg);
  EXPECT_EQ(f.shards, 4u);
  EXPECT_THROW(costs_from_json(Json::parse(R"({"costs": {"a": "x"}})")), ParseError);
  EXPECT_THROW(costs_from_json(Json::parse(R"({"cost": {}})")), ParseError);
}

#include "stp/planner.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "stp/evaluate.hpp"
#include "stp/rng.hpp"

namespace stp {
namespace {

// Monte-Carlo oracle: draw from every path law, tally the argmin.
std::vector<double> mc_optimality(const std::vector<Gaussian>& dists,
                                  int draws, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> wins(dists.size(), 0.0);
  for (int d = 0; d < draws; ++d) {
    double best = 0.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < dists.size(); ++i) {
      double v = dists[i].mean + dists[i].stddev() * rng.normal();
      if (i == 0 || v < best) {
        best = v;
        arg = i;
      }
    }
    wins[arg] += 1.0;
  }
  for (auto& w : wins) w /= draws;
  return wins;
}

// Closed form for two independent Gaussians:
// P[X1 < X2] = Phi((mu2 - mu1) / sqrt(v1 + v2)).
double two_path_closed_form(const Gaussian& a, const Gaussian& b) {
  return normal_cdf((b.mean - a.mean) / std::sqrt(a.var + b.var));
}

TEST(Optimality, TwoIdenticalPaths) {
  std::vector<Gaussian> dists = {{600.0, 900.0}, {600.0, 900.0}};
  auto res = optimality_indices(dists);
  EXPECT_NEAR(res.normalized[0], 0.5, 1e-9);
  EXPECT_NEAR(res.normalized[1], 0.5, 1e-9);
  EXPECT_NEAR(res.raw_sum, 1.0, 1e-4);
}

TEST(Optimality, TwoPathClosedFormExamples) {
  {
    std::vector<Gaussian> dists = {{600.0, 225.0}, {840.0, 1600.0}};
    auto res = optimality_indices(dists);
    double want = normal_cdf(240.0 / std::sqrt(225.0 + 1600.0));
    EXPECT_NEAR(res.normalized[0], want, 1e-4);
    EXPECT_GT(res.normalized[0], 0.9999);
  }
  {
    std::vector<Gaussian> dists = {{600.0, 45.0 * 45.0}, {660.0, 60.0 * 60.0}};
    auto res = optimality_indices(dists);
    double want = normal_cdf(0.8);  // 60 / 75
    EXPECT_NEAR(want, 0.7881, 5e-5);
    EXPECT_NEAR(res.normalized[0], want, 1e-4);
  }
}

TEST(Optimality, ThreeIidPaths) {
  std::vector<Gaussian> dists = {{500.0, 400.0}, {500.0, 400.0}, {500.0, 400.0}};
  auto res = optimality_indices(dists);
  for (double c : res.normalized) EXPECT_NEAR(c, 1.0 / 3.0, 0.005);
}

TEST(Optimality, MatchesMonteCarloOracle) {
  Rng rng(101);
  for (int rep = 0; rep < 8; ++rep) {
    int k = 2 + static_cast<int>(rng.below(5));
    std::vector<Gaussian> dists;
    for (int i = 0; i < k; ++i) {
      double mu = rng.uniform(500.0, 1200.0);
      double sd = rng.uniform(20.0, 150.0);
      dists.push_back({mu, sd * sd});
    }
    auto res = optimality_indices(dists);
    auto mc = mc_optimality(dists, 200000, 9000 + rep);
    for (int i = 0; i < k; ++i) {
      EXPECT_NEAR(res.normalized[i], mc[i], 0.012) << "rep " << rep;
    }
  }
}

TEST(Optimality, PartitionProperty) {
  Rng rng(102);
  for (int rep = 0; rep < 30; ++rep) {
    int k = 2 + static_cast<int>(rng.below(5));
    std::vector<Gaussian> dists;
    for (int i = 0; i < k; ++i) {
      double mu = rng.uniform(400.0, 2000.0);
      double sd = rng.uniform(10.0, 300.0);
      dists.push_back({mu, sd * sd});
    }
    auto res = optimality_indices(dists);
    EXPECT_GE(res.raw_sum, 0.98);
    EXPECT_LE(res.raw_sum, 1.02);
  }
}

TEST(Optimality, ScaleInvariance) {
  std::vector<Gaussian> dists = {
      {600.0, 2025.0}, {660.0, 3600.0}, {700.0, 400.0}};
  auto base = optimality_indices(dists);
  for (double scale : {1.0 / 60.0, 60.0}) {
    std::vector<Gaussian> scaled;
    for (const auto& d : dists) {
      scaled.push_back({d.mean * scale, d.var * scale * scale});
    }
    auto res = optimality_indices(scaled);
    for (std::size_t i = 0; i < dists.size(); ++i) {
      EXPECT_NEAR(res.normalized[i], base.normalized[i], 1e-6);
    }
  }
}

TEST(Optimality, MonotoneInMean) {
  Rng rng(103);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<Gaussian> dists;
    for (int i = 0; i < 4; ++i) {
      dists.push_back({rng.uniform(500.0, 900.0),
                       std::pow(rng.uniform(30.0, 90.0), 2.0)});
    }
    auto before = optimality_indices(dists);
    dists[2].mean -= 50.0;
    auto after = optimality_indices(dists);
    EXPECT_GE(after.normalized[2], before.normalized[2] - 1e-6);
  }
}

TEST(Optimality, DegenerateSpikesResolve) {
  // near-deterministic paths with very different scales
  std::vector<Gaussian> dists = {{600.0, 1e-4}, {601.0, 1e-4}, {2000.0, 1e-4}};
  auto res = optimality_indices(dists);
  EXPECT_GT(res.normalized[0], 0.999);
  EXPECT_LT(res.normalized[1], 1e-3);
  EXPECT_LT(res.normalized[2], 1e-3);
}

TEST(Optimality, BadInputsRejected) {
  EXPECT_THROW(optimality_indices({}), std::invalid_argument);
  EXPECT_THROW(optimality_indices({{100.0, 0.0}}), std::invalid_argument);
}

TEST(SelectShortest, VarianceTieBreakInsideBand) {
  std::vector<SelectEntry> entries = {{0.50, 40.0, 700.0},
                                      {0.498, 20.0, 720.0}};
  EXPECT_EQ(select_shortest(entries), 1u);
}

TEST(SelectShortest, DominantIndexWinsOutsideBand) {
  std::vector<SelectEntry> entries = {{0.9, 100.0, 800.0}, {0.1, 1.0, 700.0}};
  EXPECT_EQ(select_shortest(entries), 0u);
}

TEST(SelectShortest, ExactTiesStable) {
  std::vector<SelectEntry> entries = {{0.33, 10.0, 700.0},
                                      {0.33, 10.0, 700.0},
                                      {0.33, 10.0, 700.0}};
  EXPECT_EQ(select_shortest(entries), 0u);
}

TEST(SelectShortest, SigmaTieBreaksToSmallerMean) {
  std::vector<SelectEntry> entries = {{0.5, 10.0, 720.0}, {0.5, 10.0, 700.0}};
  EXPECT_EQ(select_shortest(entries), 1u);
}

TEST(TransferProbability, IdenticalIsHalf) {
  EXPECT_DOUBLE_EQ(transfer_probability({300.0, 100.0}, {300.0, 100.0}), 0.5);
}

TEST(TransferProbability, DeterministicIndicator) {
  EXPECT_DOUBLE_EQ(transfer_probability({300.0, 0.0}, {360.0, 0.0}), 1.0);
  EXPECT_DOUBLE_EQ(transfer_probability({360.0, 0.0}, {300.0, 0.0}), 0.0);
  EXPECT_DOUBLE_EQ(transfer_probability({300.0, 0.0}, {300.0, 0.0}), 1.0);
}

TEST(TransferProbability, ClosedFormExample) {
  double p = transfer_probability({300.0, 400.0}, {360.0, 500.0});
  EXPECT_NEAR(p, normal_cdf(2.0), 1e-12);
  EXPECT_NEAR(p, 0.9772, 5e-5);
}

TEST(TransferProbability, Complementary) {
  Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    Gaussian a{rng.uniform(100.0, 500.0), rng.uniform(1.0, 400.0)};
    Gaussian b{rng.uniform(100.0, 500.0), rng.uniform(1.0, 400.0)};
    EXPECT_NEAR(transfer_probability(a, b) + transfer_probability(b, a), 1.0,
                1e-12);
  }
}

// ---- path distribution ----

ModelFn fixed_models(std::map<std::string, Gaussian> laws) {
  return [laws = std::move(laws)](const EdgeKey& e, double) {
    return laws.at(e.str());
  };
}

TEST(PathDistribution, SingleLegIsEdgePosterior) {
  ModelFn m = fixed_models({{"A->B", {300.0, 100.0}}});
  auto pd = path_distribution({{"A", "B"}}, 36000.0, m, zero_covariance());
  EXPECT_DOUBLE_EQ(pd.mean_s, 300.0);
  EXPECT_DOUBLE_EQ(pd.var_s2, 100.0);
}

TEST(PathDistribution, AdditivityWithZeroCovariance) {
  ModelFn m =
      fixed_models({{"A->B", {300.0, 100.0}}, {"B->C", {420.0, 225.0}}});
  auto pd = path_distribution({{"A", "B"}, {"B", "C"}}, 36000.0, m,
                              zero_covariance());
  EXPECT_DOUBLE_EQ(pd.mean_s, 720.0);
  EXPECT_DOUBLE_EQ(pd.var_s2, 325.0);
}

TEST(PathDistribution, CrossCovarianceTerm) {
  ModelFn m =
      fixed_models({{"A->B", {300.0, 100.0}}, {"B->C", {420.0, 225.0}}});
  CovFn cov = [](const EdgeKey&, const EdgeKey&, double, double, double,
                 double) { return 75.0; };
  auto pd = path_distribution({{"A", "B"}, {"B", "C"}}, 36000.0, m, cov);
  EXPECT_DOUBLE_EQ(pd.var_s2, 325.0 + 150.0);
  EXPECT_DOUBLE_EQ(pd.cross_cov, 75.0);
}

TEST(PathDistribution, SecondLegEvaluatedAtMeanArrival) {
  // second leg's law depends on its entry hour; entry must be depart + mean1
  ModelFn m = [](const EdgeKey& e, double tod) {
    if (e.str() == "A->B") return Gaussian{1800.0, 100.0};
    return Gaussian{tod * 1000.0, 50.0};  // encodes the hour it was asked for
  };
  auto pd =
      path_distribution({{"A", "B"}, {"B", "C"}}, 36000.0, m, zero_covariance());
  // depart 10h, arrive 10.5h
  EXPECT_NEAR(pd.legs[1].mean, 10500.0, 1e-9);
}

TEST(PathDistribution, DegenerateVarianceFloored) {
  ModelFn m =
      fixed_models({{"A->B", {300.0, 100.0}}, {"B->C", {400.0, 100.0}}});
  CovFn cov = [](const EdgeKey&, const EdgeKey&, double, double, double,
                 double) { return -1000.0; };  // would drive variance negative
  auto pd = path_distribution({{"A", "B"}, {"B", "C"}}, 0.0, m, cov);
  // clamped to -sqrt(v1 v2) = -100 first: var = 200 - 200 = 0 -> floored
  EXPECT_TRUE(pd.var_floored);
  EXPECT_NEAR(pd.var_s2, 0.01 * 700.0 * 700.0, 1e-9);
}

// ---- ranked paths on the example network ----

TransitGraph example_network() {
  std::vector<Stop> stops = {
      {"vs", "s", 28.50, 77.10}, {"v1", "1", 28.51, 77.10},
      {"v2", "2", 28.52, 77.09}, {"v3", "3", 28.52, 77.11},
      {"vt", "t", 28.53, 77.10},
  };
  std::vector<RouteDef> routes = {
      {"blue", {"vs", "v1", "v2", "vt"}},
      {"green", {"v1", "v3", "vt"}},
      {"red", {"v1", "vt"}},
  };
  return build_graph(stops, routes);
}

ModelFn example_models() {
  return fixed_models({
      {"vs->v1", {300.0, 100.0}},
      {"v1->v2", {400.0, 225.0}},
      {"v2->vt", {500.0, 225.0}},
      {"v1->v3", {450.0, 400.0}},
      {"v3->vt", {420.0, 400.0}},
      {"v1->vt", {1000.0, 2500.0}},
  });
}

TEST(RankedPaths, ExampleNetworkRanksThreeOptions) {
  TransitGraph g = example_network();
  PlannerOptions opts;
  opts.headway_s = 0.0;  // pure travel-time comparison
  PlanResult plan = ranked_paths(g, "v1", "vt", 36000.0, example_models(),
                                 zero_covariance(), {}, opts);
  ASSERT_EQ(plan.ranked.size(), 3u);
  EXPECT_NEAR(plan.raw_index_sum, 1.0, 0.02);
  double sum = 0.0;
  for (const auto& p : plan.ranked) sum += p.optimality;
  EXPECT_NEAR(sum, 1.0, 1e-9);
  // via v3 (870s) and via v2 (900s) beat direct (1000s); selected is first
  EXPECT_EQ(plan.selected().candidate.transfer_stop.value_or("direct"), "v3");
  // MC oracle agreement on the three assembled laws
  std::vector<Gaussian> dists;
  std::vector<std::string> keys;
  for (const auto& p : plan.ranked) {
    dists.push_back({p.total_mean_s, p.total_var_s2});
    keys.push_back(p.candidate.transfer_stop.value_or("direct"));
  }
  auto mc = mc_optimality(dists, 400000, 31337);
  for (std::size_t i = 0; i < dists.size(); ++i) {
    EXPECT_NEAR(plan.ranked[i].optimality, mc[i], 0.01) << keys[i];
  }
}

TEST(RankedPaths, EmptyFeedUsesHalfHeadwayPerBoarding) {
  TransitGraph g = example_network();
  PlannerOptions opts;
  opts.headway_s = 600.0;
  PlanResult plan = ranked_paths(g, "v1", "vt", 36000.0, example_models(),
                                 zero_covariance(), {}, opts);
  for (const auto& p : plan.ranked) {
    // every Fig-style candidate here rides one bus: exactly one boarding
    ASSERT_EQ(p.waits_s.size(), 1u);
    EXPECT_DOUBLE_EQ(p.waits_s[0], 300.0);
    double legsum = 0.0;
    for (const auto& l : p.legs) legsum += l.mean;
    EXPECT_DOUBLE_EQ(p.total_mean_s, legsum + 300.0);
  }
}

TransitGraph transfer_network() {
  // A -> V on r1, V -> B on r2; V is a hub (extra feeder); true transfer
  std::vector<Stop> stops = {
      {"A", "a", 28.50, 77.10},
      {"V", "v", 28.51, 77.10},
      {"B", "b", 28.52, 77.10},
      {"X", "x", 28.50, 77.11},
  };
  std::vector<RouteDef> routes = {
      {"r1", {"A", "V"}}, {"r2", {"V", "B"}}, {"r3", {"X", "V"}}};
  return build_graph(stops, routes);
}

TEST(RankedPaths, TrueTransferGetsTwoWaits) {
  TransitGraph g = transfer_network();
  ModelFn m = fixed_models({{"A->V", {400.0, 225.0}},
                            {"V->B", {500.0, 225.0}},
                            {"X->V", {100.0, 25.0}}});
  PlannerOptions opts;
  opts.headway_s = 600.0;
  PlanResult plan =
      ranked_paths(g, "A", "B", 36000.0, m, zero_covariance(), {}, opts);
  ASSERT_EQ(plan.ranked.size(), 1u);
  const RankedPath& p = plan.selected();
  ASSERT_EQ(p.waits_s.size(), 2u);
  EXPECT_DOUBLE_EQ(p.waits_s[0], 300.0);
  EXPECT_DOUBLE_EQ(p.waits_s[1], 300.0);
  EXPECT_DOUBLE_EQ(p.total_mean_s, 300.0 + 400.0 + 300.0 + 500.0);
}

TEST(RankedPaths, DirectPathShiftedByBusWait) {
  std::vector<Stop> stops = {{"A", "a", 28.50, 77.10}, {"B", "b", 28.51, 77.10}};
  TransitGraph g = build_graph(stops, {{"r1", {"A", "B"}}});
  ModelFn m = fixed_models({{"A->B", {600.0, 225.0}}});
  EtaFeed eta;
  eta.add("A", "r1", {36120.0, std::nullopt});  // bus in 120 s
  PlanResult plan =
      ranked_paths(g, "A", "B", 36000.0, m, zero_covariance(), eta, {});
  ASSERT_EQ(plan.ranked.size(), 1u);
  EXPECT_DOUBLE_EQ(plan.selected().total_mean_s, 720.0);
  EXPECT_NEAR(std::sqrt(plan.selected().total_var_s2), 15.0, 1e-12);
  EXPECT_EQ(plan.selected().chosen_routes[0], "r1");
}

TEST(RankedPaths, InfeasibleBusSkippedForNextOne) {
  TransitGraph g = transfer_network();
  ModelFn m = fixed_models({{"A->V", {400.0, 225.0}},
                            {"V->B", {500.0, 225.0}},
                            {"X->V", {100.0, 25.0}}});
  EtaFeed eta;
  double depart = 36000.0;
  eta.add("A", "r1", {depart, std::nullopt});
  // user reaches V around depart + 400 (sd 15): a bus 100 s early is more
  // than 3 sigma gone; the one 100 s late is the earliest feasible
  eta.add("V", "r2", {depart + 300.0, std::nullopt});
  eta.add("V", "r2", {depart + 500.0, std::nullopt});

  PlanResult plan =
      ranked_paths(g, "A", "B", depart, m, zero_covariance(), eta, {});
  ASSERT_EQ(plan.ranked.size(), 1u);
  const RankedPath& p = plan.selected();
  ASSERT_EQ(p.waits_s.size(), 2u);
  EXPECT_DOUBLE_EQ(p.waits_s[0], 0.0);    // bus ready at departure
  EXPECT_DOUBLE_EQ(p.waits_s[1], 100.0);  // boarded the +500 bus
  EXPECT_GT(p.feasibility, 0.99);
}

TEST(RankedPaths, BarelyEarlyBusKeptWithItsFeasibility) {
  TransitGraph g = transfer_network();
  ModelFn m = fixed_models({{"A->V", {400.0, 225.0}},
                            {"V->B", {500.0, 225.0}},
                            {"X->V", {100.0, 25.0}}});
  EtaFeed eta;
  double depart = 36000.0;
  eta.add("A", "r1", {depart, std::nullopt});
  // one sigma before the mean arrival: within the 3-sigma window, kept,
  // with transfer probability Phi(-1)
  eta.add("V", "r2", {depart + 385.0, std::nullopt});
  PlanResult plan =
      ranked_paths(g, "A", "B", depart, m, zero_covariance(), eta, {});
  ASSERT_EQ(plan.ranked.size(), 1u);
  EXPECT_NEAR(plan.selected().feasibility, normal_cdf(-1.0), 1e-9);
  EXPECT_DOUBLE_EQ(plan.selected().waits_s[1], 0.0);  // bus before the mean
}

TEST(RankedPaths, GaussianBusArrivalFeasibility) {
  TransitGraph g = transfer_network();
  ModelFn m = fixed_models({{"A->V", {400.0, 225.0}},
                            {"V->B", {500.0, 225.0}},
                            {"X->V", {100.0, 25.0}}});
  EtaFeed eta;
  double depart = 36000.0;
  eta.add("A", "r1", {depart, std::nullopt});
  // bus arrival is itself Gaussian: N(depart + 400, 20^2); the user arrives
  // N(depart + 400, 15^2), so the transfer succeeds with probability
  // Phi(0 / sqrt(225 + 400)) = 0.5
  eta.add("V", "r2", {depart + 400.0, 20.0});
  PlanResult plan =
      ranked_paths(g, "A", "B", depart, m, zero_covariance(), eta, {});
  ASSERT_EQ(plan.ranked.size(), 1u);
  EXPECT_NEAR(plan.selected().feasibility, 0.5, 1e-12);
}

TEST(RankedPaths, NoFeasibleBusExcludesCandidate) {
  std::vector<Stop> stops = {{"A", "a", 28.50, 77.10},
                             {"B", "b", 28.51, 77.10}};
  TransitGraph g = build_graph(stops, {{"r1", {"A", "B"}}});
  ModelFn m = fixed_models({{"A->B", {600.0, 225.0}}});
  EtaFeed eta;
  eta.add("A", "r1", {35000.0, std::nullopt});  // already gone
  PlanResult plan =
      ranked_paths(g, "A", "B", 36000.0, m, zero_covariance(), eta, {});
  EXPECT_TRUE(plan.empty());
  EXPECT_EQ(plan.excluded_no_feasible_bus, 1);
  EXPECT_FALSE(plan.reason.empty());
}

TEST(RankedPaths, RejectsBadEndpoints) {
  TransitGraph g = example_network();
  EXPECT_THROW(ranked_paths(g, "v1", "v1", 0.0, example_models(),
                            zero_covariance(), {}, {}),
               std::invalid_argument);
}

TEST(RankedPaths, OverlapFlagged) {
  // two candidates sharing leg 1 edge: vs->v1 then (v1->vt direct is not
  // shared) -- construct overlap via shared second leg instead
  std::vector<Stop> stops = {
      {"A", "a", 28.50, 77.10}, {"H1", "h", 28.51, 77.09},
      {"H2", "h", 28.51, 77.11}, {"B", "b", 28.52, 77.10},
      {"X", "x", 28.49, 77.09}, {"Y", "y", 28.49, 77.11},
  };
  std::vector<RouteDef> routes = {
      {"r1", {"A", "H1", "B"}}, {"r2", {"A", "H2", "B"}},
      {"r3", {"X", "H1"}},      {"r4", {"X", "H2"}},
      {"r5", {"H1", "Y"}},      {"r6", {"H2", "Y"}},
  };
  TransitGraph g = build_graph(stops, routes);
  ModelFn m = fixed_models({
      {"A->H1", {300.0, 100.0}},
      {"H1->B", {300.0, 100.0}},
      {"A->H2", {320.0, 100.0}},
      {"H2->B", {280.0, 100.0}},
      {"X->H1", {100.0, 25.0}},
      {"X->H2", {100.0, 25.0}},
      {"H1->Y", {100.0, 25.0}},
      {"H2->Y", {100.0, 25.0}},
  });
  PlanResult plan =
      ranked_paths(g, "A", "B", 36000.0, m, zero_covariance(), {}, {});
  ASSERT_EQ(plan.ranked.size(), 2u);
  EXPECT_FALSE(plan.candidates_overlap);  // distinct edges throughout

  // same-route candidates sharing the first edge do overlap
  std::vector<RouteDef> routes2 = {
      {"q1", {"A", "H1", "B"}}, {"q2", {"A", "H1", "Y"}},
      {"q3", {"H1", "B"}},      {"q4", {"X", "H1"}},
  };
  TransitGraph g2 = build_graph(
      {stops[0], stops[1], stops[3], stops[4], stops[5]}, routes2);
  ModelFn m2 = fixed_models({
      {"A->H1", {300.0, 100.0}},
      {"H1->B", {300.0, 100.0}},
      {"H1->Y", {100.0, 25.0}},
      {"X->H1", {100.0, 25.0}},
  });
  PlanResult p2 =
      ranked_paths(g2, "A", "B", 36000.0, m2, zero_covariance(), {}, {});
  // candidates: A->H1->B (two-leg); overlap needs >= 2 candidates sharing an
  // edge; single candidate -> no overlap flag
  EXPECT_EQ(p2.ranked.size(), 1u);
  EXPECT_FALSE(p2.candidates_overlap);
}

// ---- replanning ----

TEST(Replan, AtDestinationEmpty) {
  TransitGraph g = example_network();
  auto cands = enumerate_paths(g, "v1", "vt");
  ReplanResult r = replan(g, cands[0], "vt", "vt", 0.0, example_models(),
                          zero_covariance());
  EXPECT_TRUE(r.plan.empty());
  EXPECT_FALSE(r.switch_recommended);
}

TEST(Replan, UnchangedConditionsKeepPath) {
  TransitGraph g = example_network();
  PlannerOptions opts;
  opts.headway_s = 0.0;
  PlanResult plan = ranked_paths(g, "v1", "vt", 36000.0, example_models(),
                                 zero_covariance(), {}, opts);
  const PathCandidate& active = plan.selected().candidate;
  ReplanResult r = replan(g, active, "vt", "v1", 36000.0, example_models(),
                          zero_covariance(), {}, opts);
  EXPECT_FALSE(r.switch_recommended);
  EXPECT_EQ(r.remaining_rank, 0);
}

TEST(Replan, DisruptionTriggersSwitch) {
  TransitGraph g = example_network();
  PlannerOptions opts;
  opts.headway_s = 0.0;
  PlanResult plan = ranked_paths(g, "v1", "vt", 36000.0, example_models(),
                                 zero_covariance(), {}, opts);
  const PathCandidate& active = plan.selected().candidate;  // via v3
  ASSERT_EQ(active.transfer_stop.value_or(""), "v3");

  // +50% on the remaining leg of the active path
  ModelFn disrupted = [](const EdgeKey& e, double) {
    std::map<std::string, Gaussian> laws = {
        {"vs->v1", {300.0, 100.0}}, {"v1->v2", {400.0, 225.0}},
        {"v2->vt", {500.0, 225.0}}, {"v1->v3", {450.0, 400.0}},
        {"v3->vt", {630.0, 400.0}}, {"v1->vt", {1000.0, 2500.0}},
    };
    return laws.at(e.str());
  };
  ReplanResult r = replan(g, active, "vt", "v1", 36000.0, disrupted,
                          zero_covariance(), {}, opts);
  EXPECT_TRUE(r.switch_recommended);
  EXPECT_NE(r.plan.selected().candidate.transfer_stop.value_or("direct"),
            "v3");
}

// ---- deterministic limit ----

TEST(RankedPaths, DeterministicLimitMatchesBruteForce) {
  Rng rng(555);
  for (int rep = 0; rep < 12; ++rep) {
    int n = 6 + static_cast<int>(rng.below(14));
    std::vector<Stop> stops;
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) {
      std::string id = "s" + std::to_string(i);
      ids.push_back(id);
      stops.push_back({id, id, 28.5 + 0.002 * i, 77.1});
    }
    std::vector<RouteDef> routes;
    int nroutes = 3 + static_cast<int>(rng.below(5));
    for (int r = 0; r < nroutes; ++r) {
      RouteDef rd;
      rd.id = "r" + std::to_string(r);
      int len = 2 + static_cast<int>(rng.below(4));
      std::string prev;
      for (int k = 0; k < len; ++k) {
        std::string next;
        do {
          next = ids[rng.below(ids.size())];
        } while (next == prev);
        rd.stops.push_back(next);
        prev = next;
      }
      routes.push_back(rd);
    }
    TransitGraph g = build_graph(stops, routes);

    std::map<std::string, double> weight;
    for (const auto& e : g.edges) {
      weight[e.key().str()] = rng.uniform(100.0, 900.0);
    }
    ModelFn m = [&weight](const EdgeKey& e, double) {
      return Gaussian{weight.at(e.str()), 1e-6};
    };
    PlannerOptions opts;
    opts.headway_s = 0.0;
    opts.hub_pruning = false;  // validation mode: unpruned enumeration

    for (int q = 0; q < 6; ++q) {
      std::string s = ids[rng.below(ids.size())];
      std::string t = ids[rng.below(ids.size())];
      if (s == t) continue;
      auto cands = enumerate_paths(g, s, t, {.hub_pruning = false});
      if (cands.empty()) continue;

      // brute force: minimal summed weights over the candidate space
      double best = 1e300;
      std::vector<int> best_legs;
      for (const auto& c : cands) {
        double w = 0.0;
        for (int leg : c.legs) w += weight.at(g.edges[leg].key().str());
        if (w < best) {
          best = w;
          best_legs = c.legs;
        }
      }
      PlanResult plan =
          ranked_paths(g, s, t, 36000.0, m, zero_covariance(), {}, opts);
      ASSERT_FALSE(plan.empty());
      EXPECT_EQ(plan.selected().candidate.legs, best_legs)
          << "rep " << rep << " " << s << "->" << t;
    }
  }
}

// ---- evaluation harness ----

TEST(Evaluate, ScheduleEqualToRealizedGivesZeroSavings) {
  TransitGraph g = example_network();
  ModelFn m = example_models();

  // realized history equal to the schedule: constant durations
  std::vector<TravelTimeSample> history;
  ScheduleTable schedule;
  std::map<std::string, double> durations = {
      {"vs->v1", 300.0}, {"v1->v2", 400.0}, {"v2->vt", 500.0},
      {"v1->v3", 450.0}, {"v3->vt", 420.0}, {"v1->vt", 1000.0},
  };
  for (const auto& e : g.edges) {
    for (std::int64_t day = 0; day < 3; ++day) {
      for (int h = 6; h < 23; ++h) {
        TravelTimeSample s;
        s.edge = e.key();
        s.duration_s = durations.at(e.key().str());
        s.depart_tod_hours = h + 0.25;
        s.date = day;
        history.push_back(s);
      }
    }
  }
  // trips every 10 minutes all day, all routes aligned at the same offsets
  // so scheduled waits are identical across candidates
  for (double t0 = 5 * 3600.0; t0 < 23 * 3600.0; t0 += 600.0) {
    schedule.add("blue", "vs", t0);
    schedule.add("blue", "v1", t0 + 300.0);
    schedule.add("blue", "v2", t0 + 700.0);
    schedule.add("blue", "vt", t0 + 1200.0);
    schedule.add("green", "v1", t0);
    schedule.add("green", "v3", t0 + 450.0);
    schedule.add("green", "vt", t0 + 870.0);
    schedule.add("red", "v1", t0);
    schedule.add("red", "vt", t0 + 1000.0);
  }

  std::vector<EvalQuery> queries;
  for (int h = 7; h <= 22; ++h) {
    for (std::int64_t d = 0; d < 3; ++d) queries.push_back({"v1", "vt", h, d});
  }
  PlannerOptions opts;
  opts.headway_s = 600.0;
  EvalReport report = evaluate_static_vs_stochastic(
      g, m, zero_covariance(), history, schedule, queries, opts);
  ASSERT_GT(report.rows.size(), 0u);
  for (const auto& row : report.rows) {
    EXPECT_EQ(row.stochastic_choice, row.static_choice);
    EXPECT_NEAR(row.savings_frac, 0.0, 1e-9);
  }
  EXPECT_FALSE(report.curves.empty());
}

TEST(Evaluate, MissingRealizedDataSkipped) {
  TransitGraph g = example_network();
  ModelFn m = example_models();
  ScheduleTable schedule;
  schedule.add("red", "v1", 6 * 3600.0);
  schedule.add("red", "vt", 6 * 3600.0 + 1000.0);
  std::vector<EvalQuery> queries = {{"v1", "vt", 9, 0}};
  EvalReport report = evaluate_static_vs_stochastic(
      g, m, zero_covariance(), {}, schedule, queries, {});
  EXPECT_EQ(report.rows.size(), 0u);
  EXPECT_EQ(report.skipped, 1);
}

}  // namespace
}  // namespace stp

#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "ssrcps/error.hpp"
#include "ssrcps/ppi.hpp"
#include "ssrcps/sim.hpp"

using namespace ssrcps;
using namespace ssrcps::ppi;
using rcps::LossTable;
using rcps::ParameterGrid;

namespace {

std::vector<std::string> ids(char prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

// Single-column data from three loss vectors.
SemiSupervisedLosses one_column(const std::vector<double>& l, const std::vector<double>& l_imp,
                                const std::vector<double>& u_imp) {
  const auto grid = ParameterGrid::numbered(1);
  return SemiSupervisedLosses(LossTable(grid, ids('l', l.size()), l), LossTable(grid, ids('l', l.size()), l_imp),
                              LossTable(grid, ids('u', u_imp.size()), u_imp));
}

SemiSupervisedLosses hand_example() { return one_column({1, 0}, {1, 0}, {0, 1, 1, 1}); }

std::vector<double> bernoulli(std::mt19937_64& rng, std::size_t n, double p) {
  std::bernoulli_distribution coin(p);
  std::vector<double> v(n);
  for (auto& x : v) x = coin(rng) ? 1.0 : 0.0;
  return v;
}

}  // namespace

TEST(SemiSupervisedLosses, RejectsMismatchedTables) {
  const auto g1 = ParameterGrid::numbered(1);
  const auto g2 = ParameterGrid({"other"});
  EXPECT_THROW(SemiSupervisedLosses(LossTable(g1, {"a"}, {0}), LossTable(g2, {"a"}, {0}), LossTable(g1, {"u"}, {0})),
               DataError);
  EXPECT_THROW(SemiSupervisedLosses(LossTable(g1, {"a"}, {0}), LossTable(g1, {"b"}, {0}), LossTable(g1, {"u"}, {0})),
               DataError);
}

TEST(PpRisk, HandExample) {
  EXPECT_DOUBLE_EQ(pp_risk(hand_example(), 0, 1.0), 0.75);
}

TEST(PpRisk, ReducesToLabeledRiskAtLambdaZero) {
  const auto d = one_column({1, 0, 1}, {0, 0, 0}, {1, 1, 1, 1});
  EXPECT_DOUBLE_EQ(pp_risk(d, 0, 0.0), 2.0 / 3.0);
}

TEST(PpRisk, PerfectImputationGivesUnlabeledMean) {
  const auto d = one_column({1, 0, 1}, {1, 0, 1}, {1, 0, 0, 0});
  EXPECT_DOUBLE_EQ(pp_risk(d, 0, 1.0), 0.25);
}

TEST(BlockPlan, FloorAndTail) {
  const auto p = BlockPlan::make(3, 10);
  EXPECT_EQ(p.block_size, 3u);
  EXPECT_EQ(p.used_unlabeled, 9u);
  EXPECT_EQ(p.dropped_tail, 1u);
  EXPECT_EQ(p.row(1, 0), 3u);
  EXPECT_EQ(p.row(2, 2), 8u);
  EXPECT_THROW(BlockPlan::make(5, 4), std::invalid_argument);
}

TEST(BlockPlan, SeededShuffleIsDeterministic) {
  const auto a = BlockPlan::make(4, 40, 9);
  const auto b = BlockPlan::make(4, 40, 9);
  EXPECT_EQ(a.order, b.order);
  auto sorted = a.order;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(40);
  std::iota(iota.begin(), iota.end(), 0);
  EXPECT_EQ(sorted, iota);
}

TEST(BlockDecompose, HandExample) {
  const auto d = hand_example();
  const auto w = block_decompose(d, 0, BlockPlan::make(2, 4), 1.0);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_DOUBLE_EQ(w.values()[0], 0.5);
  EXPECT_DOUBLE_EQ(w.values()[1], 1.0);
  EXPECT_DOUBLE_EQ(w.mean(), 0.75);
  EXPECT_DOUBLE_EQ(w.support().lo, -1.0);
  EXPECT_DOUBLE_EQ(w.support().hi, 2.0);
}

TEST(BlockDecompose, LambdaZeroIsLabeledLoss) {
  const auto d = one_column({1, 0, 1}, {0, 1, 1}, {1, 1, 1, 0, 0, 0});
  const auto w = block_decompose(d, 0, BlockPlan::make(3, 6), 0.0);
  EXPECT_EQ(std::vector<double>(w.values().begin(), w.values().end()), (std::vector<double>{1, 0, 1}));
  EXPECT_DOUBLE_EQ(w.support().lo, 0.0);
  EXPECT_DOUBLE_EQ(w.support().hi, 1.0);
}

TEST(BlockDecompose, MeanEqualsPpRiskOnUsedRows) {
  std::mt19937_64 rng(5);
  for (double lambda : {1.0, 0.5, -0.7, 2.0}) {
    const auto l = bernoulli(rng, 37, 0.3);
    const auto li = bernoulli(rng, 37, 0.4);
    const auto ui = bernoulli(rng, 37 * 11 + 5, 0.35);
    const auto d = one_column(l, li, ui);
    const auto plan = BlockPlan::make(37, ui.size());
    const auto w = block_decompose(d, 0, plan, lambda);
    std::vector<std::size_t> used(plan.used_unlabeled);
    std::iota(used.begin(), used.end(), 0);
    std::vector<std::size_t> all_labeled(37);
    std::iota(all_labeled.begin(), all_labeled.end(), 0);
    EXPECT_NEAR(w.mean(), pp_risk(d.subset(all_labeled, used), 0, lambda), 1e-12);
    for (double x : w.values()) {
      EXPECT_GE(x, -std::abs(lambda));
      EXPECT_LE(x, 1.0 + std::abs(lambda));
    }
  }
}

TEST(LambdaStar, HandExample) {
  // numpy: cov = 0.1, var = 0.3 (ddof=1); 0.1 / (1.01 * 0.3)
  const std::vector<double> l{1, 0, 1, 0, 1, 0};
  const std::vector<double> li{1, 0, 1, 0, 0, 1};
  const auto est = estimate_lambda_star(l, li, 6.0 / 600.0);
  EXPECT_NEAR(est.value, 0.3300330033003301, 1e-12);
  EXPECT_FALSE(est.degenerate);
}

TEST(LambdaStar, PerfectCorrelationNearOne) {
  const std::vector<double> l{1, 0, 1, 0, 0, 1, 1, 0};
  EXPECT_NEAR(estimate_lambda_star(l, l, 1e-4).value, 1.0 / 1.0001, 1e-12);
}

TEST(LambdaStar, DegenerateImputationGivesZero) {
  const auto est = estimate_lambda_star(std::vector<double>{1, 0, 1}, std::vector<double>{1, 1, 1}, 0.1);
  EXPECT_EQ(est.value, 0.0);
  EXPECT_TRUE(est.degenerate);
}

TEST(ClippedRectifier, HandExample) {
  const auto d = one_column({1, 0, 1}, {0, 1, 1}, {0, 0, 0});
  const auto c = clipped_rectifier(d, 0);
  EXPECT_EQ(c.count, 1);
  EXPECT_EQ(c.n, 3);
  EXPECT_DOUBLE_EQ(clipped_rectifier_risk(d, 0), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(clipped_rectifier_risk(one_column({1, 0}, {1, 1}, {0}), 0), 0.0);
}

TEST(ClippedRectifier, NeverBelowSignedRectifier) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 50; ++rep) {
    const auto l = bernoulli(rng, 25, 0.4);
    const auto li = bernoulli(rng, 25, 0.4);
    const auto d = one_column(l, li, {0.0});
    const double signed_rect = (std::accumulate(l.begin(), l.end(), 0.0) - std::accumulate(li.begin(), li.end(), 0.0)) / 25.0;
    EXPECT_GE(clipped_rectifier_risk(d, 0), signed_rect - 1e-15);
  }
}

TEST(BudgetSplit, SumsToTotal) {
  EXPECT_NO_THROW(BudgetSplit::for_total(0.1, 0.01, 0.09));
  EXPECT_THROW(BudgetSplit::for_total(0.1, 0.02, 0.09), std::invalid_argument);
}

TEST(SsBinary, ZeroFailureColumn) {
  const auto d = one_column(std::vector<double>(130, 0.0), std::vector<double>(130, 0.0),
                            std::vector<double>(1000, 0.0));
  const double expected = (1.0 - std::pow(0.01, 1.0 / 1000.0)) + (1.0 - std::pow(0.09, 1.0 / 130.0));
  EXPECT_NEAR(ss_binary_column_ucb(d, 0, BudgetSplit::for_total(0.1, 0.01, 0.09)), expected, 2e-9);
  EXPECT_NEAR(expected, 0.0229467510036, 1e-12);
}

TEST(SsBinary, SplittingIsNeverFree) {
  // N = n, identical rows, delta1 = delta2: the split bound exceeds one CP at delta1 + delta2.
  for (int n : {20, 60}) {
    for (int k = 0; k < n; k += 3) {
      std::vector<double> l(n, 0.0);
      for (int i = 0; i < k; ++i) l[i] = 1.0;
      const auto d = one_column(l, l, l);
      const double split = ss_binary_column_ucb(d, 0, BudgetSplit::for_total(0.1, 0.05, 0.05));
      const double single = bounds::clopper_pearson_ucb(bounds::BinomialCount(n, k), bounds::ErrorLevel(0.1));
      EXPECT_GT(split, single) << "n=" << n << " k=" << k;
    }
  }
}

TEST(SsBinary, RequiresBinaryLosses) {
  const auto d = one_column({0.5}, {0.5}, {0.5});
  EXPECT_THROW(ss_binary_calibrate(d, 0.2, BudgetSplit::for_total(0.1, 0.01, 0.09)), DataError);
}

TEST(SsGeneral, LambdaZeroMatchesLabeledRcps) {
  std::mt19937_64 rng(2);
  const auto grid = ParameterGrid::numbered(4);
  std::vector<double> lab;
  std::vector<double> imp;
  std::vector<double> unl;
  for (double r : {0.02, 0.05, 0.1, 0.3}) {
    auto c = bernoulli(rng, 200, r);
    lab.insert(lab.end(), c.begin(), c.end());
    auto ci = bernoulli(rng, 200, r);
    imp.insert(imp.end(), ci.begin(), ci.end());
    auto cu = bernoulli(rng, 1000, r);
    unl.insert(unl.end(), cu.begin(), cu.end());
  }
  const SemiSupervisedLosses d(LossTable(grid, ids('l', 200), lab), LossTable(grid, ids('l', 200), imp),
                               LossTable(grid, ids('u', 1000), unl));
  const rcps::RiskSpec spec(0.15, bounds::ErrorLevel(0.1));
  const auto ss = ss_general_calibrate(d, spec, bounds::UcbMethod::wsr, PowerTuning::fixed(0.0));
  const auto lab_only = rcps::fixed_sequence_calibrate(d.labeled_true(), spec, bounds::UcbMethod::wsr);
  EXPECT_EQ(ss.selected, lab_only.selected);
  ASSERT_EQ(ss.ucb_trace.size(), lab_only.ucb_trace.size());
  for (std::size_t i = 0; i < ss.ucb_trace.size(); ++i) EXPECT_NEAR(ss.ucb_trace[i], lab_only.ucb_trace[i], 1e-12);
}

TEST(SsGeneral, RejectsInvalidCombinations) {
  const auto d = hand_example();
  const rcps::RiskSpec spec(0.5, bounds::ErrorLevel(0.1));
  EXPECT_THROW(ss_general_calibrate(d, spec, bounds::UcbMethod::clopper_pearson, PowerTuning::fixed_one()),
               std::invalid_argument);
  EXPECT_THROW(ss_general_calibrate(d, spec, bounds::UcbMethod::wsr, PowerTuning{LambdaMode::clt_inline, 1.0, 0.1}),
               std::invalid_argument);
  // 10% of 2 labeled rows cannot hold the two rows lambda* needs.
  EXPECT_THROW(ss_general_calibrate(d, spec, bounds::UcbMethod::wsr, PowerTuning{LambdaMode::wsr_split, 1.0, 0.1}),
               std::invalid_argument);
}

TEST(SsGeneral, DiagnosticsAndFlags) {
  const auto d = one_column({0, 0, 1, 0}, {0, 0, 1, 1}, {0, 0, 0, 1, 0, 0, 0, 0, 1});
  const rcps::RiskSpec spec(0.9, bounds::ErrorLevel(0.1));
  const auto o = ss_general_calibrate(d, spec, bounds::UcbMethod::clt, PowerTuning{LambdaMode::clt_inline, 1.0, 0.1});
  EXPECT_TRUE(o.asymptotic);
  ASSERT_TRUE(o.semi_supervised);
  EXPECT_EQ(o.semi_supervised->lambda_mode, "clt_inline");
  EXPECT_EQ(o.semi_supervised->block_size, 2u);
  EXPECT_EQ(o.semi_supervised->dropped_tail, 1u);
  EXPECT_EQ(o.semi_supervised->lambda_per_column.size(), 1u);
}

TEST(NaiveAugmented, MarkedUnsafe) {
  const auto o = naive_augmented_calibrate(hand_example(), rcps::RiskSpec(0.9, bounds::ErrorLevel(0.1)));
  EXPECT_TRUE(o.unsafe);
  // Pooled: 1 + 3 failures over 6 trials.
  EXPECT_NEAR(o.ucb_trace.front(), bounds::clopper_pearson_ucb(bounds::BinomialCount(6, 4), bounds::ErrorLevel(0.1)),
              1e-15);
}

TEST(VarianceIdentity, ClippedNeverExceedsUnclipped) {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 100; ++rep) {
    const auto l = bernoulli(rng, 40, 0.3);
    const auto li = bernoulli(rng, 40, 0.3);
    double p1 = 0.0;
    double p2 = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i) {
      p1 += (l[i] == 1.0 && li[i] == 0.0) ? 1.0 : 0.0;
      p2 += (l[i] == 0.0 && li[i] == 1.0) ? 1.0 : 0.0;
    }
    p1 /= 40.0;
    p2 /= 40.0;
    const double unclipped = p1 + p2 - (p1 - p2) * (p1 - p2);
    const double clipped = p1 - p1 * p1;
    EXPECT_GE(unclipped, clipped - 1e-15);
  }
}

TEST(SsGeneral, GoldenCltInlineRegression) {
  // Pinned from the first run of this implementation on the default scenario.
  sim::ScenarioConfig c;
  c.master_seed = 0;
  const auto s = sim::generate_scenario(c, 0);
  const auto o = ss_general_calibrate(s.data, rcps::RiskSpec(c.alpha, bounds::ErrorLevel(c.delta)),
                                      bounds::UcbMethod::clt, PowerTuning{LambdaMode::clt_inline, 1.0, 0.1});
  ASSERT_TRUE(o.selected);
  EXPECT_EQ(*o.selected, 37u);
  EXPECT_EQ(o.stop_index, 38u);
  EXPECT_NEAR(o.ucb_trace.back(), 0.16320004990508941, 1e-12);
  EXPECT_TRUE(o.asymptotic);
}

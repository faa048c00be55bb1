#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ssrcps/error.hpp"
#include "ssrcps/etsc.hpp"
#include "ssrcps/sim.hpp"

using namespace ssrcps;
using namespace ssrcps::etsc;

namespace {

EtscSample make(std::string id, std::vector<double> conf, std::vector<Label> early, Label full,
                std::optional<Label> truth, std::optional<Label> imputed = std::nullopt) {
  EtscSample s;
  s.id = std::move(id);
  s.confidence = std::move(conf);
  s.early_pred = std::move(early);
  s.full_pred = full;
  s.true_label = truth;
  s.imputed_label = imputed;
  return s;
}

const double inf = kNeverHalt;

sim::ScenarioConfig stream_config() {
  sim::ScenarioConfig c;
  c.kind = sim::ScenarioKind::etsc_basic;
  c.n_labeled = 300;
  c.n_unlabeled = 20000;
  c.n_test = 2000;
  c.imputation_accuracy = 0.93;
  c.alpha = 0.1;
  c.delta = 0.01;
  c.delta1 = 0.001;
  c.delta2 = 0.009;
  c.master_seed = 77;
  return c;
}

}  // namespace

TEST(Validate, RejectsMalformedSamples) {
  EXPECT_THROW(validate(make("a", {0.5, 0.6}, {1}, 1, 1)), DataError);
  EXPECT_THROW(validate(make("a", {1.5}, {1}, 1, 1)), DataError);
  EXPECT_THROW(validate(make("a", {}, {}, 1, 1)), DataError);
  EXPECT_NO_THROW(validate(make("a", {0.0, 1.0}, {0, 1}, 1, 1)));
}

TEST(ThresholdVector, ValidatesEntries) {
  EXPECT_THROW(ThresholdVector({1.2}), std::invalid_argument);
  EXPECT_THROW(ThresholdVector({-inf}), std::invalid_argument);
  EXPECT_THROW(ThresholdVector(std::vector<double>{}), std::invalid_argument);
  EXPECT_TRUE(ThresholdVector::identity(3).is_identity());
  EXPECT_FALSE(ThresholdVector({inf, 0.5}).is_identity());
}

TEST(HaltTime, FirstCrossingWithTiesHalting) {
  const auto s = make("a", {0.3, 0.8, 0.95}, {0, 1, 1}, 1, 1);
  EXPECT_EQ(halt_time(s, ThresholdVector({0.5, 0.8, 0.9})), 2u);  // 0.8 >= 0.8
  EXPECT_EQ(halt_time(s, ThresholdVector({0.3, 0.0, 0.0})), 1u);
  EXPECT_EQ(halt_time(s, ThresholdVector({inf, inf, 0.99})), 3u);
  EXPECT_EQ(halt_time(s, ThresholdVector::identity(3)), 3u);
  EXPECT_THROW(halt_time(s, ThresholdVector({0.5})), std::invalid_argument);
}

TEST(GapLoss, Cases) {
  const auto s = make("a", {0.9, 0.9}, {0, 1}, 1, 1, 0);
  // Full correct, early wrong: loss 1.
  EXPECT_EQ(gap_loss_for_label(s, 1, 1), 1);
  // Both correct.
  EXPECT_EQ(gap_loss_for_label(s, 1, 2), 0);
  // Early correct, full wrong: clipped to 0.
  EXPECT_EQ(gap_loss_for_label(s, 0, 1), 0);
  // Both wrong.
  EXPECT_EQ(gap_loss_for_label(s, 2, 1), 0);
  EXPECT_EQ(gap_loss(s, LabelSource::truth, ThresholdVector({0.5, 0.5})), 1);
  EXPECT_EQ(gap_loss(s, LabelSource::imputed, ThresholdVector({0.5, 0.5})), 0);
  const auto unlabeled = make("u", {0.9}, {0}, 0, std::nullopt);
  EXPECT_THROW(gap_loss(unlabeled, LabelSource::truth, ThresholdVector({0.5})), DataError);
}

TEST(HaltCurve, HandExample) {
  const std::vector<EtscSample> s{make("a", {0.9, 0.9}, {1, 1}, 1, 1), make("b", {0.1, 0.9}, {1, 1}, 1, 1)};
  EXPECT_EQ(halt_curve(s, ThresholdVector({0.8, 0.8})), (std::vector<double>{0.5, 1.0}));
  EXPECT_EQ(halt_curve(s, ThresholdVector::identity(2)), (std::vector<double>{0.0, 1.0}));
}

TEST(ConditionalRisk, EmptyHaltSet) {
  const std::vector<EtscSample> s{make("a", {0.1, 0.9}, {0, 1}, 1, 1)};
  EXPECT_FALSE(conditional_empirical_risk(s, LabelSource::truth, ThresholdVector({0.5, 0.5}), 1).has_value());
  EXPECT_EQ(*conditional_empirical_risk(s, LabelSource::truth, ThresholdVector({0.5, 0.5}), 2), 0.0);
}

TEST(Evaluate, ReportsFirstHaltTime) {
  const std::vector<EtscSample> s{make("a", {0.1, 0.9, 0.9}, {0, 0, 1}, 1, 1),
                                  make("b", {0.1, 0.2, 0.9}, {0, 1, 1}, 1, 1)};
  const auto r = evaluate(s, ThresholdVector({0.5, 0.5, 0.5}));
  ASSERT_TRUE(r.t0);
  EXPECT_EQ(*r.t0, 2u);
  EXPECT_FALSE(r.conditional_risk[0]);
  EXPECT_DOUBLE_EQ(*r.conditional_risk[1], 1.0);
  EXPECT_DOUBLE_EQ(*r.conditional_risk[2], 0.5);
}

TEST(Screening, AlphaOneGivesZeroThresholds) {
  const auto sc = sim::generate_etsc_scenario(stream_config(), 0);
  EtscRiskSpec spec;
  spec.alpha = 1.0;
  const auto q = candidate_screening(sc.stage1, spec);
  for (double v : q.values()) EXPECT_EQ(v, 0.0);
}

TEST(Screening, ThresholdsControlScreeningRisk) {
  const auto sc = sim::generate_etsc_scenario(stream_config(), 1);
  EtscRiskSpec spec;
  spec.alpha = 0.1;
  const auto q = candidate_screening(sc.stage1, spec);
  for (std::size_t t = 1; t <= q.size(); ++t) {
    if (std::isinf(q[t - 1])) continue;
    ThresholdVector single = ThresholdVector::identity(q.size());
    single.set(t - 1, q[t - 1]);
    const auto risk = conditional_empirical_risk(sc.stage1, LabelSource::truth, single, t);
    ASSERT_TRUE(risk);
    EXPECT_LE(*risk, 0.1);
  }
}

TEST(Stage2, AllInfiniteCandidateStaysIdentity) {
  const auto sc = sim::generate_etsc_scenario(stream_config(), 2);
  EtscRiskSpec spec;
  spec.alpha = 0.1;
  spec.delta = bounds::ErrorLevel(0.01);
  spec.split = ppi::BudgetSplit::for_total(0.01, 0.001, 0.009);
  const auto r = stage2_calibrate(sc.stage2, sc.unlabeled, ThresholdVector::identity(10), spec, Stage2Mode::binary_cp);
  EXPECT_TRUE(r.thresholds.is_identity());
}

TEST(Stage2, RevealsSuffixOfCandidate) {
  const auto sc = sim::generate_etsc_scenario(stream_config(), 3);
  EtscRiskSpec spec;
  spec.alpha = 0.1;
  spec.delta = bounds::ErrorLevel(0.01);
  spec.split = ppi::BudgetSplit::for_total(0.01, 0.001, 0.009);
  const auto cand = candidate_screening(sc.stage1, spec);
  for (auto mode : {Stage2Mode::labeled_only, Stage2Mode::binary_cp, Stage2Mode::general_wsr}) {
    const auto r = stage2_calibrate(sc.stage2, sc.unlabeled, cand, spec, mode);
    const std::size_t t_max = cand.size();
    for (std::size_t t = 0; t < t_max; ++t) {
      if (t + r.revealed >= t_max) {
        EXPECT_EQ(r.thresholds[t], cand[t]);
      } else {
        EXPECT_TRUE(std::isinf(r.thresholds[t]));
      }
    }
    for (const auto& step : r.trace) {
      if (step.revealed_t > t_max - r.revealed) EXPECT_TRUE(step.passed);
    }
  }
}

TEST(Stage2, FirstRevealFailureKeepsIdentity) {
  // Every halted labeled sample carries a gap loss, so no UCB can pass.
  std::vector<EtscSample> lab;
  std::vector<EtscSample> unl;
  for (int i = 0; i < 20; ++i) {
    lab.push_back(make("l" + std::to_string(i), {0.9, 0.9}, {0, 1}, 1, 1, 1));
    unl.push_back(make("u" + std::to_string(i), {0.9, 0.9}, {0, 1}, 1, std::nullopt, 1));
  }
  EtscRiskSpec spec;
  spec.alpha = 0.1;
  const auto r = stage2_calibrate(lab, unl, ThresholdVector({0.5, 0.5}), spec, Stage2Mode::labeled_only);
  EXPECT_TRUE(r.thresholds.is_identity());
  EXPECT_EQ(r.revealed, 0u);
  EXPECT_EQ(r.stop_reason, "ucb_not_below_alpha");
}

TEST(Stage2, BinaryModeNeedsSplit) {
  const std::vector<EtscSample> lab{make("l", {0.9}, {1}, 1, 1, 1)};
  const std::vector<EtscSample> unl{make("u", {0.9}, {1}, 1, std::nullopt, 1)};
  EXPECT_THROW(stage2_calibrate(lab, unl, ThresholdVector({0.5}), EtscRiskSpec{}, Stage2Mode::binary_cp),
               std::invalid_argument);
  EXPECT_THROW(stage2_calibrate(lab, {}, ThresholdVector({0.5}), EtscRiskSpec{}, Stage2Mode::general_wsr),
               std::invalid_argument);
}

TEST(CheckDisjoint, DetectsOverlap) {
  const std::vector<EtscSample> a{make("x", {0.5}, {0}, 0, 0)};
  const std::vector<EtscSample> b{make("y", {0.5}, {0}, 0, 0)};
  EXPECT_NO_THROW(check_disjoint(a, b));
  EXPECT_THROW(check_disjoint(a, a), DataError);
}

TEST(Stage2Mode, Names) {
  EXPECT_EQ(parse_stage2_mode("general_clt"), Stage2Mode::general_clt);
  EXPECT_EQ(to_string(Stage2Mode::binary_cp), "binary_cp");
  EXPECT_THROW(parse_stage2_mode("bogus"), std::invalid_argument);
}

TEST(Stage2, GoldenBinaryRegression) {
  // Pinned from the first run of this implementation.
  auto c = stream_config();
  c.master_seed = 0;
  const auto sc = sim::generate_etsc_scenario(c, 0);
  EtscRiskSpec spec;
  spec.alpha = 0.1;
  spec.delta = bounds::ErrorLevel(0.01);
  spec.split = ppi::BudgetSplit::for_total(0.01, 0.001, 0.009);
  const auto cand = candidate_screening(sc.stage1, spec);
  const std::vector<double> expected_cand{0.70, 0.68, 0.73, 0.83, 0.75, 0.90, 0.79, 0.79, 0.85, 0.0};
  for (std::size_t t = 0; t < cand.size(); ++t) EXPECT_NEAR(cand[t], expected_cand[t], 1e-12) << t;
  const auto r = stage2_calibrate(sc.stage2, sc.unlabeled, cand, spec, Stage2Mode::binary_cp);
  EXPECT_EQ(r.revealed, 7u);
  EXPECT_EQ(r.stop_reason, "ucb_not_below_alpha");
  ASSERT_EQ(r.trace.size(), 29u);
  EXPECT_EQ(r.trace.front().halted_unlabeled, 20000u);
  EXPECT_NEAR(r.trace.front().ucb, 0.015924467123113573, 1e-12);
  EXPECT_EQ(r.trace.back().revealed_t, 3u);
  EXPECT_EQ(r.trace.back().halted_labeled, 94u);
  EXPECT_NEAR(r.trace.back().ucb, 0.10387429164256901, 1e-12);
  EXPECT_FALSE(r.trace.back().passed);
}

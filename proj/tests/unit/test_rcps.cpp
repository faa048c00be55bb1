#include <gtest/gtest.h>

#include "ssrcps/error.hpp"
#include "ssrcps/rcps.hpp"

using namespace ssrcps;
using namespace ssrcps::rcps;

namespace {

// n=10 binary rows, column m has errors[m] ones at the top.
LossTable counts_table(std::vector<int> errors, std::size_t n = 10) {
  std::vector<std::vector<double>> rows(n, std::vector<double>(errors.size(), 0.0));
  for (std::size_t m = 0; m < errors.size(); ++m) {
    for (int i = 0; i < errors[m]; ++i) rows[i][m] = 1.0;
  }
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i));
  return LossTable::from_rows(ParameterGrid::numbered(errors.size()), ids, rows);
}

}  // namespace

TEST(ParameterGrid, RejectsDuplicatesAndEmpty) {
  EXPECT_THROW(ParameterGrid({"a", "a"}), std::invalid_argument);
  EXPECT_THROW(ParameterGrid(std::vector<std::string>{}), std::invalid_argument);
  EXPECT_THROW(ParameterGrid({"a", "b"}, {1.0}), std::invalid_argument);
  const auto g = ParameterGrid::numbered(3);
  EXPECT_EQ(g.label(0), "q_1");
  EXPECT_EQ(g.label(2), "q_3");
  EXPECT_FALSE(g.value(0).has_value());
}

TEST(LossTable, ValidatesEntries) {
  EXPECT_THROW(LossTable::from_rows(ParameterGrid::numbered(1), {"a"}, {{1.5}}), DataError);
  EXPECT_THROW(LossTable::from_rows(ParameterGrid::numbered(2), {"a"}, {{0.5}}), DataError);
  const auto t = LossTable::from_rows(ParameterGrid::numbered(2), {"a", "b"}, {{0.0, 1.0}, {0.5, 1.0}});
  EXPECT_FALSE(t.column_is_binary(0));
  EXPECT_TRUE(t.column_is_binary(1));
  EXPECT_DOUBLE_EQ(t.at(1, 0), 0.5);
}

TEST(LossTable, SelectRowsAndColumns) {
  const auto t = LossTable::from_rows(ParameterGrid({"x", "y", "z"}), {"a", "b", "c"},
                                      {{0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}, {0.7, 0.8, 0.9}});
  const std::size_t rows[] = {2, 0};
  const auto r = t.select_rows(rows);
  EXPECT_EQ(r.sample_ids()[0], "c");
  EXPECT_DOUBLE_EQ(r.at(1, 2), 0.3);
  const std::size_t cols[] = {2};
  const auto c = t.select_columns(cols);
  EXPECT_EQ(c.grid().label(0), "z");
  EXPECT_DOUBLE_EQ(c.at(1, 0), 0.6);
}

TEST(EmpiricalRisk, ColumnMeans) {
  const auto t = LossTable::from_rows(ParameterGrid::numbered(3), {"a", "b", "c", "d"},
                                      {{1, 0, 0.2}, {0, 0, 0.4}, {1, 0, 0.9}, {0, 0, 0.5}});
  EXPECT_DOUBLE_EQ(empirical_risk(t, 0), 0.5);
  EXPECT_DOUBLE_EQ(empirical_risk(t, 1), 0.0);
  EXPECT_DOUBLE_EQ(empirical_risk(t, 2), 0.5);
  EXPECT_THROW(empirical_risk(t, 3), std::out_of_range);
}

TEST(FixedSequence, StopsAtFirstFailure) {
  const std::vector<double> trace{0.10, 0.12, 0.20, 0.05};
  int calls = 0;
  const auto o = fixed_sequence_test(trace.size(), 0.15, [&](std::size_t m) {
    ++calls;
    return trace[m];
  });
  EXPECT_EQ(o.stop_index, 2u);
  ASSERT_TRUE(o.selected);
  EXPECT_EQ(*o.selected, 1u);
  EXPECT_EQ(calls, 3);  // the 4th point is never visited
  EXPECT_EQ(o.ucb_trace, (std::vector<double>{0.10, 0.12, 0.20}));
}

TEST(FixedSequence, AbstainsOnImmediateFailure) {
  const auto o = fixed_sequence_test(3, 0.15, [](std::size_t) { return 0.16; });
  EXPECT_TRUE(o.abstained());
  EXPECT_EQ(o.stop_index, 0u);
}

TEST(FixedSequence, TieAtAlphaStops) {
  const auto o = fixed_sequence_test(2, 0.15, [](std::size_t m) { return m == 0 ? 0.1 : 0.15; });
  EXPECT_EQ(o.stop_index, 1u);
}

TEST(FixedSequence, PrefixProperty) {
  auto ucb = [](std::size_t m) { return m < 3 ? 0.05 * static_cast<double>(m) : 0.9; };
  const auto a = fixed_sequence_test(4, 0.2, ucb);
  const auto b = fixed_sequence_test(40, 0.2, ucb);
  EXPECT_EQ(a.selected, b.selected);
  EXPECT_EQ(a.ucb_trace, b.ucb_trace);
}

TEST(FixedSequence, TinyClopperPearsonExample) {
  const auto t = counts_table({0, 1, 9});
  const auto o = fixed_sequence_calibrate(t, RiskSpec(0.5, bounds::ErrorLevel(0.1)), bounds::UcbMethod::clopper_pearson);
  ASSERT_EQ(o.ucb_trace.size(), 3u);
  // scipy.stats.beta.ppf(0.9, k+1, n-k)
  EXPECT_NEAR(o.ucb_trace[0], 0.2056717652757185, 1e-9);
  EXPECT_NEAR(o.ucb_trace[1], 0.33684772330672474, 1e-9);
  EXPECT_NEAR(o.ucb_trace[2], 0.9895192582062144, 1e-9);
  ASSERT_TRUE(o.selected);
  EXPECT_EQ(*o.selected, 1u);
  EXPECT_EQ(o.method, "clopper_pearson");
  EXPECT_FALSE(o.asymptotic);
}

TEST(FixedSequence, AsymptoticFlagForClt) {
  const auto t = counts_table({0, 1, 2});
  const auto o = fixed_sequence_calibrate(t, RiskSpec(0.5, bounds::ErrorLevel(0.1)), bounds::UcbMethod::clt);
  EXPECT_TRUE(o.asymptotic);
}

TEST(LabeledRcps, PicksBoundByLossType) {
  const auto binary = counts_table({0, 1, 2});
  EXPECT_EQ(labeled_rcps(binary, RiskSpec(0.5, bounds::ErrorLevel(0.1))).method, "clopper_pearson");
  const auto general = LossTable::from_rows(ParameterGrid::numbered(1), {"a", "b"}, {{0.1}, {0.2}});
  EXPECT_EQ(labeled_rcps(general, RiskSpec(0.5, bounds::ErrorLevel(0.1))).method, "wsr");
}

TEST(RiskSpec, Validates) {
  EXPECT_THROW(RiskSpec(0.0, bounds::ErrorLevel(0.1)), std::invalid_argument);
  EXPECT_THROW(RiskSpec(1.2, bounds::ErrorLevel(0.1)), std::invalid_argument);
  EXPECT_NO_THROW(RiskSpec(1.0, bounds::ErrorLevel(0.1)));
}

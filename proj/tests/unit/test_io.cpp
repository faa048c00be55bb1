#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "ssrcps/error.hpp"
#include "ssrcps/io.hpp"

using namespace ssrcps;

TEST(LossTableCsv, RoundTrip) {
  std::istringstream in("sample_id,a,b\ns1,0,1\ns2,0.5,1\n");
  const auto t = io::read_loss_table_csv(in);
  EXPECT_EQ(t.n_samples(), 2u);
  EXPECT_EQ(t.grid().label(1), "b");
  EXPECT_DOUBLE_EQ(t.at(1, 0), 0.5);
  std::ostringstream out;
  io::write_loss_table_csv(out, t);
  std::istringstream again(out.str());
  const auto u = io::read_loss_table_csv(again);
  EXPECT_EQ(u.at(1, 0), t.at(1, 0));
  EXPECT_EQ(u.sample_ids()[1], "s2");
}

TEST(LossTableCsv, RejectsMalformedInput) {
  std::istringstream ragged("sample_id,a,b\ns1,0\n");
  EXPECT_THROW(io::read_loss_table_csv(ragged), DataError);
  std::istringstream text("sample_id,a\ns1,zero\n");
  EXPECT_THROW(io::read_loss_table_csv(text), DataError);
  std::istringstream range("sample_id,a\ns1,2\n");
  EXPECT_THROW(io::read_loss_table_csv(range), DataError);
  std::istringstream empty("");
  EXPECT_THROW(io::read_loss_table_csv(empty), DataError);
  EXPECT_THROW(io::read_loss_table("/nonexistent/file.csv"), DataError);
}

TEST(AlignRows, ReordersById) {
  std::istringstream a("sample_id,x\ns1,0\ns2,1\n");
  std::istringstream b("sample_id,x\ns2,0.25\ns1,0.75\n");
  const auto ref = io::read_loss_table_csv(a);
  const auto aligned = io::align_rows(ref, io::read_loss_table_csv(b));
  EXPECT_EQ(aligned.sample_ids()[0], "s1");
  EXPECT_DOUBLE_EQ(aligned.at(0, 0), 0.75);
  std::istringstream c("sample_id,x\ns1,0\ns3,1\n");
  EXPECT_THROW(io::align_rows(ref, io::read_loss_table_csv(c)), DataError);
}

TEST(EtscCsv, RoundTripWithMissingLabels) {
  std::istringstream in(
      "sample_id,conf_1,conf_2,early_1,early_2,full_pred,true_label,imputed_label\n"
      "a,0.1,0.9,0,1,1,1,\n"
      "b,0.8,0.9,1,1,1,,0\n");
  const auto s = io::read_etsc_samples_csv(in);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].t_max(), 2u);
  EXPECT_EQ(*s[0].true_label, 1);
  EXPECT_FALSE(s[0].imputed_label);
  EXPECT_FALSE(s[1].true_label);
  EXPECT_EQ(*s[1].imputed_label, 0);
  std::ostringstream out;
  io::write_etsc_samples_csv(out, s);
  std::istringstream again(out.str());
  const auto t = io::read_etsc_samples_csv(again);
  EXPECT_EQ(t[1].confidence, s[1].confidence);
  EXPECT_EQ(t[0].early_pred, s[0].early_pred);
}

TEST(EtscCsv, RejectsBadHeader) {
  std::istringstream in("sample_id,conf_1,early_2,full_pred,true_label,imputed_label\na,0.1,0,1,1,1\n");
  EXPECT_THROW(io::read_etsc_samples_csv(in), DataError);
}

TEST(EtscJson, Parses) {
  const auto j = nlohmann::json::parse(
      R"([{"sample_id":"a","confidence":[0.2,0.6],"early_pred":[0,1],"full_pred":1,"true_label":1}])");
  const auto s = io::etsc_samples_from_json(j);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].id, "a");
  EXPECT_FALSE(s[0].imputed_label);
}

TEST(Thresholds, InfinityRoundTrip) {
  const etsc::ThresholdVector q({0.5, etsc::kNeverHalt});
  const auto j = io::thresholds_to_json(q);
  EXPECT_EQ(j[1], "inf");
  EXPECT_EQ(io::thresholds_from_json(j), q);
  EXPECT_EQ(io::thresholds_from_json(nlohmann::json{{"thresholds", j}}), q);
  EXPECT_THROW(io::thresholds_from_json(nlohmann::json::parse(R"(["bad"])")), DataError);
}

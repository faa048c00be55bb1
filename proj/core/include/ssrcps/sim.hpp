#pragma once

// Synthetic scenarios with known risk curves and a Monte-Carlo harness that
// measures how often each calibrator violates its guarantee.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssrcps/bounds.hpp"
#include "ssrcps/etsc.hpp"
#include "ssrcps/ppi.hpp"
#include "ssrcps/rcps.hpp"

namespace ssrcps::sim {

enum class ScenarioKind { mono_binary, nonmono_binary, general_bounded, etsc_basic };

// How imputed losses relate to the true ones when the imputation is wrong.
enum class ImputationRegime {
  symmetric_noise,  // wrong imputation flips the loss (binary) or redraws it
  optimistic,       // imputed loss <= true loss on every row
  pessimistic,      // imputed loss >= true loss on every row
};

enum class CurveShape { linear, u_shaped, values };

// True risk at each grid point, in traversal order.
struct RiskCurve {
  CurveShape shape = CurveShape::linear;
  double start = 0.004;   // linear: first point; u_shaped: both ends
  double end = 0.4;       // linear: last point
  double trough = 0.02;   // u_shaped: value in the middle
  std::vector<double> values;

  std::vector<double> evaluate(std::size_t grid_size) const;
};

struct EtscStreamConfig {
  std::size_t t_max = 10;
  std::size_t n_stage1 = 300;
  double full_accuracy = 0.9;
  double screen_resolution = 0.01;
  // Test-set conditional risk may exceed alpha by this much before a trial
  // counts as a violation (finite test-set noise).
  double violation_slack = 0.01;
};

struct ScenarioConfig {
  std::string name = "scenario";
  ScenarioKind kind = ScenarioKind::mono_binary;
  std::size_t n_labeled = 130;
  std::size_t n_unlabeled = 5000;
  std::size_t n_test = 0;
  std::size_t grid_size = 100;
  RiskCurve curve;
  double imputation_accuracy = 0.81;
  ImputationRegime regime = ImputationRegime::optimistic;
  std::uint64_t master_seed = 0;
  double alpha = 0.15;
  double delta = 0.1;
  std::optional<double> delta1;
  std::optional<double> delta2;
  double tuning_fraction = 0.1;
  std::size_t trials = 1000;
  std::vector<std::string> methods;
  EtscStreamConfig etsc;

  void validate() const;
};

std::string_view to_string(ScenarioKind kind) noexcept;
std::string_view to_string(ImputationRegime regime) noexcept;
ScenarioKind parse_scenario_kind(std::string_view name);
ImputationRegime parse_imputation_regime(std::string_view name);

nlohmann::json to_json(const ScenarioConfig& config);
ScenarioConfig config_from_json(const nlohmann::json& json);
// TOML or JSON, chosen by file extension.
ScenarioConfig load_config(const std::string& path);
// FNV-1a over the canonical JSON form.
std::uint64_t config_hash(const ScenarioConfig& config);
std::string hash_hex(std::uint64_t hash);

// Seed of trial i; depends only on (master_seed, i).
std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t trial_index) noexcept;

struct Scenario {
  ppi::SemiSupervisedLosses data;
  std::vector<double> true_risk;
  // n_test rows of true losses, when n_test > 0.
  std::optional<rcps::LossTable> test;
};

Scenario generate_scenario(const ScenarioConfig& config, std::uint64_t trial_index);

// Grid index whose true risk is closest to alpha (first on ties).
std::size_t reference_column(const ScenarioConfig& config);

struct EtscScenario {
  std::vector<etsc::EtscSample> stage1;
  std::vector<etsc::EtscSample> stage2;
  std::vector<etsc::EtscSample> unlabeled;
  std::vector<etsc::EtscSample> test;
};

EtscScenario generate_etsc_scenario(const ScenarioConfig& config, std::uint64_t trial_index);

// Method names understood by the harness.
inline constexpr std::string_view kLossMethods[] = {
    "rcps_labeled_cp",       "rcps_labeled_wsr",      "ss_binary",
    "ss_general_wsr",        "ss_general_wsr_scaled", "ss_general_clt",
    "ss_general_clt_tuned",  "ss_general_wsr_split",  "naive_augmented",
};
inline constexpr std::string_view kEtscMethods[] = {
    "etsc_labeled_only", "etsc_binary_cp", "etsc_general_wsr", "etsc_general_clt"};

struct TrialResult {
  std::uint64_t trial_index = 0;
  bool asymptotic = false;
  bool unsafe = false;
  std::optional<std::size_t> selected;
  std::size_t stop_index = 0;
  // Abstaining falls back to the trivially safe rule, whose risk is 0.
  double true_risk_at_qhat = 0.0;
  bool violated = false;
  // Some passing grid point had true risk above alpha.
  bool false_rejection = false;
  double pp_risk_at_reference = 0.0;
  double ucb_at_reference = 0.0;
  std::vector<double> ucb_trace;
  std::vector<double> halt_curve;  // ETSC only, on the test set
};

struct CoverageReport {
  std::string method;
  bool unsafe = false;
  bool asymptotic = false;
  std::size_t trials = 0;
  std::size_t violations = 0;
  std::size_t false_rejections = 0;
  std::size_t abstentions = 0;
  double violation_rate = 0.0;
  double fwer = 0.0;
  double slack_3sigma = 0.0;
  double mean_true_risk = 0.0;
  double std_true_risk = 0.0;
  double q10_true_risk = 0.0;
  double q50_true_risk = 0.0;
  double q90_true_risk = 0.0;
  double mean_qhat_index = 0.0;
  double std_qhat_index = 0.0;
  double mean_reference_ucb = 0.0;
  double mean_pp_risk_at_reference = 0.0;
  std::vector<double> mean_halt_curve;
};

struct ExperimentReport {
  ScenarioConfig config;
  std::uint64_t config_hash = 0;
  std::size_t reference_column = 0;
  std::vector<CoverageReport> methods;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

// Runs one trial of every method. Methods are validated against the scenario kind.
std::vector<TrialResult> run_trial(const ScenarioConfig& config, std::span<const std::string> methods,
                                   std::uint64_t trial_index);

CoverageReport aggregate(std::string method, std::span<const TrialResult> results, const ScenarioConfig& config);

// Deterministic in (config, methods, trials); `jobs` only changes wall time.
ExperimentReport run_coverage_experiment(const ScenarioConfig& config, std::vector<std::string> methods,
                                         std::size_t trials, std::size_t jobs = 1);

// P(Binom(n, p) <= k) by direct log-space summation.
double binomial_cdf_by_summation(std::int64_t n, std::int64_t k, double p);

// Largest R on the grid {0, 1e-6, ..., 1} with summation CDF >= delta. The CDF
// is monotone in R, so the grid is searched by bisection over grid indices.
double brute_force_cp_oracle(bounds::BinomialCount count, bounds::ErrorLevel delta);

}  // namespace ssrcps::sim

#pragma once

// Early time-series classification: a sample is read one timestep at a time
// and inference halts the first time the classifier's confidence reaches the
// threshold of that timestep. The controlled risk is the accuracy gap between
// the early and the full-sequence prediction, conditioned on halting by t.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssrcps/bounds.hpp"
#include "ssrcps/ppi.hpp"

namespace ssrcps::etsc {

using Label = std::int32_t;

struct EtscSample {
  std::string id;
  std::vector<double> confidence;  // one entry per timestep, in [0, 1]
  std::vector<Label> early_pred;   // prediction after each prefix
  Label full_pred = 0;
  std::optional<Label> true_label;
  std::optional<Label> imputed_label;

  std::size_t t_max() const noexcept { return confidence.size(); }
};

// Throws DataError on mismatched lengths or confidences outside [0, 1].
void validate(const EtscSample& sample);

inline constexpr double kNeverHalt = std::numeric_limits<double>::infinity();

// Per-timestep thresholds; +inf means "never halt here".
class ThresholdVector {
 public:
  explicit ThresholdVector(std::vector<double> thresholds);

  // All +inf: the rule that always reads the full sequence.
  static ThresholdVector identity(std::size_t t_max);

  std::size_t size() const noexcept { return thresholds_.size(); }
  double operator[](std::size_t t) const { return thresholds_.at(t); }
  void set(std::size_t t, double value);
  std::span<const double> values() const noexcept { return thresholds_; }
  bool is_identity() const noexcept;

  bool operator==(const ThresholdVector&) const = default;

 private:
  std::vector<double> thresholds_;
};

enum class LabelSource { truth, imputed };

// min{t : confidence_t >= q_t or t = t_max}, 1-indexed.
std::size_t halt_time(const EtscSample& sample, const ThresholdVector& q);

// (1{Y = full} - 1{Y = early at halt})_+ for a given label.
int gap_loss_for_label(const EtscSample& sample, Label label, std::size_t halt);
int gap_loss(const EtscSample& sample, LabelSource source, const ThresholdVector& q);

// Mean gap loss over samples halting by t; empty when none do.
std::optional<double> conditional_empirical_risk(std::span<const EtscSample> samples, LabelSource source,
                                                 const ThresholdVector& q, std::size_t t);

struct EtscRiskSpec {
  double alpha = 0.1;
  bounds::ErrorLevel delta{0.01};
  std::optional<ppi::BudgetSplit> split;
  double screen_resolution = 0.01;
};

// Stage 1: per timestep, the smallest threshold on the resolution grid whose
// conditional empirical gap risk on the screening set is <= alpha.
ThresholdVector candidate_screening(std::span<const EtscSample> labeled_stage1, const EtscRiskSpec& spec);

enum class Stage2Mode { binary_cp, general_wsr, general_clt, labeled_only };

std::string_view to_string(Stage2Mode mode) noexcept;
Stage2Mode parse_stage2_mode(std::string_view name);

struct Stage2Step {
  std::size_t revealed_t = 0;  // 1-indexed timestep whose threshold was revealed
  std::size_t t_prime = 0;
  std::size_t halted_labeled = 0;
  std::size_t halted_unlabeled = 0;
  double ucb = 0.0;
  bool passed = false;
};

struct Stage2Result {
  ThresholdVector thresholds;
  // Number of candidate thresholds revealed in the accepted vector.
  std::size_t revealed = 0;
  std::vector<Stage2Step> trace;
  std::string stop_reason;
};

// Stage 2: reveals candidate thresholds from the last timestep backwards and
// accepts a vector only when every conditional UCB from the revealed step to
// t_max is strictly below alpha.
Stage2Result stage2_calibrate(std::span<const EtscSample> labeled_stage2, std::span<const EtscSample> unlabeled,
                              const ThresholdVector& candidate, const EtscRiskSpec& spec, Stage2Mode mode);

// Fraction of samples halted by each t = 1..t_max.
std::vector<double> halt_curve(std::span<const EtscSample> samples, const ThresholdVector& q);

struct EvaluationReport {
  std::vector<double> halt_curve;
  std::vector<std::optional<double>> conditional_risk;  // per t, truth labels
  std::optional<std::size_t> t0;                        // first t with a halted sample
};

EvaluationReport evaluate(std::span<const EtscSample> samples, const ThresholdVector& q);

// Throws DataError if any sample id appears in both collections.
void check_disjoint(std::span<const EtscSample> a, std::span<const EtscSample> b);

}  // namespace ssrcps::etsc

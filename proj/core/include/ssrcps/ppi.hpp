#pragma once

// Semi-supervised risk estimation and calibration.
//
// Labeled rows carry both the true loss L_i and the loss under an imputed
// label L~_i; unlabeled rows carry only L~_j. The prediction-powered risk
//
//   lambda * mean(L~_unlabeled) + mean(L) - lambda * mean(L~_labeled)
//
// is unbiased for the true risk for any fixed lambda. Two calibrators build
// on it: a general one that rewrites the estimate as a mean of n i.i.d. block
// variables W_i and bounds that mean directly, and a binary one that bounds
// the unlabeled risk and a clipped rectifier separately with exact
// Clopper-Pearson bounds and a split error budget.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ssrcps/bounds.hpp"
#include "ssrcps/rcps.hpp"

namespace ssrcps::ppi {

class SemiSupervisedLosses {
 public:
  // The labeled tables must list the same sample ids in the same order.
  SemiSupervisedLosses(rcps::LossTable labeled_true, rcps::LossTable labeled_imputed,
                       rcps::LossTable unlabeled_imputed);

  const rcps::LossTable& labeled_true() const noexcept { return labeled_true_; }
  const rcps::LossTable& labeled_imputed() const noexcept { return labeled_imputed_; }
  const rcps::LossTable& unlabeled_imputed() const noexcept { return unlabeled_imputed_; }

  std::size_t n_labeled() const noexcept { return labeled_true_.n_samples(); }
  std::size_t n_unlabeled() const noexcept { return unlabeled_imputed_.n_samples(); }
  std::size_t grid_size() const noexcept { return labeled_true_.n_columns(); }
  const rcps::ParameterGrid& grid() const noexcept { return labeled_true_.grid(); }

  bool is_binary() const;

  // Keeps the listed labeled rows and unlabeled rows.
  SemiSupervisedLosses subset(std::span<const std::size_t> labeled_rows,
                              std::span<const std::size_t> unlabeled_rows) const;
  SemiSupervisedLosses select_columns(std::span<const std::size_t> columns) const;

 private:
  rcps::LossTable labeled_true_;
  rcps::LossTable labeled_imputed_;
  rcps::LossTable unlabeled_imputed_;
};

// Assignment of unlabeled rows to n contiguous blocks of floor(N/n) rows.
// The last N - n*floor(N/n) rows (in `order`) are dropped.
struct BlockPlan {
  std::size_t n_labeled = 0;
  std::size_t block_size = 0;
  std::size_t used_unlabeled = 0;
  std::size_t dropped_tail = 0;
  // Row order the blocks are cut from. Identity unless a shuffle seed was given.
  std::vector<std::size_t> order;
  std::optional<std::uint64_t> shuffle_seed;

  static BlockPlan make(std::size_t n_labeled, std::size_t n_unlabeled,
                        std::optional<std::uint64_t> shuffle_seed = std::nullopt);

  // Unlabeled row index of the j-th row of block i.
  std::size_t row(std::size_t block, std::size_t offset) const noexcept {
    return order[block * block_size + offset];
  }
};

class BudgetSplit {
 public:
  BudgetSplit(bounds::ErrorLevel delta1, bounds::ErrorLevel delta2);

  // Checks |delta1 + delta2 - total| <= 1e-12.
  static BudgetSplit for_total(double total, double delta1, double delta2);

  bounds::ErrorLevel delta1() const noexcept { return delta1_; }
  bounds::ErrorLevel delta2() const noexcept { return delta2_; }
  double total() const noexcept { return delta1_.value() + delta2_.value(); }

 private:
  bounds::ErrorLevel delta1_;
  bounds::ErrorLevel delta2_;
};

enum class LambdaMode {
  fixed,       // lambda as given; 1 by default
  clt_inline,  // lambda* estimated on the calibration data itself (asymptotic only)
  wsr_split,   // lambda* estimated on a held-out fraction of both sets
};

struct PowerTuning {
  LambdaMode mode = LambdaMode::fixed;
  double lambda = 1.0;
  double tuning_fraction = 0.1;

  static PowerTuning fixed_one() { return {}; }
  static PowerTuning fixed(double lambda) { return {LambdaMode::fixed, lambda, 0.1}; }
};

std::string_view to_string(LambdaMode mode) noexcept;
LambdaMode parse_lambda_mode(std::string_view name);

double pp_risk(const SemiSupervisedLosses& data, std::size_t grid_index, double lambda);

// W_i = lambda * blockmean_i(L~_unlabeled) + L_i - lambda * L~_i, with declared
// support [-|lambda|, 1 + |lambda|].
bounds::BoundedSample block_decompose(const SemiSupervisedLosses& data, std::size_t grid_index,
                                      const BlockPlan& plan, double lambda);

struct LambdaEstimate {
  double value = 0.0;
  // Var(L~) was zero; value forced to 0.
  bool degenerate = false;
};

// Cov(L, L~) / ((1 + n/N) Var(L~)) with n-1 denominators.
LambdaEstimate estimate_lambda_star(std::span<const double> labeled_true,
                                    std::span<const double> labeled_imputed, double labeled_over_unlabeled);

double lambda_star_estimate(const SemiSupervisedLosses& data, std::size_t grid_index);

struct RectifierCount {
  std::int64_t count = 0;
  std::int64_t n = 0;
  double rate() const noexcept { return static_cast<double>(count) / static_cast<double>(n); }
};

// Number of labeled rows with L_i = 1 and L~_i = 0 at this column.
RectifierCount clipped_rectifier(const SemiSupervisedLosses& data, std::size_t grid_index);
double clipped_rectifier_risk(const SemiSupervisedLosses& data, std::size_t grid_index);

// UCB of the block-decomposed PP risk at one column.
double ss_general_column_ucb(const SemiSupervisedLosses& data, std::size_t grid_index, bounds::UcbSpec ucb,
                             const BlockPlan& plan, double lambda);

// CP(N, k_U, delta1) + CP(n, clipped count, delta2).
double ss_binary_column_ucb(const SemiSupervisedLosses& data, std::size_t grid_index, const BudgetSplit& split);

// method must be wsr, wsr_scaled or clt. clt_inline tuning requires clt.
rcps::CalibrationOutcome ss_general_calibrate(const SemiSupervisedLosses& data, const rcps::RiskSpec& spec,
                                              bounds::UcbMethod method, const PowerTuning& tuning,
                                              std::optional<std::uint64_t> shuffle_seed = std::nullopt);

rcps::CalibrationOutcome ss_binary_calibrate(const SemiSupervisedLosses& data, double alpha,
                                             const BudgetSplit& split);

// Pools labeled true losses with unlabeled imputed ones and runs
// Clopper-Pearson RCPS. Carries no guarantee; the outcome is marked unsafe.
rcps::CalibrationOutcome naive_augmented_calibrate(const SemiSupervisedLosses& data, const rcps::RiskSpec& spec);

}  // namespace ssrcps::ppi

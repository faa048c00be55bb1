#pragma once

// Fixed-sequence-testing calibration over an ordered parameter grid.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssrcps/bounds.hpp"

namespace ssrcps::rcps {

// Grid points in traversal order. Labels are opaque (vector-valued
// parameters are fine); numeric values are optional.
class ParameterGrid {
 public:
  explicit ParameterGrid(std::vector<std::string> labels, std::vector<double> values = {});

  // Labels q_1 ... q_M.
  static ParameterGrid numbered(std::size_t size);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::string& label(std::size_t index) const { return labels_.at(index); }
  std::optional<double> value(std::size_t index) const;
  std::span<const std::string> labels() const noexcept { return labels_; }

  bool operator==(const ParameterGrid&) const = default;

 private:
  std::vector<std::string> labels_;
  std::vector<double> values_;
};

// Per-sample losses in [0, 1] at every grid point. Stored column-major since
// calibration consumes one column at a time.
class LossTable {
 public:
  // `column_major` holds grid.size() columns of sample_ids.size() rows each.
  LossTable(ParameterGrid grid, std::vector<std::string> sample_ids, std::vector<double> column_major);

  // rows[i][m] is the loss of sample i at grid point m.
  static LossTable from_rows(ParameterGrid grid, std::vector<std::string> sample_ids,
                             const std::vector<std::vector<double>>& rows);

  std::size_t n_samples() const noexcept { return sample_ids_.size(); }
  std::size_t n_columns() const noexcept { return grid_.size(); }
  const ParameterGrid& grid() const noexcept { return grid_; }
  std::span<const std::string> sample_ids() const noexcept { return sample_ids_; }

  std::span<const double> column(std::size_t index) const;
  double at(std::size_t row, std::size_t column) const;

  // Entries in {0,1} within 1e-9.
  bool column_is_binary(std::size_t index) const;
  bool is_binary() const;

  // Rows listed in `rows`, in that order.
  LossTable select_rows(std::span<const std::size_t> rows) const;
  // Columns listed in `columns`, in that order, with their grid labels.
  LossTable select_columns(std::span<const std::size_t> columns) const;

 private:
  ParameterGrid grid_;
  std::vector<std::string> sample_ids_;
  std::vector<double> data_;
};

class RiskSpec {
 public:
  RiskSpec(double alpha, bounds::ErrorLevel delta);

  double alpha() const noexcept { return alpha_; }
  bounds::ErrorLevel delta() const noexcept { return delta_; }

 private:
  double alpha_;
  bounds::ErrorLevel delta_;
};

// Extra fields reported by the semi-supervised calibrators.
struct SemiSupervisedDiagnostics {
  std::string lambda_mode;
  std::vector<double> lambda_per_column;
  std::vector<std::size_t> degenerate_lambda_columns;
  std::optional<double> delta1;
  std::optional<double> delta2;
  std::optional<std::size_t> block_size;
  std::optional<std::size_t> dropped_tail;
};

struct CalibrationOutcome {
  // Index of q-hat in the grid; empty means abstain.
  std::optional<std::size_t> selected;
  // Number of grid points that passed before the first failure.
  std::size_t stop_index = 0;
  // UCB of every visited grid point, including the one that failed.
  std::vector<double> ucb_trace;
  std::string method;
  double alpha = 0.0;
  double delta = 0.0;
  bool asymptotic = false;
  // Set for baselines that carry no validity guarantee.
  bool unsafe = false;
  std::optional<SemiSupervisedDiagnostics> semi_supervised;

  bool abstained() const noexcept { return !selected.has_value(); }
};

double empirical_risk(const LossTable& table, std::size_t grid_index);

// The column as a bounded sample on [0, 1].
bounds::BoundedSample column_sample(const LossTable& table, std::size_t grid_index);

// Walks grid indices 0..grid_size-1, calling column_ucb lazily, and stops at
// the first index whose UCB is not strictly below alpha.
CalibrationOutcome fixed_sequence_test(std::size_t grid_size, double alpha,
                                       const std::function<double(std::size_t)>& column_ucb);

CalibrationOutcome fixed_sequence_calibrate(const LossTable& table, const RiskSpec& spec,
                                            bounds::UcbMethod method);

// Labeled-only baseline: Clopper-Pearson when every column is binary, WSR otherwise.
CalibrationOutcome labeled_rcps(const LossTable& table, const RiskSpec& spec);

}  // namespace ssrcps::rcps

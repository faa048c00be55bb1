#include "ssrcps/rcps.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "ssrcps/error.hpp"

namespace ssrcps::rcps {

ParameterGrid::ParameterGrid(std::vector<std::string> labels, std::vector<double> values)
    : labels_(std::move(labels)), values_(std::move(values)) {
  if (labels_.empty()) throw std::invalid_argument("parameter grid must not be empty");
  if (!values_.empty() && values_.size() != labels_.size()) {
    throw std::invalid_argument("parameter grid values must match labels");
  }
  std::unordered_set<std::string> seen;
  for (const auto& label : labels_) {
    if (!seen.insert(label).second) throw std::invalid_argument("duplicate grid label '" + label + "'");
  }
}

ParameterGrid ParameterGrid::numbered(std::size_t size) {
  std::vector<std::string> labels;
  labels.reserve(size);
  for (std::size_t m = 1; m <= size; ++m) labels.push_back("q_" + std::to_string(m));
  return ParameterGrid(std::move(labels));
}

std::optional<double> ParameterGrid::value(std::size_t index) const {
  if (values_.empty()) return std::nullopt;
  return values_.at(index);
}

LossTable::LossTable(ParameterGrid grid, std::vector<std::string> sample_ids, std::vector<double> column_major)
    : grid_(std::move(grid)), sample_ids_(std::move(sample_ids)), data_(std::move(column_major)) {
  if (data_.size() != grid_.size() * sample_ids_.size()) {
    throw std::invalid_argument("loss table size does not match grid x samples");
  }
  for (double v : data_) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("loss value " + std::to_string(v) + " outside [0, 1]");
  }
}

LossTable LossTable::from_rows(ParameterGrid grid, std::vector<std::string> sample_ids,
                               const std::vector<std::vector<double>>& rows) {
  if (rows.size() != sample_ids.size()) throw std::invalid_argument("row count does not match sample ids");
  const std::size_t m = grid.size();
  const std::size_t n = rows.size();
  std::vector<double> data(m * n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != m) throw DataError("row " + std::to_string(i) + " has wrong number of columns");
    for (std::size_t j = 0; j < m; ++j) data[j * n + i] = rows[i][j];
  }
  return LossTable(std::move(grid), std::move(sample_ids), std::move(data));
}

std::span<const double> LossTable::column(std::size_t index) const {
  if (index >= n_columns()) throw std::out_of_range("grid index out of range");
  const std::size_t n = n_samples();
  return std::span<const double>(data_).subspan(index * n, n);
}

double LossTable::at(std::size_t row, std::size_t column_index) const {
  if (row >= n_samples()) throw std::out_of_range("row out of range");
  return column(column_index)[row];
}

bool LossTable::column_is_binary(std::size_t index) const {
  for (double v : column(index)) {
    if (std::abs(v) > 1e-9 && std::abs(v - 1.0) > 1e-9) return false;
  }
  return true;
}

bool LossTable::is_binary() const {
  for (std::size_t m = 0; m < n_columns(); ++m) {
    if (!column_is_binary(m)) return false;
  }
  return true;
}

LossTable LossTable::select_rows(std::span<const std::size_t> rows) const {
  const std::size_t n = n_samples();
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (auto r : rows) {
    if (r >= n) throw std::out_of_range("row out of range");
    ids.push_back(sample_ids_[r]);
  }
  std::vector<double> data;
  data.reserve(rows.size() * n_columns());
  for (std::size_t m = 0; m < n_columns(); ++m) {
    for (auto r : rows) data.push_back(data_[m * n + r]);
  }
  return LossTable(grid_, std::move(ids), std::move(data));
}

LossTable LossTable::select_columns(std::span<const std::size_t> columns) const {
  const std::size_t n = n_samples();
  std::vector<std::string> labels;
  std::vector<double> values;
  std::vector<double> data;
  data.reserve(columns.size() * n);
  for (auto m : columns) {
    if (m >= n_columns()) throw std::out_of_range("column out of range");
    labels.push_back(grid_.label(m));
    if (auto v = grid_.value(m)) values.push_back(*v);
    const auto col = column(m);
    data.insert(data.end(), col.begin(), col.end());
  }
  if (values.size() != labels.size()) values.clear();
  return LossTable(ParameterGrid(std::move(labels), std::move(values)), sample_ids_, std::move(data));
}

RiskSpec::RiskSpec(double alpha, bounds::ErrorLevel delta) : alpha_(alpha), delta_(delta) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
}

double empirical_risk(const LossTable& table, std::size_t grid_index) {
  const auto col = table.column(grid_index);
  if (col.empty()) throw std::invalid_argument("empirical_risk: empty table");
  return std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
}

bounds::BoundedSample column_sample(const LossTable& table, std::size_t grid_index) {
  const auto col = table.column(grid_index);
  return bounds::BoundedSample(std::vector<double>(col.begin(), col.end()), bounds::Support{0.0, 1.0});
}

CalibrationOutcome fixed_sequence_test(std::size_t grid_size, double alpha,
                                       const std::function<double(std::size_t)>& column_ucb) {
  if (grid_size == 0) throw std::invalid_argument("fixed_sequence_test: empty grid");
  CalibrationOutcome outcome;
  outcome.alpha = alpha;
  for (std::size_t m = 0; m < grid_size; ++m) {
    const double ucb = column_ucb(m);
    outcome.ucb_trace.push_back(ucb);
    if (!(ucb < alpha)) break;
    outcome.selected = m;
    outcome.stop_index = m + 1;
  }
  return outcome;
}

CalibrationOutcome fixed_sequence_calibrate(const LossTable& table, const RiskSpec& spec,
                                            bounds::UcbMethod method) {
  if (table.n_samples() == 0) throw std::invalid_argument("fixed_sequence_calibrate: empty table");
  const bounds::UcbSpec ucb{method, spec.delta()};
  auto outcome = fixed_sequence_test(table.n_columns(), spec.alpha(), [&](std::size_t m) {
    return bounds::compute_ucb(ucb, column_sample(table, m));
  });
  outcome.method = std::string(bounds::to_string(method));
  outcome.delta = spec.delta().value();
  outcome.asymptotic = bounds::is_asymptotic(method);
  return outcome;
}

CalibrationOutcome labeled_rcps(const LossTable& table, const RiskSpec& spec) {
  const auto method = table.is_binary() ? bounds::UcbMethod::clopper_pearson : bounds::UcbMethod::wsr;
  return fixed_sequence_calibrate(table, spec, method);
}

}  // namespace ssrcps::rcps

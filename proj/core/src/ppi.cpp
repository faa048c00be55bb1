#include "ssrcps/ppi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "ssrcps/error.hpp"

namespace ssrcps::ppi {

namespace {

double column_mean(std::span<const double> col) {
  return std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
}

std::int64_t binary_count(std::span<const double> col) {
  std::int64_t count = 0;
  for (double v : col) count += v > 0.5 ? 1 : 0;
  return count;
}

void require_binary(const SemiSupervisedLosses& data, const char* who) {
  if (!data.is_binary()) throw DataError(std::string(who) + " requires binary losses in all three tables");
}

std::vector<std::size_t> iota_rows(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> rows(end - begin);
  std::iota(rows.begin(), rows.end(), begin);
  return rows;
}

}  // namespace

SemiSupervisedLosses::SemiSupervisedLosses(rcps::LossTable labeled_true, rcps::LossTable labeled_imputed,
                                           rcps::LossTable unlabeled_imputed)
    : labeled_true_(std::move(labeled_true)),
      labeled_imputed_(std::move(labeled_imputed)),
      unlabeled_imputed_(std::move(unlabeled_imputed)) {
  if (labeled_true_.n_samples() == 0) throw DataError("labeled table is empty");
  if (unlabeled_imputed_.n_samples() == 0) throw DataError("unlabeled table is empty");
  if (!(labeled_true_.grid() == labeled_imputed_.grid()) || !(labeled_true_.grid() == unlabeled_imputed_.grid())) {
    throw DataError("loss tables do not share the same grid");
  }
  const auto a = labeled_true_.sample_ids();
  const auto b = labeled_imputed_.sample_ids();
  if (!std::equal(a.begin(), a.end(), b.begin(), b.end())) {
    throw DataError("labeled true and labeled imputed tables have different sample ids");
  }
}

bool SemiSupervisedLosses::is_binary() const {
  return labeled_true_.is_binary() && labeled_imputed_.is_binary() && unlabeled_imputed_.is_binary();
}

SemiSupervisedLosses SemiSupervisedLosses::subset(std::span<const std::size_t> labeled_rows,
                                                  std::span<const std::size_t> unlabeled_rows) const {
  return SemiSupervisedLosses(labeled_true_.select_rows(labeled_rows), labeled_imputed_.select_rows(labeled_rows),
                              unlabeled_imputed_.select_rows(unlabeled_rows));
}

SemiSupervisedLosses SemiSupervisedLosses::select_columns(std::span<const std::size_t> columns) const {
  return SemiSupervisedLosses(labeled_true_.select_columns(columns), labeled_imputed_.select_columns(columns),
                              unlabeled_imputed_.select_columns(columns));
}

BlockPlan BlockPlan::make(std::size_t n_labeled, std::size_t n_unlabeled, std::optional<std::uint64_t> shuffle_seed) {
  if (n_labeled == 0) throw std::invalid_argument("block plan needs n >= 1");
  if (n_unlabeled < n_labeled) {
    throw std::invalid_argument("block plan needs N >= n (got N=" + std::to_string(n_unlabeled) +
                                ", n=" + std::to_string(n_labeled) + ")");
  }
  BlockPlan plan;
  plan.n_labeled = n_labeled;
  plan.block_size = n_unlabeled / n_labeled;
  plan.used_unlabeled = plan.block_size * n_labeled;
  plan.dropped_tail = n_unlabeled - plan.used_unlabeled;
  plan.order = iota_rows(0, n_unlabeled);
  plan.shuffle_seed = shuffle_seed;
  if (shuffle_seed) {
    std::mt19937_64 rng(*shuffle_seed);
    std::shuffle(plan.order.begin(), plan.order.end(), rng);
  }
  return plan;
}

BudgetSplit::BudgetSplit(bounds::ErrorLevel delta1, bounds::ErrorLevel delta2) : delta1_(delta1), delta2_(delta2) {
  if (!(delta1.value() + delta2.value() < 1.0)) throw std::invalid_argument("delta1 + delta2 must be below 1");
}

BudgetSplit BudgetSplit::for_total(double total, double delta1, double delta2) {
  if (std::abs(delta1 + delta2 - total) > 1e-12) {
    throw std::invalid_argument("delta1 + delta2 must equal delta");
  }
  return BudgetSplit(bounds::ErrorLevel(delta1), bounds::ErrorLevel(delta2));
}

std::string_view to_string(LambdaMode mode) noexcept {
  switch (mode) {
    case LambdaMode::fixed: return "fixed";
    case LambdaMode::clt_inline: return "clt_inline";
    case LambdaMode::wsr_split: return "wsr_split";
  }
  return "unknown";
}

LambdaMode parse_lambda_mode(std::string_view name) {
  if (name == "fixed" || name == "fixed_one") return LambdaMode::fixed;
  if (name == "clt_inline") return LambdaMode::clt_inline;
  if (name == "wsr_split") return LambdaMode::wsr_split;
  throw std::invalid_argument("unknown lambda mode '" + std::string(name) + "'");
}

double pp_risk(const SemiSupervisedLosses& data, std::size_t grid_index, double lambda) {
  return lambda * column_mean(data.unlabeled_imputed().column(grid_index)) +
         column_mean(data.labeled_true().column(grid_index)) -
         lambda * column_mean(data.labeled_imputed().column(grid_index));
}

bounds::BoundedSample block_decompose(const SemiSupervisedLosses& data, std::size_t grid_index,
                                      const BlockPlan& plan, double lambda) {
  const std::size_t n = data.n_labeled();
  if (plan.n_labeled != n || plan.order.size() != data.n_unlabeled() || plan.block_size == 0) {
    throw std::invalid_argument("block plan does not match the data sizes");
  }
  const auto truth = data.labeled_true().column(grid_index);
  const auto imputed = data.labeled_imputed().column(grid_index);
  const auto unlabeled = data.unlabeled_imputed().column(grid_index);
  const bounds::Support support{-std::abs(lambda), 1.0 + std::abs(lambda)};

  std::vector<double> w(n);
  const double b = static_cast<double>(plan.block_size);
  for (std::size_t i = 0; i < n; ++i) {
    double block_sum = 0.0;
    for (std::size_t j = 0; j < plan.block_size; ++j) block_sum += unlabeled[plan.row(i, j)];
    const double value = lambda * (block_sum / b) + truth[i] - lambda * imputed[i];
    w[i] = std::clamp(value, support.lo, support.hi);
  }
  return bounds::BoundedSample(std::move(w), support);
}

LambdaEstimate estimate_lambda_star(std::span<const double> labeled_true, std::span<const double> labeled_imputed,
                                    double labeled_over_unlabeled) {
  const std::size_t n = labeled_true.size();
  if (n < 2 || labeled_imputed.size() != n) throw std::invalid_argument("lambda* estimation needs n >= 2 paired rows");
  const double mean_l = column_mean(labeled_true);
  const double mean_t = column_mean(labeled_imputed);
  double cov = 0.0;
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (labeled_true[i] - mean_l) * (labeled_imputed[i] - mean_t);
    var += (labeled_imputed[i] - mean_t) * (labeled_imputed[i] - mean_t);
  }
  const double denom = static_cast<double>(n - 1);
  cov /= denom;
  var /= denom;
  if (var <= 0.0) return {0.0, true};
  return {cov / ((1.0 + labeled_over_unlabeled) * var), false};
}

double lambda_star_estimate(const SemiSupervisedLosses& data, std::size_t grid_index) {
  return estimate_lambda_star(data.labeled_true().column(grid_index), data.labeled_imputed().column(grid_index),
                              static_cast<double>(data.n_labeled()) / static_cast<double>(data.n_unlabeled()))
      .value;
}

RectifierCount clipped_rectifier(const SemiSupervisedLosses& data, std::size_t grid_index) {
  if (!data.labeled_true().column_is_binary(grid_index) || !data.labeled_imputed().column_is_binary(grid_index)) {
    throw DataError("clipped rectifier requires binary labeled losses");
  }
  const auto truth = data.labeled_true().column(grid_index);
  const auto imputed = data.labeled_imputed().column(grid_index);
  RectifierCount result;
  result.n = static_cast<std::int64_t>(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] > 0.5 && imputed[i] < 0.5) ++result.count;
  }
  return result;
}

double clipped_rectifier_risk(const SemiSupervisedLosses& data, std::size_t grid_index) {
  return clipped_rectifier(data, grid_index).rate();
}

double ss_general_column_ucb(const SemiSupervisedLosses& data, std::size_t grid_index, bounds::UcbSpec ucb,
                             const BlockPlan& plan, double lambda) {
  return bounds::compute_ucb(ucb, block_decompose(data, grid_index, plan, lambda));
}

double ss_binary_column_ucb(const SemiSupervisedLosses& data, std::size_t grid_index, const BudgetSplit& split) {
  const auto unlabeled = data.unlabeled_imputed().column(grid_index);
  const bounds::BinomialCount unlabeled_count(static_cast<std::int64_t>(unlabeled.size()), binary_count(unlabeled));
  const auto rect = clipped_rectifier(data, grid_index);
  return bounds::clopper_pearson_ucb(unlabeled_count, split.delta1()) +
         bounds::clopper_pearson_ucb(bounds::BinomialCount(rect.n, rect.count), split.delta2());
}

rcps::CalibrationOutcome ss_general_calibrate(const SemiSupervisedLosses& data, const rcps::RiskSpec& spec,
                                              bounds::UcbMethod method, const PowerTuning& tuning,
                                              std::optional<std::uint64_t> shuffle_seed) {
  using bounds::UcbMethod;
  if (method != UcbMethod::wsr && method != UcbMethod::wsr_scaled && method != UcbMethod::clt) {
    throw std::invalid_argument("ss_general_calibrate supports wsr, wsr_scaled and clt");
  }
  if (tuning.mode == LambdaMode::clt_inline && method != UcbMethod::clt) {
    throw std::invalid_argument("clt_inline power tuning is only valid with the clt bound");
  }

  // Split off the tuning rows when lambda* must be estimated on held-out data.
  std::optional<SemiSupervisedLosses> tuning_data;
  std::optional<SemiSupervisedLosses> bound_data;
  if (tuning.mode == LambdaMode::wsr_split) {
    if (!(tuning.tuning_fraction > 0.0 && tuning.tuning_fraction < 1.0)) {
      throw std::invalid_argument("tuning_fraction must lie in (0, 1)");
    }
    const auto n_tune = static_cast<std::size_t>(std::floor(tuning.tuning_fraction * data.n_labeled()));
    const auto big_n_tune = static_cast<std::size_t>(std::floor(tuning.tuning_fraction * data.n_unlabeled()));
    if (n_tune < 2) throw std::invalid_argument("wsr_split needs at least two labeled tuning rows");
    if (n_tune >= data.n_labeled() || big_n_tune >= data.n_unlabeled()) {
      throw std::invalid_argument("wsr_split leaves no rows for the bound");
    }
    const auto lab_tune = iota_rows(0, n_tune);
    const auto unl_tune = iota_rows(0, big_n_tune);
    const auto lab_rest = iota_rows(n_tune, data.n_labeled());
    const auto unl_rest = iota_rows(big_n_tune, data.n_unlabeled());
    tuning_data.emplace(data.subset(lab_tune, unl_tune));
    bound_data.emplace(data.subset(lab_rest, unl_rest));
  }
  const SemiSupervisedLosses& target = bound_data ? *bound_data : data;
  if (method == UcbMethod::clt && target.n_labeled() < 2) throw std::invalid_argument("clt bound needs n >= 2");
  const BlockPlan plan = BlockPlan::make(target.n_labeled(), target.n_unlabeled(), shuffle_seed);
  const double ratio = static_cast<double>(target.n_labeled()) / static_cast<double>(target.n_unlabeled());

  rcps::SemiSupervisedDiagnostics diag;
  diag.lambda_mode = std::string(to_string(tuning.mode));
  diag.block_size = plan.block_size;
  diag.dropped_tail = plan.dropped_tail;

  const bounds::UcbSpec ucb{method, spec.delta()};
  auto outcome = rcps::fixed_sequence_test(target.grid_size(), spec.alpha(), [&](std::size_t m) {
    LambdaEstimate lambda{tuning.lambda, false};
    if (tuning.mode == LambdaMode::clt_inline) {
      lambda = estimate_lambda_star(target.labeled_true().column(m), target.labeled_imputed().column(m), ratio);
    } else if (tuning.mode == LambdaMode::wsr_split) {
      lambda = estimate_lambda_star(tuning_data->labeled_true().column(m), tuning_data->labeled_imputed().column(m),
                                    ratio);
    }
    diag.lambda_per_column.push_back(lambda.value);
    if (lambda.degenerate) diag.degenerate_lambda_columns.push_back(m);
    return ss_general_column_ucb(target, m, ucb, plan, lambda.value);
  });
  outcome.method = "ss_general_" + std::string(bounds::to_string(method));
  outcome.delta = spec.delta().value();
  outcome.asymptotic = bounds::is_asymptotic(method);
  outcome.semi_supervised = std::move(diag);
  return outcome;
}

rcps::CalibrationOutcome ss_binary_calibrate(const SemiSupervisedLosses& data, double alpha,
                                             const BudgetSplit& split) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  require_binary(data, "ss_binary_calibrate");
  auto outcome = rcps::fixed_sequence_test(
      data.grid_size(), alpha, [&](std::size_t m) { return ss_binary_column_ucb(data, m, split); });
  outcome.method = "ss_binary_clopper_pearson";
  outcome.delta = split.total();
  rcps::SemiSupervisedDiagnostics diag;
  diag.lambda_mode = "fixed";
  diag.delta1 = split.delta1().value();
  diag.delta2 = split.delta2().value();
  outcome.semi_supervised = std::move(diag);
  return outcome;
}

rcps::CalibrationOutcome naive_augmented_calibrate(const SemiSupervisedLosses& data, const rcps::RiskSpec& spec) {
  require_binary(data, "naive_augmented_calibrate");
  const auto n_total = static_cast<std::int64_t>(data.n_labeled() + data.n_unlabeled());
  auto outcome = rcps::fixed_sequence_test(data.grid_size(), spec.alpha(), [&](std::size_t m) {
    const auto failures =
        binary_count(data.labeled_true().column(m)) + binary_count(data.unlabeled_imputed().column(m));
    return bounds::clopper_pearson_ucb(bounds::BinomialCount(n_total, failures), spec.delta());
  });
  outcome.method = "naive_augmented_clopper_pearson";
  outcome.delta = spec.delta().value();
  outcome.unsafe = true;
  return outcome;
}

}  // namespace ssrcps::ppi

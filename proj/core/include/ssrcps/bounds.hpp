#pragma once

// One-sided upper confidence bounds for the mean of a bounded i.i.d. sample.
//
// Finite-sample bounds: Hoeffding, exact Clopper-Pearson (binary data) and the
// Waudby-Smith-Ramdas betting bound generalised to an arbitrary support [A, B].
// The CLT bound is asymptotic only; callers must surface that in diagnostics
// (see is_asymptotic).

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ssrcps::bounds {

// Error level delta of a bound. Valid range is [1e-12, 1).
class ErrorLevel {
 public:
  static constexpr double kMinimum = 1e-12;

  explicit ErrorLevel(double delta);

  double value() const noexcept { return delta_; }

 private:
  double delta_;
};

struct Support {
  double lo = 0.0;
  double hi = 1.0;

  double width() const noexcept { return hi - lo; }
};

// Ordered sample with a declared support. Order matters for WSR, which is a
// sequential bound, so values are kept exactly as given.
class BoundedSample {
 public:
  BoundedSample(std::vector<double> values, Support support);

  std::span<const double> values() const noexcept { return values_; }
  const Support& support() const noexcept { return support_; }
  std::size_t size() const noexcept { return values_.size(); }
  double mean() const noexcept;

 private:
  std::vector<double> values_;
  Support support_;
};

// k failures out of n Bernoulli trials.
class BinomialCount {
 public:
  BinomialCount(std::int64_t trials, std::int64_t failures);

  // k = ceil(n * rate), with rate*n snapped to the nearest integer when it is
  // within 1e-12 (relative) of it.
  static BinomialCount from_rate(std::int64_t trials, double rate);

  std::int64_t trials() const noexcept { return n_; }
  std::int64_t failures() const noexcept { return k_; }

 private:
  std::int64_t n_;
  std::int64_t k_;
};

enum class UcbMethod { hoeffding, clopper_pearson, wsr, wsr_scaled, clt };

struct UcbSpec {
  UcbMethod method;
  ErrorLevel delta;
};

std::string_view to_string(UcbMethod method) noexcept;
// Accepts the canonical names plus "cp" for clopper_pearson.
UcbMethod parse_ucb_method(std::string_view name);
bool is_asymptotic(UcbMethod method) noexcept;

double hoeffding_ucb(const BoundedSample& sample, ErrorLevel delta);

// P(Binom(n, p) <= k).
double binomial_cdf(BinomialCount count, double p);

// sup{R in [0,1] : P(Binom(n, R) <= k) >= delta}, by bisection to 1e-10.
// The returned value sits at the upper end of the final bracket.
double clopper_pearson_ucb(BinomialCount count, ErrorLevel delta);

// Waudby-Smith-Ramdas betting bound on [A, B]. Returns B when no R in [A, B]
// is rejected.
double wsr_ucb(const BoundedSample& sample, ErrorLevel delta);

// Maps the sample affinely onto [0, 1], runs wsr_ucb there and maps back.
double wsr_ucb_scaled(const BoundedSample& sample, ErrorLevel delta);

// Sample mean + z_{1-delta} * s / sqrt(n), s the unbiased standard deviation.
double clt_ucb(const BoundedSample& sample, ErrorLevel delta);

// Standard normal quantile, absolute error below 1e-9 on (0, 1).
double normal_quantile(double p);

// Dispatches on spec.method. clopper_pearson requires every value to be A or
// B (tolerance 1e-9); the count is then taken on the rescaled {0,1} values.
double compute_ucb(const UcbSpec& spec, const BoundedSample& sample);

namespace wsr_detail {

// Bet sizes nu_1..nu_n; independent of the candidate mean R.
std::vector<double> bet_sizes(const BoundedSample& sample, ErrorLevel delta);

// max_i K_i(R) for the capital process built from the given bet sizes. Stops
// early once the running product exceeds `stop_above`.
double max_capital(const BoundedSample& sample, std::span<const double> bets,
                   double r, double stop_above);

}  // namespace wsr_detail

}  // namespace ssrcps::bounds

#include "ssrcps/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>

#include "ssrcps/error.hpp"

namespace ssrcps::bounds {

namespace {

constexpr double kCpTolerance = 1e-10;
constexpr double kWsrTolerance = 1e-8;
constexpr int kMaxBisectionSteps = 200;
constexpr double kBinaryTolerance = 1e-9;

void require_nonempty(const BoundedSample& sample, const char* who) {
  if (sample.size() == 0) throw std::invalid_argument(std::string(who) + ": empty sample");
}

double unbiased_variance(std::span<const double> values, double mean) {
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(values.size() - 1);
}

}  // namespace

ErrorLevel::ErrorLevel(double delta) : delta_(delta) {
  if (!(delta >= kMinimum && delta < 1.0)) {
    throw std::invalid_argument("error level must lie in [1e-12, 1), got " + std::to_string(delta));
  }
}

BoundedSample::BoundedSample(std::vector<double> values, Support support)
    : values_(std::move(values)), support_(support) {
  if (!(support_.lo < support_.hi) || !std::isfinite(support_.lo) || !std::isfinite(support_.hi)) {
    throw std::invalid_argument("support requires finite A < B");
  }
  for (double v : values_) {
    if (!(v >= support_.lo && v <= support_.hi)) {
      throw std::invalid_argument("sample value " + std::to_string(v) + " outside declared support [" +
                                  std::to_string(support_.lo) + ", " + std::to_string(support_.hi) + "]");
    }
  }
}

double BoundedSample::mean() const noexcept {
  if (values_.empty()) return 0.0;
  return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
}

BinomialCount::BinomialCount(std::int64_t trials, std::int64_t failures) : n_(trials), k_(failures) {
  if (trials < 1) throw std::invalid_argument("binomial count needs at least one trial");
  if (failures < 0 || failures > trials) {
    throw std::invalid_argument("binomial failures must lie in [0, n]");
  }
}

BinomialCount BinomialCount::from_rate(std::int64_t trials, double rate) {
  double scaled = static_cast<double>(trials) * rate;
  const double nearest = std::nearbyint(scaled);
  if (std::abs(scaled - nearest) <= 1e-12 * std::max(1.0, std::abs(scaled))) scaled = nearest;
  return BinomialCount(trials, static_cast<std::int64_t>(std::ceil(scaled)));
}

std::string_view to_string(UcbMethod method) noexcept {
  switch (method) {
    case UcbMethod::hoeffding: return "hoeffding";
    case UcbMethod::clopper_pearson: return "clopper_pearson";
    case UcbMethod::wsr: return "wsr";
    case UcbMethod::wsr_scaled: return "wsr_scaled";
    case UcbMethod::clt: return "clt";
  }
  return "unknown";
}

UcbMethod parse_ucb_method(std::string_view name) {
  if (name == "hoeffding") return UcbMethod::hoeffding;
  if (name == "clopper_pearson" || name == "cp") return UcbMethod::clopper_pearson;
  if (name == "wsr") return UcbMethod::wsr;
  if (name == "wsr_scaled") return UcbMethod::wsr_scaled;
  if (name == "clt") return UcbMethod::clt;
  throw std::invalid_argument("unknown bound method '" + std::string(name) + "'");
}

bool is_asymptotic(UcbMethod method) noexcept { return method == UcbMethod::clt; }

double hoeffding_ucb(const BoundedSample& sample, ErrorLevel delta) {
  require_nonempty(sample, "hoeffding_ucb");
  const double n = static_cast<double>(sample.size());
  return sample.mean() + sample.support().width() * std::sqrt(std::log(1.0 / delta.value()) / (2.0 * n));
}

double binomial_cdf(BinomialCount count, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("binomial_cdf: p outside [0, 1]");
  const auto n = count.trials();
  const auto k = count.failures();
  if (k >= n || p == 0.0) return 1.0;
  if (p == 1.0) return 0.0;
  // P(X <= k) = 1 - I_p(k + 1, n - k)
  return boost::math::ibetac(static_cast<double>(k + 1), static_cast<double>(n - k), p);
}

double clopper_pearson_ucb(BinomialCount count, ErrorLevel delta) {
  if (count.failures() == count.trials()) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  for (int step = 0; step < kMaxBisectionSteps; ++step) {
    if (hi - lo <= kCpTolerance) return hi;
    const double mid = 0.5 * (lo + hi);
    if (binomial_cdf(count, mid) >= delta.value()) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  throw ConvergenceError("clopper_pearson_ucb: bisection did not converge");
}

namespace wsr_detail {

std::vector<double> bet_sizes(const BoundedSample& sample, ErrorLevel delta) {
  const auto values = sample.values();
  const double n = static_cast<double>(values.size());
  const double cap = 1.0 / sample.support().width();
  const double log_term = std::log(1.0 / delta.value());

  std::vector<double> bets;
  bets.reserve(values.size());
  double running_sum = 0.0;
  double running_sq = 0.0;
  double prev_variance = 0.25;
  for (std::size_t i = 0; i < values.size(); ++i) {
    bets.push_back(std::min(cap, std::sqrt(2.0 * log_term / (n * prev_variance))));
    const double count = static_cast<double>(i + 1);
    running_sum += values[i];
    const double mu = (0.5 + running_sum) / (1.0 + count);
    running_sq += (values[i] - mu) * (values[i] - mu);
    prev_variance = (0.25 + running_sq) / (1.0 + count);
  }
  return bets;
}

double max_capital(const BoundedSample& sample, std::span<const double> bets, double r,
                   double stop_above) {
  const auto values = sample.values();
  double capital = 1.0;
  double best = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) {
    capital *= 1.0 - bets[j] * (values[j] - r);
    best = std::max(best, capital);
    if (best > stop_above) break;
  }
  return best;
}

}  // namespace wsr_detail

double wsr_ucb(const BoundedSample& sample, ErrorLevel delta) {
  require_nonempty(sample, "wsr_ucb");
  const auto bets = wsr_detail::bet_sizes(sample, delta);
  const double threshold = 1.0 / delta.value();
  auto rejected = [&](double r) { return wsr_detail::max_capital(sample, bets, r, threshold) > threshold; };

  double lo = sample.support().lo;
  double hi = sample.support().hi;
  if (!rejected(hi)) return hi;
  // K_i(A) <= 1 < 1/delta, so lo is never rejected.
  for (int step = 0; step < kMaxBisectionSteps; ++step) {
    if (hi - lo <= kWsrTolerance) return hi;
    const double mid = 0.5 * (lo + hi);
    if (rejected(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  throw ConvergenceError("wsr_ucb: bisection did not converge");
}

double wsr_ucb_scaled(const BoundedSample& sample, ErrorLevel delta) {
  require_nonempty(sample, "wsr_ucb_scaled");
  const auto [a, b] = sample.support();
  std::vector<double> unit;
  unit.reserve(sample.size());
  for (double w : sample.values()) unit.push_back(std::clamp((w - a) / (b - a), 0.0, 1.0));
  const double scaled = wsr_ucb(BoundedSample(std::move(unit), Support{0.0, 1.0}), delta);
  return a + (b - a) * scaled;
}

double clt_ucb(const BoundedSample& sample, ErrorLevel delta) {
  if (sample.size() < 2) throw std::invalid_argument("clt_ucb needs at least two values");
  const double mean = sample.mean();
  const double variance = unbiased_variance(sample.values(), mean);
  const double z = normal_quantile(1.0 - delta.value());
  return mean + z * std::sqrt(variance / static_cast<double>(sample.size()));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must lie in (0, 1)");
  if (p == 0.5) return 0.0;

  // Acklam's rational approximation followed by one Halley step on erfc.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double compute_ucb(const UcbSpec& spec, const BoundedSample& sample) {
  switch (spec.method) {
    case UcbMethod::hoeffding: return hoeffding_ucb(sample, spec.delta);
    case UcbMethod::wsr: return wsr_ucb(sample, spec.delta);
    case UcbMethod::wsr_scaled: return wsr_ucb_scaled(sample, spec.delta);
    case UcbMethod::clt: return clt_ucb(sample, spec.delta);
    case UcbMethod::clopper_pearson: {
      require_nonempty(sample, "clopper_pearson");
      const auto [a, b] = sample.support();
      std::int64_t failures = 0;
      for (double v : sample.values()) {
        if (std::abs(v - b) <= kBinaryTolerance) {
          ++failures;
        } else if (std::abs(v - a) > kBinaryTolerance) {
          throw DataError("clopper_pearson requires binary values, got " + std::to_string(v));
        }
      }
      const double rate = clopper_pearson_ucb(
          BinomialCount(static_cast<std::int64_t>(sample.size()), failures), spec.delta);
      return a + (b - a) * rate;
    }
  }
  throw std::invalid_argument("unknown bound method");
}

}  // namespace ssrcps::bounds

#include "ssrcps/etsc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "ssrcps/error.hpp"

namespace ssrcps::etsc {

namespace {

std::size_t common_t_max(std::span<const EtscSample> samples) {
  if (samples.empty()) return 0;
  const std::size_t t_max = samples.front().t_max();
  for (const auto& s : samples) {
    if (s.t_max() != t_max) throw DataError("samples have different sequence lengths");
  }
  return t_max;
}

Label require_label(const EtscSample& sample, LabelSource source) {
  const auto& label = source == LabelSource::truth ? sample.true_label : sample.imputed_label;
  if (!label) {
    throw DataError("sample '" + sample.id + "' has no " +
                    (source == LabelSource::truth ? "true label" : "imputed label"));
  }
  return *label;
}

std::vector<double> screening_levels(double resolution) {
  if (!(resolution > 0.0 && resolution < 1.0)) throw std::invalid_argument("screen resolution must lie in (0, 1)");
  std::vector<double> levels;
  for (std::size_t k = 0;; ++k) {
    const double xi = static_cast<double>(k) * resolution;
    if (xi >= 1.0 - 1e-12) break;
    levels.push_back(xi);
  }
  levels.push_back(1.0);
  return levels;
}

// Halt time and both gap losses of every sample under one threshold vector.
struct HaltedLosses {
  std::vector<std::size_t> halt;
  std::vector<int> gap_truth;
  std::vector<int> gap_imputed;
};

HaltedLosses evaluate_rule(std::span<const EtscSample> samples, const ThresholdVector& q, bool need_truth,
                           bool need_imputed) {
  HaltedLosses out;
  out.halt.reserve(samples.size());
  for (const auto& s : samples) {
    const std::size_t h = halt_time(s, q);
    out.halt.push_back(h);
    if (need_truth) out.gap_truth.push_back(gap_loss_for_label(s, require_label(s, LabelSource::truth), h));
    if (need_imputed) out.gap_imputed.push_back(gap_loss_for_label(s, require_label(s, LabelSource::imputed), h));
  }
  return out;
}

}  // namespace

void validate(const EtscSample& sample) {
  if (sample.confidence.empty()) throw DataError("sample '" + sample.id + "' has no timesteps");
  if (sample.early_pred.size() != sample.confidence.size()) {
    throw DataError("sample '" + sample.id + "': confidence and early predictions differ in length");
  }
  for (double c : sample.confidence) {
    if (!(c >= 0.0 && c <= 1.0)) throw DataError("sample '" + sample.id + "': confidence outside [0, 1]");
  }
}

ThresholdVector::ThresholdVector(std::vector<double> thresholds) : thresholds_(std::move(thresholds)) {
  if (thresholds_.empty()) throw std::invalid_argument("threshold vector must not be empty");
  for (double v : thresholds_) {
    if (!(std::isinf(v) && v > 0) && !(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("thresholds must lie in [0, 1] or be +inf");
    }
  }
}

ThresholdVector ThresholdVector::identity(std::size_t t_max) {
  return ThresholdVector(std::vector<double>(t_max, kNeverHalt));
}

void ThresholdVector::set(std::size_t t, double value) {
  if (!(std::isinf(value) && value > 0) && !(value >= 0.0 && value <= 1.0)) {
    throw std::invalid_argument("thresholds must lie in [0, 1] or be +inf");
  }
  thresholds_.at(t) = value;
}

bool ThresholdVector::is_identity() const noexcept {
  return std::all_of(thresholds_.begin(), thresholds_.end(), [](double v) { return std::isinf(v); });
}

std::size_t halt_time(const EtscSample& sample, const ThresholdVector& q) {
  const std::size_t t_max = sample.t_max();
  if (q.size() != t_max) throw std::invalid_argument("threshold vector length does not match the sample");
  for (std::size_t t = 0; t + 1 < t_max; ++t) {
    if (sample.confidence[t] >= q[t]) return t + 1;
  }
  return t_max;
}

int gap_loss_for_label(const EtscSample& sample, Label label, std::size_t halt) {
  const int full_correct = label == sample.full_pred ? 1 : 0;
  const int early_correct = label == sample.early_pred.at(halt - 1) ? 1 : 0;
  return std::max(full_correct - early_correct, 0);
}

int gap_loss(const EtscSample& sample, LabelSource source, const ThresholdVector& q) {
  return gap_loss_for_label(sample, require_label(sample, source), halt_time(sample, q));
}

std::optional<double> conditional_empirical_risk(std::span<const EtscSample> samples, LabelSource source,
                                                 const ThresholdVector& q, std::size_t t) {
  std::size_t halted = 0;
  std::size_t losses = 0;
  for (const auto& s : samples) {
    const std::size_t h = halt_time(s, q);
    if (h > t) continue;
    ++halted;
    losses += static_cast<std::size_t>(gap_loss_for_label(s, require_label(s, source), h));
  }
  if (halted == 0) return std::nullopt;
  return static_cast<double>(losses) / static_cast<double>(halted);
}

ThresholdVector candidate_screening(std::span<const EtscSample> labeled_stage1, const EtscRiskSpec& spec) {
  if (labeled_stage1.empty()) throw std::invalid_argument("candidate_screening: empty screening set");
  const std::size_t t_max = common_t_max(labeled_stage1);
  const auto levels = screening_levels(spec.screen_resolution);

  auto candidate = ThresholdVector::identity(t_max);
  for (std::size_t t = 1; t <= t_max; ++t) {
    ThresholdVector trial = candidate;
    for (double xi : levels) {
      trial.set(t - 1, xi);
      const auto risk = conditional_empirical_risk(labeled_stage1, LabelSource::truth, trial, t);
      if (!risk) {
        candidate.set(t - 1, kNeverHalt);
        break;
      }
      if (*risk <= spec.alpha) {
        candidate.set(t - 1, xi);
        break;
      }
    }
  }
  return candidate;
}

std::string_view to_string(Stage2Mode mode) noexcept {
  switch (mode) {
    case Stage2Mode::binary_cp: return "binary_cp";
    case Stage2Mode::general_wsr: return "general_wsr";
    case Stage2Mode::general_clt: return "general_clt";
    case Stage2Mode::labeled_only: return "labeled_only";
  }
  return "unknown";
}

Stage2Mode parse_stage2_mode(std::string_view name) {
  if (name == "binary_cp") return Stage2Mode::binary_cp;
  if (name == "general_wsr") return Stage2Mode::general_wsr;
  if (name == "general_clt") return Stage2Mode::general_clt;
  if (name == "labeled_only") return Stage2Mode::labeled_only;
  throw std::invalid_argument("unknown stage-2 mode '" + std::string(name) + "'");
}

Stage2Result stage2_calibrate(std::span<const EtscSample> labeled_stage2, std::span<const EtscSample> unlabeled,
                              const ThresholdVector& candidate, const EtscRiskSpec& spec, Stage2Mode mode) {
  if (labeled_stage2.empty()) throw std::invalid_argument("stage2_calibrate: empty labeled set");
  const std::size_t t_max = common_t_max(labeled_stage2);
  if (candidate.size() != t_max) throw std::invalid_argument("candidate length does not match the samples");
  const bool semi_supervised = mode != Stage2Mode::labeled_only;
  if (semi_supervised) {
    if (unlabeled.empty()) throw std::invalid_argument("semi-supervised stage 2 needs unlabeled samples");
    if (common_t_max(unlabeled) != t_max) throw DataError("labeled and unlabeled sequence lengths differ");
  }
  if (mode == Stage2Mode::binary_cp && !spec.split) throw std::invalid_argument("binary_cp mode needs a budget split");

  Stage2Result result{ThresholdVector::identity(t_max), 0, {}, "completed"};
  for (std::size_t t = t_max; t >= 1; --t) {
    ThresholdVector trial = result.thresholds;
    trial.set(t - 1, candidate[t - 1]);

    const auto lab = evaluate_rule(labeled_stage2, trial, true, semi_supervised);
    const auto unl = semi_supervised ? evaluate_rule(unlabeled, trial, false, true) : HaltedLosses{};

    bool accepted = true;
    for (std::size_t tp = t; tp <= t_max; ++tp) {
      Stage2Step step{t, tp, 0, 0, 0.0, false};
      std::int64_t truth_failures = 0;
      std::int64_t clipped_failures = 0;
      std::vector<double> truth_loss;
      std::vector<double> imputed_loss;
      for (std::size_t i = 0; i < labeled_stage2.size(); ++i) {
        if (lab.halt[i] > tp) continue;
        ++step.halted_labeled;
        truth_failures += lab.gap_truth[i];
        if (semi_supervised) {
          clipped_failures += std::max(lab.gap_truth[i] - lab.gap_imputed[i], 0);
          truth_loss.push_back(lab.gap_truth[i]);
          imputed_loss.push_back(lab.gap_imputed[i]);
        }
      }
      if (step.halted_labeled == 0) {
        result.stop_reason = "empty_labeled_halt_set";
        return result;
      }
      std::int64_t unlabeled_failures = 0;
      std::vector<double> unlabeled_loss;
      for (std::size_t j = 0; j < unl.halt.size(); ++j) {
        if (unl.halt[j] > tp) continue;
        ++step.halted_unlabeled;
        unlabeled_failures += unl.gap_imputed[j];
        unlabeled_loss.push_back(unl.gap_imputed[j]);
      }

      const auto n_i = static_cast<std::int64_t>(step.halted_labeled);
      const auto n_j = static_cast<std::int64_t>(step.halted_unlabeled);
      std::optional<double> ucb;
      std::string failure;
      switch (mode) {
        case Stage2Mode::labeled_only:
          ucb = bounds::clopper_pearson_ucb(bounds::BinomialCount(n_i, truth_failures), spec.delta);
          break;
        case Stage2Mode::binary_cp:
          if (n_j == 0) {
            failure = "empty_unlabeled_halt_set";
          } else {
            ucb = bounds::clopper_pearson_ucb(bounds::BinomialCount(n_j, unlabeled_failures), spec.split->delta1()) +
                  bounds::clopper_pearson_ucb(bounds::BinomialCount(n_i, clipped_failures), spec.split->delta2());
          }
          break;
        case Stage2Mode::general_wsr:
        case Stage2Mode::general_clt: {
          if (n_j < n_i) {
            failure = "insufficient_unlabeled";
            break;
          }
          if (mode == Stage2Mode::general_clt && n_i < 2) {
            failure = "clt_needs_two_labeled";
            break;
          }
          const std::size_t block = unlabeled_loss.size() / truth_loss.size();
          std::vector<double> w(truth_loss.size());
          for (std::size_t i = 0; i < truth_loss.size(); ++i) {
            double sum = 0.0;
            for (std::size_t k = 0; k < block; ++k) sum += unlabeled_loss[i * block + k];
            w[i] = std::clamp(sum / static_cast<double>(block) + truth_loss[i] - imputed_loss[i], -1.0, 2.0);
          }
          const bounds::BoundedSample sample(std::move(w), bounds::Support{-1.0, 2.0});
          ucb = mode == Stage2Mode::general_wsr ? bounds::wsr_ucb(sample, spec.delta)
                                                : bounds::clt_ucb(sample, spec.delta);
          break;
        }
      }
      if (!ucb) {
        result.trace.push_back(step);
        result.stop_reason = failure;
        return result;
      }
      step.ucb = *ucb;
      step.passed = *ucb < spec.alpha;
      result.trace.push_back(step);
      if (!step.passed) {
        accepted = false;
        break;
      }
    }
    if (!accepted) {
      result.stop_reason = "ucb_not_below_alpha";
      return result;
    }
    result.thresholds = trial;
    result.revealed = t_max - t + 1;
  }
  return result;
}

std::vector<double> halt_curve(std::span<const EtscSample> samples, const ThresholdVector& q) {
  if (samples.empty()) throw std::invalid_argument("halt_curve: no samples");
  const std::size_t t_max = q.size();
  std::vector<std::size_t> counts(t_max + 1, 0);
  for (const auto& s : samples) ++counts[halt_time(s, q)];
  std::vector<double> curve(t_max);
  std::size_t cumulative = 0;
  for (std::size_t t = 1; t <= t_max; ++t) {
    cumulative += counts[t];
    curve[t - 1] = static_cast<double>(cumulative) / static_cast<double>(samples.size());
  }
  return curve;
}

EvaluationReport evaluate(std::span<const EtscSample> samples, const ThresholdVector& q) {
  EvaluationReport report;
  report.halt_curve = halt_curve(samples, q);
  const std::size_t t_max = q.size();
  std::vector<std::size_t> halted(t_max + 1, 0);
  std::vector<std::size_t> losses(t_max + 1, 0);
  for (const auto& s : samples) {
    const std::size_t h = halt_time(s, q);
    ++halted[h];
    losses[h] += static_cast<std::size_t>(gap_loss_for_label(s, require_label(s, LabelSource::truth), h));
  }
  std::size_t cum_halted = 0;
  std::size_t cum_losses = 0;
  for (std::size_t t = 1; t <= t_max; ++t) {
    cum_halted += halted[t];
    cum_losses += losses[t];
    if (cum_halted == 0) {
      report.conditional_risk.emplace_back(std::nullopt);
      continue;
    }
    if (!report.t0) report.t0 = t;
    report.conditional_risk.emplace_back(static_cast<double>(cum_losses) / static_cast<double>(cum_halted));
  }
  return report;
}

void check_disjoint(std::span<const EtscSample> a, std::span<const EtscSample> b) {
  std::unordered_set<std::string> ids;
  for (const auto& s : a) ids.insert(s.id);
  for (const auto& s : b) {
    if (ids.count(s.id) != 0) throw DataError("sample '" + s.id + "' appears in both calibration stages");
  }
}

}  // namespace ssrcps::etsc

#include "ssrcps/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <toml.hpp>

#include "ssrcps/version.hpp"

namespace ssrcps::sim {

namespace {

using nlohmann::json;

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::string_view to_string(CurveShape shape) noexcept {
  switch (shape) {
    case CurveShape::linear: return "linear";
    case CurveShape::u_shaped: return "u_shaped";
    case CurveShape::values: return "values";
  }
  return "?";
}

CurveShape parse_curve_shape(std::string_view name) {
  if (name == "linear") return CurveShape::linear;
  if (name == "u_shaped") return CurveShape::u_shaped;
  if (name == "values") return CurveShape::values;
  throw std::invalid_argument("unknown curve shape '" + std::string(name) + "'");
}

bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

bool is_loss_method(std::string_view name) {
  return std::find(std::begin(kLossMethods), std::end(kLossMethods), name) != std::end(kLossMethods);
}

bool is_etsc_method(std::string_view name) {
  return std::find(std::begin(kEtscMethods), std::end(kEtscMethods), name) != std::end(kEtscMethods);
}

void check_methods(const ScenarioConfig& config, std::span<const std::string> methods) {
  if (methods.empty()) throw std::invalid_argument("no methods requested");
  const bool etsc_kind = config.kind == ScenarioKind::etsc_basic;
  for (const auto& m : methods) {
    if (etsc_kind ? !is_etsc_method(m) : !is_loss_method(m)) {
      throw std::invalid_argument("method '" + m + "' does not apply to scenario kind '" +
                                  std::string(to_string(config.kind)) + "'");
    }
    const bool needs_split = m == "ss_binary" || m == "etsc_binary_cp";
    if (needs_split && !(config.delta1 && config.delta2)) {
      throw std::invalid_argument("method '" + m + "' needs delta1 and delta2");
    }
    const bool binary_only = m == "rcps_labeled_cp" || m == "ss_binary" || m == "naive_augmented";
    if (binary_only && config.kind == ScenarioKind::general_bounded) {
      throw std::invalid_argument("method '" + m + "' needs binary losses");
    }
  }
}

// Loss at risk level r for latent u ~ U(0,1). Binary: 1{u < r}. Bounded:
// piecewise linear in u with mean r, nondecreasing in r for fixed u.
double latent_loss(bool binary, double u, double r) {
  if (binary) return u < r ? 1.0 : 0.0;
  return r <= 0.5 ? 2.0 * r * u : 1.0 - 2.0 * (1.0 - r) * (1.0 - u);
}

struct RowLatents {
  std::vector<double> u;
  std::vector<char> correct;
  std::vector<double> v;
};

RowLatents draw_latents(std::mt19937_64& rng, std::size_t count, double accuracy) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::bernoulli_distribution coin(accuracy);
  RowLatents out;
  out.u.resize(count);
  out.correct.resize(count);
  out.v.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.u[i] = unif(rng);
    out.correct[i] = coin(rng) ? 1 : 0;
    out.v[i] = unif(rng);
  }
  return out;
}

double imputed_loss(bool binary, ImputationRegime regime, double loss, bool correct, double v, double r) {
  if (correct) return loss;
  switch (regime) {
    case ImputationRegime::symmetric_noise: return binary ? 1.0 - loss : latent_loss(false, v, r);
    case ImputationRegime::optimistic: return binary ? 0.0 : loss * v;
    case ImputationRegime::pessimistic: return binary ? 1.0 : loss + (1.0 - loss) * v;
  }
  return loss;
}

std::vector<std::string> make_ids(char prefix, std::size_t count) {
  std::vector<std::string> ids;
  ids.reserve(count);
  for (std::size_t i = 0; i < count; ++i) ids.push_back(prefix + std::to_string(i));
  return ids;
}

rcps::LossTable build_table(const rcps::ParameterGrid& grid, char prefix, const RowLatents& rows,
                            const std::vector<double>& risks, bool binary, bool imputed,
                            ImputationRegime regime) {
  const std::size_t n = rows.u.size();
  std::vector<double> data;
  data.reserve(n * risks.size());
  for (double r : risks) {
    for (std::size_t i = 0; i < n; ++i) {
      const double loss = latent_loss(binary, rows.u[i], r);
      data.push_back(imputed ? imputed_loss(binary, regime, loss, rows.correct[i] != 0, rows.v[i], r) : loss);
    }
  }
  return rcps::LossTable(grid, make_ids(prefix, n), std::move(data));
}

etsc::EtscSample draw_etsc_sample(std::mt19937_64& rng, std::string id, const ScenarioConfig& config,
                                  bool with_truth, bool with_imputed) {
  const std::size_t t_max = config.etsc.t_max;
  std::bernoulli_distribution fair(0.5);
  std::bernoulli_distribution full_correct(config.etsc.full_accuracy);
  std::bernoulli_distribution imputation_correct(config.imputation_accuracy);
  std::uniform_int_distribution<std::size_t> resolve(1, t_max);
  std::normal_distribution<double> noise(0.0, 1.0);

  const etsc::Label y = fair(rng) ? 1 : 0;
  const etsc::Label full = full_correct(rng) ? y : 1 - y;
  // The early prediction locks onto the full one from timestep r on.
  const std::size_t r = resolve(rng);

  etsc::EtscSample s;
  s.id = std::move(id);
  s.full_pred = full;
  s.confidence.resize(t_max);
  s.early_pred.resize(t_max);
  for (std::size_t t = 1; t <= t_max; ++t) {
    const bool coin = fair(rng);
    const double z = noise(rng);
    double c;
    if (t < r) {
      s.early_pred[t - 1] = coin ? 1 : 0;
      c = 0.35 + 0.4 * static_cast<double>(t) / static_cast<double>(r) + 0.1 * z;
    } else {
      s.early_pred[t - 1] = full;
      c = 0.7 + 0.25 * std::min(1.0, static_cast<double>(t - r + 1) / 3.0) + 0.05 * z;
    }
    s.confidence[t - 1] = std::clamp(c, 0.0, 1.0);
  }
  const bool imputed_ok = imputation_correct(rng);
  if (with_truth) s.true_label = y;
  if (with_imputed) s.imputed_label = imputed_ok ? y : 1 - y;
  return s;
}

std::vector<etsc::EtscSample> draw_etsc_set(std::mt19937_64& rng, const ScenarioConfig& config, char prefix,
                                            std::size_t count, bool with_truth, bool with_imputed) {
  std::vector<etsc::EtscSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(draw_etsc_sample(rng, prefix + std::to_string(i), config, with_truth, with_imputed));
  }
  return out;
}

rcps::CalibrationOutcome run_loss_method(const std::string& method, const ppi::SemiSupervisedLosses& data,
                                         const ScenarioConfig& config) {
  const rcps::RiskSpec spec(config.alpha, bounds::ErrorLevel(config.delta));
  using bounds::UcbMethod;
  using ppi::LambdaMode;
  using ppi::PowerTuning;
  if (method == "rcps_labeled_cp") {
    return rcps::fixed_sequence_calibrate(data.labeled_true(), spec, UcbMethod::clopper_pearson);
  }
  if (method == "rcps_labeled_wsr") return rcps::fixed_sequence_calibrate(data.labeled_true(), spec, UcbMethod::wsr);
  if (method == "ss_binary") {
    return ppi::ss_binary_calibrate(data, config.alpha,
                                    ppi::BudgetSplit::for_total(config.delta, *config.delta1, *config.delta2));
  }
  if (method == "ss_general_wsr") return ppi::ss_general_calibrate(data, spec, UcbMethod::wsr, PowerTuning::fixed_one());
  if (method == "ss_general_wsr_scaled") {
    return ppi::ss_general_calibrate(data, spec, UcbMethod::wsr_scaled, PowerTuning::fixed_one());
  }
  if (method == "ss_general_clt") return ppi::ss_general_calibrate(data, spec, UcbMethod::clt, PowerTuning::fixed_one());
  if (method == "ss_general_clt_tuned") {
    return ppi::ss_general_calibrate(data, spec, UcbMethod::clt, PowerTuning{LambdaMode::clt_inline, 1.0, 0.1});
  }
  if (method == "ss_general_wsr_split") {
    return ppi::ss_general_calibrate(data, spec, UcbMethod::wsr,
                                     PowerTuning{LambdaMode::wsr_split, 1.0, config.tuning_fraction});
  }
  if (method == "naive_augmented") return ppi::naive_augmented_calibrate(data, spec);
  throw std::invalid_argument("unknown method '" + method + "'");
}

std::vector<TrialResult> run_loss_trial(const ScenarioConfig& config, std::span<const std::string> methods,
                                        std::uint64_t trial_index) {
  const Scenario scenario = generate_scenario(config, trial_index);
  const std::size_t ref = reference_column(config);
  const std::size_t ref_cols[] = {ref};
  const ppi::SemiSupervisedLosses ref_data = scenario.data.select_columns(ref_cols);
  const double pp_ref = scenario.data.n_unlabeled() > 0 ? ppi::pp_risk(scenario.data, ref, 1.0)
                                                         : rcps::empirical_risk(scenario.data.labeled_true(), ref);

  std::vector<TrialResult> out;
  out.reserve(methods.size());
  for (const auto& method : methods) {
    const auto outcome = run_loss_method(method, scenario.data, config);
    TrialResult r;
    r.trial_index = trial_index;
    r.asymptotic = outcome.asymptotic;
    r.unsafe = outcome.unsafe;
    r.selected = outcome.selected;
    r.stop_index = outcome.stop_index;
    r.ucb_trace = outcome.ucb_trace;
    if (outcome.selected) {
      r.true_risk_at_qhat = scenario.true_risk[*outcome.selected];
      for (std::size_t m = 0; m <= *outcome.selected; ++m) {
        if (scenario.true_risk[m] > config.alpha) r.false_rejection = true;
      }
    }
    r.violated = r.true_risk_at_qhat > config.alpha;
    r.pp_risk_at_reference = pp_ref;
    r.ucb_at_reference = run_loss_method(method, ref_data, config).ucb_trace.front();
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<TrialResult> run_etsc_trial(const ScenarioConfig& config, std::span<const std::string> methods,
                                        std::uint64_t trial_index) {
  const EtscScenario scenario = generate_etsc_scenario(config, trial_index);
  etsc::EtscRiskSpec spec;
  spec.alpha = config.alpha;
  spec.delta = bounds::ErrorLevel(config.delta);
  if (config.delta1 && config.delta2) spec.split = ppi::BudgetSplit::for_total(config.delta, *config.delta1, *config.delta2);
  spec.screen_resolution = config.etsc.screen_resolution;
  const auto candidate = etsc::candidate_screening(scenario.stage1, spec);

  std::vector<TrialResult> out;
  out.reserve(methods.size());
  for (const auto& method : methods) {
    const auto mode = etsc::parse_stage2_mode(std::string_view(method).substr(5));
    const auto result = etsc::stage2_calibrate(scenario.stage2, scenario.unlabeled, candidate, spec, mode);
    const auto report = etsc::evaluate(scenario.test, result.thresholds);
    TrialResult r;
    r.trial_index = trial_index;
    r.asymptotic = mode == etsc::Stage2Mode::general_clt;
    if (result.revealed > 0) r.selected = result.revealed;
    r.stop_index = result.revealed;
    for (const auto& step : result.trace) r.ucb_trace.push_back(step.ucb);
    double worst = 0.0;
    if (report.t0) {
      for (std::size_t t = *report.t0; t <= report.conditional_risk.size(); ++t) {
        if (const auto& risk = report.conditional_risk[t - 1]) worst = std::max(worst, *risk);
      }
    }
    r.true_risk_at_qhat = worst;
    r.violated = worst > config.alpha + config.etsc.violation_slack;
    r.false_rejection = r.violated;
    r.halt_curve = report.halt_curve;
    out.push_back(std::move(r));
  }
  return out;
}

double quantile(std::vector<double> sorted, double p) {
  if (sorted.empty()) return 0.0;
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::pair<double, double> mean_std(std::span<const double> xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

json risk_curve_json(const RiskCurve& curve) {
  json j{{"shape", to_string(curve.shape)}};
  switch (curve.shape) {
    case CurveShape::linear:
      j["start"] = curve.start;
      j["end"] = curve.end;
      break;
    case CurveShape::u_shaped:
      j["start"] = curve.start;
      j["trough"] = curve.trough;
      break;
    case CurveShape::values: j["values"] = curve.values; break;
  }
  return j;
}

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> known, std::string_view where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw std::invalid_argument("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

}  // namespace

std::vector<double> RiskCurve::evaluate(std::size_t grid_size) const {
  if (grid_size == 0) throw std::invalid_argument("grid size must be positive");
  std::vector<double> out(grid_size);
  const double last = static_cast<double>(grid_size - 1);
  switch (shape) {
    case CurveShape::linear:
      for (std::size_t m = 0; m < grid_size; ++m) {
        out[m] = grid_size == 1 ? start : start + (end - start) * static_cast<double>(m) / last;
      }
      break;
    case CurveShape::u_shaped: {
      const double c = last / 2.0;
      for (std::size_t m = 0; m < grid_size; ++m) {
        const double d = c > 0.0 ? (static_cast<double>(m) - c) / c : 0.0;
        out[m] = trough + (start - trough) * d * d;
      }
      break;
    }
    case CurveShape::values:
      if (values.size() != grid_size) {
        throw std::invalid_argument("curve has " + std::to_string(values.size()) + " values, grid has " +
                                    std::to_string(grid_size));
      }
      out = values;
      break;
  }
  for (double r : out) {
    if (!in_unit(r)) throw std::invalid_argument("risk curve leaves [0, 1]");
  }
  return out;
}

void ScenarioConfig::validate() const {
  if (n_labeled == 0) throw std::invalid_argument("n_labeled must be positive");
  if (!in_unit(imputation_accuracy)) throw std::invalid_argument("imputation_accuracy must lie in [0, 1]");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  bounds::ErrorLevel check_delta(delta);
  if (delta1.has_value() != delta2.has_value()) throw std::invalid_argument("give both delta1 and delta2 or neither");
  if (delta1) ppi::BudgetSplit::for_total(delta, *delta1, *delta2);
  if (!(tuning_fraction > 0.0 && tuning_fraction < 1.0)) throw std::invalid_argument("tuning_fraction must lie in (0, 1)");
  if (kind == ScenarioKind::etsc_basic) {
    if (etsc.t_max == 0) throw std::invalid_argument("etsc.t_max must be positive");
    if (etsc.n_stage1 == 0 || n_test == 0) throw std::invalid_argument("etsc scenario needs stage-1 and test samples");
    if (!in_unit(etsc.full_accuracy)) throw std::invalid_argument("etsc.full_accuracy must lie in [0, 1]");
    if (!(etsc.screen_resolution > 0.0 && etsc.screen_resolution <= 1.0)) {
      throw std::invalid_argument("etsc.screen_resolution must lie in (0, 1]");
    }
    return;
  }
  const auto risks = curve.evaluate(grid_size);
  if (kind == ScenarioKind::mono_binary && !std::is_sorted(risks.begin(), risks.end())) {
    throw std::invalid_argument("mono_binary needs a nondecreasing risk curve");
  }
}

std::string_view to_string(ScenarioKind kind) noexcept {
  switch (kind) {
    case ScenarioKind::mono_binary: return "mono_binary";
    case ScenarioKind::nonmono_binary: return "nonmono_binary";
    case ScenarioKind::general_bounded: return "general_bounded";
    case ScenarioKind::etsc_basic: return "etsc_basic";
  }
  return "?";
}

std::string_view to_string(ImputationRegime regime) noexcept {
  switch (regime) {
    case ImputationRegime::symmetric_noise: return "symmetric_noise";
    case ImputationRegime::optimistic: return "optimistic";
    case ImputationRegime::pessimistic: return "pessimistic";
  }
  return "?";
}

ScenarioKind parse_scenario_kind(std::string_view name) {
  for (auto k : {ScenarioKind::mono_binary, ScenarioKind::nonmono_binary, ScenarioKind::general_bounded,
                 ScenarioKind::etsc_basic}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown scenario kind '" + std::string(name) + "'");
}

ImputationRegime parse_imputation_regime(std::string_view name) {
  for (auto r : {ImputationRegime::symmetric_noise, ImputationRegime::optimistic, ImputationRegime::pessimistic}) {
    if (to_string(r) == name) return r;
  }
  throw std::invalid_argument("unknown imputation regime '" + std::string(name) + "'");
}

nlohmann::json to_json(const ScenarioConfig& c) {
  json j{
      {"name", c.name},
      {"kind", to_string(c.kind)},
      {"n_labeled", c.n_labeled},
      {"n_unlabeled", c.n_unlabeled},
      {"n_test", c.n_test},
      {"grid_size", c.grid_size},
      {"curve", risk_curve_json(c.curve)},
      {"imputation_accuracy", c.imputation_accuracy},
      {"imputation_regime", to_string(c.regime)},
      {"master_seed", c.master_seed},
      {"alpha", c.alpha},
      {"delta", c.delta},
      {"tuning_fraction", c.tuning_fraction},
      {"trials", c.trials},
      {"methods", c.methods},
  };
  if (c.delta1) j["delta1"] = *c.delta1;
  if (c.delta2) j["delta2"] = *c.delta2;
  if (c.kind == ScenarioKind::etsc_basic) {
    j["etsc"] = json{{"t_max", c.etsc.t_max},
                     {"n_stage1", c.etsc.n_stage1},
                     {"full_accuracy", c.etsc.full_accuracy},
                     {"screen_resolution", c.etsc.screen_resolution},
                     {"violation_slack", c.etsc.violation_slack}};
  }
  return j;
}

ScenarioConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be an object");
  reject_unknown_keys(j,
                      {"name", "kind", "n_labeled", "n_unlabeled", "n_test", "grid_size", "curve",
                       "imputation_accuracy", "imputation_regime", "master_seed", "alpha", "delta", "delta1",
                       "delta2", "tuning_fraction", "trials", "methods", "etsc"},
                      "config");
  ScenarioConfig c;
  try {
    c.name = j.value("name", c.name);
    c.kind = parse_scenario_kind(j.value("kind", std::string(to_string(c.kind))));
    c.n_labeled = j.value("n_labeled", c.n_labeled);
    c.n_unlabeled = j.value("n_unlabeled", c.n_unlabeled);
    c.n_test = j.value("n_test", c.n_test);
    c.grid_size = j.value("grid_size", c.grid_size);
    c.imputation_accuracy = j.value("imputation_accuracy", c.imputation_accuracy);
    c.regime = parse_imputation_regime(j.value("imputation_regime", std::string(to_string(c.regime))));
    c.master_seed = j.value("master_seed", c.master_seed);
    c.alpha = j.value("alpha", c.alpha);
    c.delta = j.value("delta", c.delta);
    if (j.contains("delta1")) c.delta1 = j.at("delta1").get<double>();
    if (j.contains("delta2")) c.delta2 = j.at("delta2").get<double>();
    c.tuning_fraction = j.value("tuning_fraction", c.tuning_fraction);
    c.trials = j.value("trials", c.trials);
    c.methods = j.value("methods", c.methods);
    if (j.contains("curve")) {
      const auto& cj = j.at("curve");
      reject_unknown_keys(cj, {"shape", "start", "end", "trough", "values"}, "curve");
      c.curve.shape = parse_curve_shape(cj.value("shape", std::string("linear")));
      c.curve.start = cj.value("start", c.curve.start);
      c.curve.end = cj.value("end", c.curve.end);
      c.curve.trough = cj.value("trough", c.curve.trough);
      c.curve.values = cj.value("values", c.curve.values);
    }
    if (j.contains("etsc")) {
      const auto& ej = j.at("etsc");
      reject_unknown_keys(ej, {"t_max", "n_stage1", "full_accuracy", "screen_resolution", "violation_slack"},
                          "etsc");
      c.etsc.t_max = ej.value("t_max", c.etsc.t_max);
      c.etsc.n_stage1 = ej.value("n_stage1", c.etsc.n_stage1);
      c.etsc.full_accuracy = ej.value("full_accuracy", c.etsc.full_accuracy);
      c.etsc.screen_resolution = ej.value("screen_resolution", c.etsc.screen_resolution);
      c.etsc.violation_slack = ej.value("violation_slack", c.etsc.violation_slack);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config '" + path + "'");
  const auto ext = std::filesystem::path(path).extension().string();
  json j;
  if (ext == ".toml") {
    try {
      const toml::table table = toml::parse(in, path);
      std::ostringstream os;
      os << toml::json_formatter{table};
      j = json::parse(os.str());
    } catch (const toml::parse_error& e) {
      throw std::invalid_argument("config '" + path + "': " + std::string(e.description()));
    }
  } else {
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw std::invalid_argument("config '" + path + "': " + e.what());
    }
  }
  return config_from_json(j);
}

std::uint64_t config_hash(const ScenarioConfig& config) {
  const std::string text = to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t trial_index) noexcept {
  return splitmix64(splitmix64(master_seed) ^ trial_index);
}

Scenario generate_scenario(const ScenarioConfig& config, std::uint64_t trial_index) {
  if (config.kind == ScenarioKind::etsc_basic) throw std::invalid_argument("use generate_etsc_scenario for etsc");
  const auto risks = config.curve.evaluate(config.grid_size);
  const bool binary = config.kind != ScenarioKind::general_bounded;
  const auto grid = rcps::ParameterGrid::numbered(config.grid_size);
  std::mt19937_64 rng(trial_seed(config.master_seed, trial_index));

  const auto labeled = draw_latents(rng, config.n_labeled, config.imputation_accuracy);
  const auto unlabeled = draw_latents(rng, config.n_unlabeled, config.imputation_accuracy);
  Scenario s{ppi::SemiSupervisedLosses(build_table(grid, 'l', labeled, risks, binary, false, config.regime),
                                       build_table(grid, 'l', labeled, risks, binary, true, config.regime),
                                       build_table(grid, 'u', unlabeled, risks, binary, true, config.regime)),
             risks, std::nullopt};
  if (config.n_test > 0) {
    const auto test = draw_latents(rng, config.n_test, config.imputation_accuracy);
    s.test = build_table(grid, 't', test, risks, binary, false, config.regime);
  }
  return s;
}

std::size_t reference_column(const ScenarioConfig& config) {
  const auto risks = config.curve.evaluate(config.grid_size);
  std::size_t best = 0;
  for (std::size_t m = 1; m < risks.size(); ++m) {
    if (std::abs(risks[m] - config.alpha) < std::abs(risks[best] - config.alpha)) best = m;
  }
  return best;
}

EtscScenario generate_etsc_scenario(const ScenarioConfig& config, std::uint64_t trial_index) {
  if (config.kind != ScenarioKind::etsc_basic) throw std::invalid_argument("not an etsc scenario");
  std::mt19937_64 rng(trial_seed(config.master_seed, trial_index));
  EtscScenario s;
  s.stage1 = draw_etsc_set(rng, config, 'a', config.etsc.n_stage1, true, true);
  s.stage2 = draw_etsc_set(rng, config, 'b', config.n_labeled, true, true);
  s.unlabeled = draw_etsc_set(rng, config, 'u', config.n_unlabeled, false, true);
  s.test = draw_etsc_set(rng, config, 't', config.n_test, true, false);
  return s;
}

std::vector<TrialResult> run_trial(const ScenarioConfig& config, std::span<const std::string> methods,
                                   std::uint64_t trial_index) {
  check_methods(config, methods);
  if (config.kind == ScenarioKind::etsc_basic) return run_etsc_trial(config, methods, trial_index);
  return run_loss_trial(config, methods, trial_index);
}

CoverageReport aggregate(std::string method, std::span<const TrialResult> results, const ScenarioConfig& config) {
  CoverageReport rep;
  rep.method = std::move(method);
  rep.trials = results.size();
  if (results.empty()) return rep;
  std::vector<double> risks;
  std::vector<double> indices;
  double ref_ucb = 0.0;
  double pp_ref = 0.0;
  for (const auto& r : results) {
    rep.unsafe = rep.unsafe || r.unsafe;
    rep.asymptotic = rep.asymptotic || r.asymptotic;
    rep.violations += r.violated ? 1 : 0;
    rep.false_rejections += r.false_rejection ? 1 : 0;
    rep.abstentions += r.selected ? 0 : 1;
    risks.push_back(r.true_risk_at_qhat);
    // Abstention counts as index -1 so it pulls the mean below every real choice.
    indices.push_back(r.selected ? static_cast<double>(*r.selected) : -1.0);
    ref_ucb += r.ucb_at_reference;
    pp_ref += r.pp_risk_at_reference;
    if (!r.halt_curve.empty()) {
      if (rep.mean_halt_curve.empty()) rep.mean_halt_curve.assign(r.halt_curve.size(), 0.0);
      for (std::size_t t = 0; t < r.halt_curve.size(); ++t) rep.mean_halt_curve[t] += r.halt_curve[t];
    }
  }
  const double n = static_cast<double>(results.size());
  for (double& h : rep.mean_halt_curve) h /= n;
  rep.violation_rate = static_cast<double>(rep.violations) / n;
  rep.fwer = static_cast<double>(rep.false_rejections) / n;
  rep.slack_3sigma = 3.0 * std::sqrt(config.delta * (1.0 - config.delta) / n);
  std::tie(rep.mean_true_risk, rep.std_true_risk) = mean_std(risks);
  std::tie(rep.mean_qhat_index, rep.std_qhat_index) = mean_std(indices);
  std::sort(risks.begin(), risks.end());
  rep.q10_true_risk = quantile(risks, 0.1);
  rep.q50_true_risk = quantile(risks, 0.5);
  rep.q90_true_risk = quantile(risks, 0.9);
  rep.mean_reference_ucb = ref_ucb / n;
  rep.mean_pp_risk_at_reference = pp_ref / n;
  return rep;
}

ExperimentReport run_coverage_experiment(const ScenarioConfig& config, std::vector<std::string> methods,
                                         std::size_t trials, std::size_t jobs) {
  config.validate();
  check_methods(config, methods);
  if (trials == 0) throw std::invalid_argument("trials must be positive");
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, trials);

  std::vector<std::vector<TrialResult>> per_trial(trials);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < trials; i = next++) {
      try {
        per_trial[i] = run_trial(config, methods, i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = trials;
        return;
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentReport report;
  report.config = config;
  report.config.trials = trials;
  report.config.methods = methods;
  report.config_hash = config_hash(report.config);
  if (config.kind != ScenarioKind::etsc_basic) report.reference_column = reference_column(config);
  for (std::size_t k = 0; k < methods.size(); ++k) {
    std::vector<TrialResult> column;
    column.reserve(trials);
    for (auto& results : per_trial) column.push_back(std::move(results[k]));
    report.methods.push_back(aggregate(methods[k], column, config));
  }
  return report;
}

nlohmann::json ExperimentReport::to_json() const {
  json methods_json = json::array();
  for (const auto& m : methods) {
    json mj{{"method", m.method},
            {"unsafe", m.unsafe},
            {"asymptotic", m.asymptotic},
            {"trials", m.trials},
            {"violations", m.violations},
            {"violation_rate", m.violation_rate},
            {"slack_3sigma", m.slack_3sigma},
            {"slack_formula", "3*sqrt(delta*(1-delta)/trials)"},
            {"false_rejections", m.false_rejections},
            {"fwer", m.fwer},
            {"abstentions", m.abstentions},
            {"true_risk",
             {{"mean", m.mean_true_risk},
              {"std", m.std_true_risk},
              {"q10", m.q10_true_risk},
              {"q50", m.q50_true_risk},
              {"q90", m.q90_true_risk}}},
            {"qhat_index", {{"mean", m.mean_qhat_index}, {"std", m.std_qhat_index}}},
            {"mean_reference_ucb", m.mean_reference_ucb},
            {"mean_pp_risk_at_reference", m.mean_pp_risk_at_reference}};
    if (!m.mean_halt_curve.empty()) mj["mean_halt_curve"] = m.mean_halt_curve;
    methods_json.push_back(std::move(mj));
  }
  json j{{"tool_version", kVersion},
         {"config_hash", hash_hex(config_hash)},
         {"seed", config.master_seed},
         {"config", sim::to_json(config)},
         {"methods", std::move(methods_json)}};
  if (config.kind != ScenarioKind::etsc_basic) j["reference_column"] = reference_column;
  return j;
}

std::string ExperimentReport::to_csv() const {
  std::ostringstream os;
  os << "config,config_hash,seed,method,unsafe,asymptotic,trials,violations,violation_rate,slack_3sigma,"
        "false_rejections,fwer,abstentions,mean_true_risk,std_true_risk,q10_true_risk,q50_true_risk,"
        "q90_true_risk,mean_qhat_index,std_qhat_index,mean_reference_ucb\n";
  for (const auto& m : methods) {
    os << config.name << ',' << hash_hex(config_hash) << ',' << config.master_seed << ',' << m.method << ','
       << (m.unsafe ? 1 : 0) << ',' << (m.asymptotic ? 1 : 0) << ',' << m.trials << ',' << m.violations << ','
       << format_double(m.violation_rate) << ',' << format_double(m.slack_3sigma) << ',' << m.false_rejections
       << ',' << format_double(m.fwer) << ',' << m.abstentions << ',' << format_double(m.mean_true_risk) << ','
       << format_double(m.std_true_risk) << ',' << format_double(m.q10_true_risk) << ','
       << format_double(m.q50_true_risk) << ',' << format_double(m.q90_true_risk) << ','
       << format_double(m.mean_qhat_index) << ',' << format_double(m.std_qhat_index) << ','
       << format_double(m.mean_reference_ucb) << '\n';
  }
  return os.str();
}

double binomial_cdf_by_summation(std::int64_t n, std::int64_t k, double p) {
  if (n < 0 || !in_unit(p)) throw std::invalid_argument("binomial_cdf_by_summation: bad arguments");
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  if (p == 0.0) return 1.0;
  if (p == 1.0) return 0.0;
  // Log-terms reach ~1e4 in magnitude; long double keeps their rounding well below 1e-12.
  const long double nn = static_cast<long double>(n);
  const long double log_p = std::log(static_cast<long double>(p));
  const long double log_q = std::log1p(-static_cast<long double>(p));
  const long double log_n_fact = std::lgamma(nn + 1.0L);
  long double sum = 0.0L;
  for (std::int64_t i = 0; i <= k; ++i) {
    const long double ii = static_cast<long double>(i);
    sum += std::exp(log_n_fact - std::lgamma(ii + 1.0L) - std::lgamma(nn - ii + 1.0L) + ii * log_p +
                    (nn - ii) * log_q);
  }
  return static_cast<double>(std::min(sum, 1.0L));
}

double brute_force_cp_oracle(bounds::BinomialCount count, bounds::ErrorLevel delta) {
  constexpr std::int64_t kSteps = 1'000'000;
  const auto passes = [&](std::int64_t i) {
    return binomial_cdf_by_summation(count.trials(), count.failures(), static_cast<double>(i) / kSteps) >=
           delta.value();
  };
  if (passes(kSteps)) return 1.0;
  std::int64_t lo = 0;  // passes: CDF at p = 0 is 1
  std::int64_t hi = kSteps;
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    (passes(mid) ? lo : hi) = mid;
  }
  return static_cast<double>(lo) / kSteps;
}

}  // namespace ssrcps::sim

#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ssrcps/bounds.hpp"
#include "ssrcps/error.hpp"
#include "ssrcps/etsc.hpp"
#include "ssrcps/io.hpp"
#include "ssrcps/ppi.hpp"
#include "ssrcps/rcps.hpp"
#include "ssrcps/sim.hpp"
#include "ssrcps/version.hpp"

namespace ssrcps::cli {

namespace {

using nlohmann::json;

// Default levels: (alpha, delta, delta1, delta2).
constexpr double kCalibrateAlpha = 0.15;
constexpr double kCalibrateDelta = 0.1;
constexpr double kCalibrateDelta1 = 0.01;
constexpr double kCalibrateDelta2 = 0.09;
constexpr double kEtscAlpha = 0.1;
constexpr double kEtscDelta = 0.01;
constexpr double kEtscDelta1 = 0.001;
constexpr double kEtscDelta2 = 0.009;

struct Levels {
  double alpha = 0.0;
  double delta = 0.0;
  std::optional<double> delta1;
  std::optional<double> delta2;
};

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Stamps provenance fields. The hash covers the resolved parameters only.
void stamp(json& j, const json& params, const json& seed) {
  j["tool_version"] = kVersion;
  j["config_hash"] = sim::hash_hex(fnv1a(params.dump()));
  j["seed"] = seed;
  j["parameters"] = params;
}

void emit(const json& j, const std::string& output, std::ostream& out) {
  if (output.empty()) {
    out << j.dump(2) << '\n';
    return;
  }
  std::ofstream file(output);
  if (!file) throw std::invalid_argument("cannot write '" + output + "'");
  file << j.dump(2) << '\n';
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream file(path);
  if (!file) throw std::invalid_argument("cannot write '" + path + "'");
  file << text;
}

std::optional<ppi::BudgetSplit> resolve_split(const Levels& levels, double default_delta, double default_d1,
                                              double default_d2, bool required) {
  if (levels.delta1.has_value() != levels.delta2.has_value()) {
    throw std::invalid_argument("--delta1 and --delta2 must be given together");
  }
  if (levels.delta1) return ppi::BudgetSplit::for_total(levels.delta, *levels.delta1, *levels.delta2);
  if (std::abs(levels.delta - default_delta) <= 1e-12) {
    return ppi::BudgetSplit::for_total(levels.delta, default_d1, default_d2);
  }
  if (required) {
    throw std::invalid_argument("--delta1 and --delta2 are required when --delta differs from " +
                                std::to_string(default_delta));
  }
  return std::nullopt;
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(8) << x;
  return os.str();
}

// Numbers separated by commas or whitespace; a non-numeric first line is a header.
std::vector<double> read_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream tokens(line);
    std::string token;
    while (tokens >> token) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(token, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != token.size() || used == 0) {
        if (line_no == 1 && values.empty()) break;
        throw DataError(path + ":" + std::to_string(line_no) + ": not a number: '" + token + "'");
      }
      values.push_back(v);
    }
  }
  if (values.empty()) throw DataError("'" + path + "' holds no values");
  return values;
}

std::vector<etsc::EtscSample> read_nonempty_samples(const std::string& path) {
  auto samples = io::read_etsc_samples(path);
  if (samples.empty()) throw DataError("'" + path + "' holds no samples");
  return samples;
}

void require_length(const std::vector<etsc::EtscSample>& samples, std::size_t t_max, const std::string& what) {
  for (const auto& s : samples) {
    if (s.t_max() != t_max) {
      throw DataError(what + ": sample '" + s.id + "' has " + std::to_string(s.t_max()) + " timesteps, expected " +
                      std::to_string(t_max));
    }
  }
}

// ---- bound ----

struct BoundArgs {
  std::string method;
  double delta = 0.1;
  std::optional<std::int64_t> n;
  std::optional<std::int64_t> k;
  std::string input;
  std::vector<double> support{0.0, 1.0};
  std::string output;
};

int cmd_bound(const BoundArgs& a, std::ostream& out, std::ostream& err) {
  const auto method = bounds::parse_ucb_method(a.method);
  const bounds::ErrorLevel delta(a.delta);
  if (a.support.size() != 2) throw std::invalid_argument("--support takes A,B");
  const bounds::Support support{a.support[0], a.support[1]};
  if (!(support.lo < support.hi)) throw std::invalid_argument("--support needs A < B");

  double ucb = 0.0;
  std::int64_t n = 0;
  if (a.n || a.k) {
    if (!(a.n && a.k)) throw std::invalid_argument("--n and --k must be given together");
    if (!a.input.empty()) throw std::invalid_argument("give either --input or --n/--k");
    if (method != bounds::UcbMethod::clopper_pearson) throw std::invalid_argument("--n/--k apply to cp only");
    n = *a.n;
    const bounds::BinomialCount count(*a.n, *a.k);
    ucb = support.lo + support.width() * bounds::clopper_pearson_ucb(count, delta);
  } else {
    if (a.input.empty()) throw std::invalid_argument("--input is required (or --n/--k for cp)");
    auto values = read_values(a.input);
    for (double v : values) {
      if (!(v >= support.lo && v <= support.hi)) {
        throw DataError("value " + fmt(v) + " outside support [" + fmt(support.lo) + ", " + fmt(support.hi) + "]");
      }
    }
    n = static_cast<std::int64_t>(values.size());
    ucb = bounds::compute_ucb({method, delta}, bounds::BoundedSample(std::move(values), support));
  }

  const json params{{"command", "bound"},
                    {"method", bounds::to_string(method)},
                    {"delta", a.delta},
                    {"support", {support.lo, support.hi}}};
  json j{{"method", bounds::to_string(method)},
         {"delta", a.delta},
         {"n", n},
         {"support", {support.lo, support.hi}},
         {"ucb", ucb},
         {"asymptotic", bounds::is_asymptotic(method)}};
  stamp(j, params, nullptr);
  emit(j, a.output, out);
  err << bounds::to_string(method) << " UCB (n=" << n << ", delta=" << fmt(a.delta) << "): " << fmt(ucb) << '\n';
  return kOk;
}

// ---- calibrate ----

struct CalibrateArgs {
  std::string mode = "labeled";
  std::string labeled;
  std::string labeled_imputed;
  std::string unlabeled;
  std::string method;
  std::string lambda_mode = "fixed_one";
  double lambda = 1.0;
  double tuning_fraction = 0.1;
  std::optional<std::uint64_t> shuffle_seed;
  Levels levels{kCalibrateAlpha, kCalibrateDelta, std::nullopt, std::nullopt};
  std::string output;
};

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out, std::ostream& err) {
  // Flags are resolved before any file is read.
  const rcps::RiskSpec spec(a.levels.alpha, bounds::ErrorLevel(a.levels.delta));
  json params{{"command", "calibrate"}, {"mode", a.mode}, {"alpha", a.levels.alpha}, {"delta", a.levels.delta}};
  std::optional<ppi::BudgetSplit> split;
  std::optional<bounds::UcbMethod> method;
  ppi::PowerTuning tuning;

  if (a.mode == "labeled") {
    if (!a.method.empty() && a.method != "auto") method = bounds::parse_ucb_method(a.method);
    params["method"] = a.method.empty() ? "auto" : a.method;
  } else if (a.mode == "ss-general") {
    method = bounds::parse_ucb_method(a.method.empty() ? "wsr" : a.method);
    if (*method != bounds::UcbMethod::wsr && *method != bounds::UcbMethod::wsr_scaled &&
        *method != bounds::UcbMethod::clt) {
      throw std::invalid_argument("ss-general supports wsr, wsr_scaled and clt");
    }
    tuning.mode = ppi::parse_lambda_mode(a.lambda_mode);
    tuning.lambda = tuning.mode == ppi::LambdaMode::fixed && a.lambda_mode != "fixed_one" ? a.lambda : 1.0;
    tuning.tuning_fraction = a.tuning_fraction;
    if (tuning.mode == ppi::LambdaMode::clt_inline && *method != bounds::UcbMethod::clt) {
      throw std::invalid_argument("--lambda-mode clt_inline requires --method clt");
    }
    if (!(a.tuning_fraction > 0.0 && a.tuning_fraction < 1.0)) {
      throw std::invalid_argument("--tuning-fraction must lie in (0, 1)");
    }
    params["method"] = bounds::to_string(*method);
    params["lambda_mode"] = ppi::to_string(tuning.mode);
    params["lambda"] = tuning.lambda;
    params["tuning_fraction"] = tuning.tuning_fraction;
  } else if (a.mode == "ss-binary") {
    if (!a.method.empty()) throw std::invalid_argument("ss-binary uses Clopper-Pearson; drop --method");
    split = resolve_split(a.levels, kCalibrateDelta, kCalibrateDelta1, kCalibrateDelta2, true);
    params["delta1"] = split->delta1().value();
    params["delta2"] = split->delta2().value();
  } else if (a.mode == "naive") {
    if (!a.method.empty()) throw std::invalid_argument("naive uses Clopper-Pearson; drop --method");
  } else {
    throw std::invalid_argument("unknown mode '" + a.mode + "'");
  }
  const bool semi = a.mode != "labeled";
  if (semi && (a.labeled_imputed.empty() || a.unlabeled.empty())) {
    throw std::invalid_argument("mode " + a.mode + " needs --labeled, --labeled-imputed and --unlabeled");
  }

  if (a.mode == "naive") {
    err << "WARNING: naive augmented RCPS treats imputed losses as true losses. Its risk guarantee is invalid; "
           "use it only as a baseline.\n";
  }

  auto labeled = io::read_loss_table(a.labeled);
  const rcps::ParameterGrid grid = labeled.grid();
  rcps::CalibrationOutcome outcome;
  if (!semi) {
    outcome = method ? rcps::fixed_sequence_calibrate(labeled, spec, *method) : rcps::labeled_rcps(labeled, spec);
  } else {
    auto imputed = io::align_rows(labeled, io::read_loss_table(a.labeled_imputed));
    const ppi::SemiSupervisedLosses data(std::move(labeled), std::move(imputed), io::read_loss_table(a.unlabeled));
    if (a.mode == "ss-general") {
      if (data.n_unlabeled() < data.n_labeled()) throw DataError("ss-general needs at least as many unlabeled as labeled rows");
      outcome = ppi::ss_general_calibrate(data, spec, *method, tuning, a.shuffle_seed);
    } else if (a.mode == "ss-binary") {
      outcome = ppi::ss_binary_calibrate(data, a.levels.alpha, *split);
    } else {
      outcome = ppi::naive_augmented_calibrate(data, spec);
    }
  }

  json j = io::to_json(outcome, grid);
  j["mode"] = a.mode;
  stamp(j, params, a.shuffle_seed ? json(*a.shuffle_seed) : json(nullptr));
  emit(j, a.output, out);

  err << outcome.method << ": ";
  if (outcome.selected) {
    err << "selected " << grid.label(*outcome.selected) << " (index " << *outcome.selected << ")";
  } else {
    err << "abstain (first grid point failed)";
  }
  err << (outcome.asymptotic ? " [asymptotic]" : "") << (outcome.unsafe ? " [UNSAFE]" : "") << '\n';
  return outcome.selected ? kOk : kAbstain;
}

// ---- experiment ----

struct ExperimentArgs {
  std::string config;
  std::optional<std::size_t> trials;
  std::size_t jobs = 1;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> methods;
  std::string output;
  std::string csv;
};

std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("SSRCPS_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(raw, &used);
    if (used == std::string_view(raw).size()) return v;
  } catch (const std::exception&) {
  }
  throw std::invalid_argument("SSRCPS_SEED must be an unsigned integer");
}

int cmd_experiment(const ExperimentArgs& a, std::ostream& out, std::ostream& err) {
  auto config = sim::load_config(a.config);
  if (a.seed) {
    config.master_seed = *a.seed;
  } else if (const auto s = env_seed()) {
    config.master_seed = *s;
  }
  const std::size_t trials = a.trials.value_or(config.trials);
  auto methods = a.methods.empty() ? config.methods : a.methods;
  const auto report = sim::run_coverage_experiment(config, methods, trials, a.jobs);

  emit(report.to_json(), a.output, out);
  if (!a.csv.empty()) write_text(a.csv, report.to_csv());
  for (const auto& m : report.methods) {
    err << m.method << ": violation_rate=" << fmt(m.violation_rate) << " (" << m.violations << "/" << m.trials
        << ", 3-sigma slack " << fmt(m.slack_3sigma) << "), mean true risk at q-hat=" << fmt(m.mean_true_risk)
        << ", abstentions=" << m.abstentions << (m.unsafe ? " [UNSAFE]" : "") << '\n';
  }
  return kOk;
}

// ---- etsc ----

struct EtscArgs {
  std::string stage1;
  std::string stage2;
  std::string labeled;
  double stage1_fraction = 0.5;
  std::string unlabeled;
  std::string candidate;
  std::string samples;
  std::string thresholds;
  std::string mode = "binary_cp";
  double resolution = 0.01;
  Levels levels{kEtscAlpha, kEtscDelta, std::nullopt, std::nullopt};
  std::string output;
};

std::string normalize_mode(std::string mode) {
  std::replace(mode.begin(), mode.end(), '-', '_');
  return mode;
}

int cmd_etsc_screen(const EtscArgs& a, std::ostream& out, std::ostream& err) {
  if (!(a.levels.alpha > 0.0 && a.levels.alpha <= 1.0)) throw std::invalid_argument("--alpha must lie in (0, 1]");
  if (!(a.resolution > 0.0 && a.resolution < 1.0)) throw std::invalid_argument("--resolution must lie in (0, 1)");
  etsc::EtscRiskSpec spec;
  spec.alpha = a.levels.alpha;
  spec.screen_resolution = a.resolution;
  const auto stage1 = read_nonempty_samples(a.stage1);
  const auto candidate = etsc::candidate_screening(stage1, spec);

  const json params{{"command", "etsc screen"}, {"alpha", spec.alpha}, {"resolution", spec.screen_resolution}};
  json j{{"candidate", io::thresholds_to_json(candidate)}, {"alpha", spec.alpha}, {"resolution", a.resolution}};
  stamp(j, params, nullptr);
  emit(j, a.output, out);
  err << "screened " << stage1.size() << " samples over " << candidate.size() << " timesteps\n";
  return kOk;
}

int cmd_etsc_calibrate(const EtscArgs& a, std::ostream& out, std::ostream& err) {
  const auto mode = etsc::parse_stage2_mode(normalize_mode(a.mode));
  etsc::EtscRiskSpec spec;
  if (!(a.levels.alpha > 0.0 && a.levels.alpha <= 1.0)) throw std::invalid_argument("--alpha must lie in (0, 1]");
  spec.alpha = a.levels.alpha;
  spec.delta = bounds::ErrorLevel(a.levels.delta);
  spec.screen_resolution = a.resolution;
  spec.split = resolve_split(a.levels, kEtscDelta, kEtscDelta1, kEtscDelta2, mode == etsc::Stage2Mode::binary_cp);
  const bool one_file = !a.labeled.empty();
  if (one_file && (!a.stage1.empty() || !a.stage2.empty() || !a.candidate.empty())) {
    throw std::invalid_argument("--labeled replaces --stage1, --stage2 and --candidate");
  }
  if (!one_file && (a.stage2.empty() || a.candidate.empty())) {
    throw std::invalid_argument("give --stage2 and --candidate, or --labeled");
  }
  if (!(a.stage1_fraction > 0.0 && a.stage1_fraction < 1.0)) {
    throw std::invalid_argument("--stage1-fraction must lie in (0, 1)");
  }
  if (mode != etsc::Stage2Mode::labeled_only && a.unlabeled.empty()) {
    throw std::invalid_argument("mode " + std::string(etsc::to_string(mode)) + " needs --unlabeled");
  }

  std::vector<etsc::EtscSample> stage1;
  std::vector<etsc::EtscSample> stage2;
  std::optional<etsc::ThresholdVector> candidate;
  if (one_file) {
    // Stage 1 takes the leading fraction of the file, stage 2 the rest.
    auto labeled = read_nonempty_samples(a.labeled);
    const auto cut = static_cast<std::size_t>(std::floor(a.stage1_fraction * static_cast<double>(labeled.size())));
    if (cut == 0 || cut == labeled.size()) throw DataError("too few labeled samples to split into two stages");
    stage1.assign(labeled.begin(), labeled.begin() + static_cast<std::ptrdiff_t>(cut));
    stage2.assign(labeled.begin() + static_cast<std::ptrdiff_t>(cut), labeled.end());
    candidate = etsc::candidate_screening(stage1, spec);
  } else {
    stage2 = read_nonempty_samples(a.stage2);
    if (!a.stage1.empty()) stage1 = read_nonempty_samples(a.stage1);
    candidate = io::read_thresholds(a.candidate);
  }
  etsc::check_disjoint(stage1, stage2);
  const std::size_t t_max = stage2.front().t_max();
  require_length(stage2, t_max, "stage 2");
  if (candidate->size() != t_max) throw DataError("candidate vector length does not match the samples");
  std::vector<etsc::EtscSample> unlabeled;
  if (mode != etsc::Stage2Mode::labeled_only) {
    unlabeled = read_nonempty_samples(a.unlabeled);
    require_length(unlabeled, t_max, "unlabeled");
    etsc::check_disjoint(stage2, unlabeled);
  }

  const auto result = etsc::stage2_calibrate(stage2, unlabeled, *candidate, spec, mode);

  json params{{"command", "etsc calibrate"},
              {"mode", etsc::to_string(mode)},
              {"alpha", spec.alpha},
              {"delta", spec.delta.value()}};
  if (spec.split) {
    params["delta1"] = spec.split->delta1().value();
    params["delta2"] = spec.split->delta2().value();
  }
  if (one_file) params["stage1_fraction"] = a.stage1_fraction;
  json j = io::to_json(result);
  j["mode"] = etsc::to_string(mode);
  j["candidate"] = io::thresholds_to_json(*candidate);
  j["asymptotic"] = mode == etsc::Stage2Mode::general_clt;
  stamp(j, params, nullptr);
  emit(j, a.output, out);
  err << "stage 2 (" << etsc::to_string(mode) << "): revealed " << result.revealed << " of " << t_max
      << " thresholds, stop reason " << result.stop_reason << '\n';
  return result.revealed > 0 ? kOk : kAbstain;
}

int cmd_etsc_evaluate(const EtscArgs& a, std::ostream& out, std::ostream& err) {
  const auto samples = read_nonempty_samples(a.samples);
  const auto q = io::read_thresholds(a.thresholds);
  require_length(samples, q.size(), "samples");
  const auto report = etsc::evaluate(samples, q);

  const json params{{"command", "etsc evaluate"}, {"thresholds", io::thresholds_to_json(q)}};
  json j = io::to_json(report);
  stamp(j, params, nullptr);
  emit(j, a.output, out);
  err << "evaluated " << samples.size() << " samples; t0 = " << (report.t0 ? std::to_string(*report.t0) : "none")
      << '\n';
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semi-supervised risk-controlling calibration", "ssrcps"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  BoundArgs bound;
  auto* bound_cmd = app.add_subcommand("bound", "Upper confidence bound for the mean of a bounded sample");
  bound_cmd->add_option("--method", bound.method, "hoeffding | cp | wsr | wsr_scaled | clt")->required();
  bound_cmd->add_option("--delta", bound.delta, "Error level")->capture_default_str();
  bound_cmd->add_option("--n", bound.n, "Trials (cp with a count instead of a file)");
  bound_cmd->add_option("--k", bound.k, "Failures (cp with a count instead of a file)");
  bound_cmd->add_option("--input", bound.input, "File of values, comma or whitespace separated");
  bound_cmd->add_option("--support", bound.support, "Support A,B")->delimiter(',')->expected(2);
  bound_cmd->add_option("--output", bound.output, "Write JSON here instead of stdout");

  CalibrateArgs cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Select a grid point by fixed-sequence testing");
  cal_cmd->add_option("--mode", cal.mode, "labeled | ss-general | ss-binary | naive")->capture_default_str();
  cal_cmd->add_option("--labeled", cal.labeled, "Labeled true-loss table (CSV)")->required();
  cal_cmd->add_option("--labeled-imputed", cal.labeled_imputed, "Labeled imputed-loss table (CSV)");
  cal_cmd->add_option("--unlabeled", cal.unlabeled, "Unlabeled imputed-loss table (CSV)");
  cal_cmd->add_option("--method", cal.method,
                      "Bound: labeled mode auto | cp | wsr | wsr_scaled | hoeffding | clt; ss-general wsr | "
                      "wsr_scaled | clt");
  cal_cmd->add_option("--lambda-mode", cal.lambda_mode, "fixed_one | fixed | clt_inline | wsr_split")
      ->capture_default_str();
  cal_cmd->add_option("--lambda", cal.lambda, "Lambda for --lambda-mode fixed")->capture_default_str();
  cal_cmd->add_option("--tuning-fraction", cal.tuning_fraction, "Held-out fraction for wsr_split")
      ->capture_default_str();
  cal_cmd->add_option("--shuffle-seed", cal.shuffle_seed, "Shuffle unlabeled rows before blocking");
  cal_cmd->add_option("--alpha", cal.levels.alpha, "Risk level")->capture_default_str();
  cal_cmd->add_option("--delta", cal.levels.delta, "Error level")->capture_default_str();
  cal_cmd->add_option("--delta1", cal.levels.delta1, "Unlabeled budget (ss-binary; default 0.01 at delta 0.1)");
  cal_cmd->add_option("--delta2", cal.levels.delta2, "Rectifier budget (ss-binary; default 0.09 at delta 0.1)");
  cal_cmd->add_option("--output", cal.output, "Write JSON here instead of stdout");

  ExperimentArgs exp;
  auto* exp_cmd = app.add_subcommand("experiment", "Monte-Carlo coverage experiment from a TOML/JSON config");
  exp_cmd->add_option("--config", exp.config, "Scenario config (.toml or .json)")->required();
  exp_cmd->add_option("--trials", exp.trials, "Override the trial count");
  exp_cmd->add_option("--jobs", exp.jobs, "Worker threads; 0 = all cores")->capture_default_str();
  exp_cmd->add_option("--seed", exp.seed, "Master seed (default: SSRCPS_SEED, then the config)");
  exp_cmd->add_option("--methods", exp.methods, "Override the method list")->delimiter(',');
  exp_cmd->add_option("--output", exp.output, "Write report JSON here instead of stdout");
  exp_cmd->add_option("--csv", exp.csv, "Also write the flat CSV report here");

  EtscArgs et;
  auto* etsc_cmd = app.add_subcommand("etsc", "Early time-series classification thresholds");
  etsc_cmd->require_subcommand(1);
  auto add_levels = [&](CLI::App* cmd) {
    cmd->add_option("--alpha", et.levels.alpha, "Risk level")->capture_default_str();
  };
  auto* screen_cmd = etsc_cmd->add_subcommand("screen", "Stage 1: candidate thresholds");
  screen_cmd->add_option("--stage1", et.stage1, "Stage-1 labeled samples (CSV or JSON)")->required();
  screen_cmd->add_option("--resolution", et.resolution, "Threshold grid step")->capture_default_str();
  add_levels(screen_cmd);
  screen_cmd->add_option("--output", et.output, "Write JSON here instead of stdout");

  auto* ecal_cmd = etsc_cmd->add_subcommand("calibrate", "Stage 2: reveal thresholds under FST");
  ecal_cmd->add_option("--stage2", et.stage2, "Stage-2 labeled samples");
  ecal_cmd->add_option("--stage1", et.stage1, "Stage-1 samples, checked for overlap with stage 2");
  ecal_cmd->add_option("--candidate", et.candidate, "Candidate vector from `etsc screen`");
  ecal_cmd->add_option("--labeled", et.labeled, "All labeled samples; split into stages here");
  ecal_cmd->add_option("--stage1-fraction", et.stage1_fraction, "Stage-1 share of --labeled")->capture_default_str();
  ecal_cmd->add_option("--resolution", et.resolution, "Screening step when --labeled is used")->capture_default_str();
  ecal_cmd->add_option("--unlabeled", et.unlabeled, "Unlabeled samples with imputed labels");
  ecal_cmd->add_option("--mode", et.mode, "binary_cp | general_wsr | general_clt | labeled_only")
      ->capture_default_str();
  add_levels(ecal_cmd);
  ecal_cmd->add_option("--delta", et.levels.delta, "Error level")->capture_default_str();
  ecal_cmd->add_option("--delta1", et.levels.delta1, "Unlabeled budget (default 0.001 at delta 0.01)");
  ecal_cmd->add_option("--delta2", et.levels.delta2, "Rectifier budget (default 0.009 at delta 0.01)");
  ecal_cmd->add_option("--output", et.output, "Write JSON here instead of stdout");

  auto* eval_cmd = etsc_cmd->add_subcommand("evaluate", "Halt curve and conditional risk of a threshold vector");
  eval_cmd->add_option("--samples", et.samples, "Labeled test samples")->required();
  eval_cmd->add_option("--thresholds", et.thresholds, "Threshold vector JSON")->required();
  eval_cmd->add_option("--output", et.output, "Write JSON here instead of stdout");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsageError;
  }

  try {
    if (bound_cmd->parsed()) return cmd_bound(bound, out, err);
    if (cal_cmd->parsed()) return cmd_calibrate(cal, out, err);
    if (exp_cmd->parsed()) return cmd_experiment(exp, out, err);
    if (screen_cmd->parsed()) return cmd_etsc_screen(et, out, err);
    if (ecal_cmd->parsed()) return cmd_etsc_calibrate(et, out, err);
    if (eval_cmd->parsed()) return cmd_etsc_evaluate(et, out, err);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const ConvergenceError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::out_of_range& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  }
  return kUsageError;
}

}  // namespace ssrcps::cli

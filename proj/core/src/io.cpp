#include "ssrcps/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "ssrcps/error.hpp"

namespace ssrcps::io {

namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string_view rest(line);
  while (true) {
    const auto comma = rest.find(',');
    cells.emplace_back(trim(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return cells;
}

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

double parse_double(const std::string& cell, const std::string& context) {
  if (cell.empty()) throw DataError(context + "empty numeric cell");
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    throw DataError(context + "not a number: '" + cell + "'");
  }
  if (used != cell.size()) throw DataError(context + "not a number: '" + cell + "'");
  return v;
}

etsc::Label parse_label(const std::string& cell, const std::string& context) {
  etsc::Label v = 0;
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (cell.empty() || ec != std::errc() || ptr != end) throw DataError(context + "not an integer label: '" + cell + "'");
  return v;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

bool has_extension(const std::string& path, std::string_view ext) {
  return std::filesystem::path(path).extension() == ext;
}

json threshold_value(double q) {
  if (std::isinf(q)) return "inf";
  return q;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

rcps::LossTable read_loss_table_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError(source + ": empty loss table");
  ++line_no;
  auto header = split_csv_line(line);
  if (header.size() < 2 || header.front() != "sample_id") {
    throw DataError(where(source, line_no) + "header must be 'sample_id,<label>,...'");
  }
  std::vector<std::string> labels(header.begin() + 1, header.end());
  const std::size_t m = labels.size();
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != m + 1) {
      throw DataError(where(source, line_no) + "expected " + std::to_string(m + 1) + " cells, got " +
                      std::to_string(cells.size()));
    }
    std::vector<double> row(m);
    for (std::size_t j = 0; j < m; ++j) row[j] = parse_double(cells[j + 1], where(source, line_no));
    ids.push_back(std::move(cells[0]));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(source + ": loss table has no rows");
  try {
    return rcps::LossTable::from_rows(rcps::ParameterGrid(std::move(labels)), std::move(ids), rows);
  } catch (const std::invalid_argument& e) {
    throw DataError(source + ": " + e.what());
  }
}

rcps::LossTable read_loss_table(const std::string& path) {
  auto in = open_input(path);
  return read_loss_table_csv(in, path);
}

void write_loss_table_csv(std::ostream& out, const rcps::LossTable& table) {
  out << "sample_id";
  for (const auto& label : table.grid().labels()) out << ',' << label;
  out << '\n';
  const auto old_precision = out.precision(17);
  for (std::size_t i = 0; i < table.n_samples(); ++i) {
    out << table.sample_ids()[i];
    for (std::size_t m = 0; m < table.n_columns(); ++m) out << ',' << table.at(i, m);
    out << '\n';
  }
  out.precision(old_precision);
}

rcps::LossTable align_rows(const rcps::LossTable& reference, const rcps::LossTable& other) {
  if (reference.n_samples() != other.n_samples()) {
    throw DataError("tables have " + std::to_string(reference.n_samples()) + " and " +
                    std::to_string(other.n_samples()) + " rows");
  }
  std::unordered_map<std::string_view, std::size_t> index;
  const auto other_ids = other.sample_ids();
  for (std::size_t i = 0; i < other_ids.size(); ++i) {
    if (!index.emplace(other_ids[i], i).second) throw DataError("duplicate sample id '" + other_ids[i] + "'");
  }
  std::vector<std::size_t> order;
  order.reserve(reference.n_samples());
  for (const auto& id : reference.sample_ids()) {
    const auto it = index.find(id);
    if (it == index.end()) throw DataError("sample id '" + id + "' missing from the second table");
    order.push_back(it->second);
  }
  return other.select_rows(order);
}

std::vector<etsc::EtscSample> read_etsc_samples_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError(source + ": empty sample file");
  ++line_no;
  const auto header = split_csv_line(line);
  // sample_id + 2T + full_pred + true_label + imputed_label
  if (header.size() < 6 || (header.size() - 4) % 2 != 0 || header.front() != "sample_id") {
    throw DataError(where(source, line_no) + "bad ETSC header");
  }
  const std::size_t t_max = (header.size() - 4) / 2;
  for (std::size_t t = 1; t <= t_max; ++t) {
    if (header[t] != "conf_" + std::to_string(t) || header[t_max + t] != "early_" + std::to_string(t)) {
      throw DataError(where(source, line_no) + "expected conf_1..conf_T then early_1..early_T");
    }
  }
  if (header[2 * t_max + 1] != "full_pred" || header[2 * t_max + 2] != "true_label" ||
      header[2 * t_max + 3] != "imputed_label") {
    throw DataError(where(source, line_no) + "expected full_pred,true_label,imputed_label");
  }
  std::vector<etsc::EtscSample> samples;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    const auto ctx = where(source, line_no);
    if (cells.size() != header.size()) throw DataError(ctx + "wrong number of cells");
    etsc::EtscSample s;
    s.id = cells[0];
    for (std::size_t t = 1; t <= t_max; ++t) {
      s.confidence.push_back(parse_double(cells[t], ctx));
      s.early_pred.push_back(parse_label(cells[t_max + t], ctx));
    }
    s.full_pred = parse_label(cells[2 * t_max + 1], ctx);
    if (!cells[2 * t_max + 2].empty()) s.true_label = parse_label(cells[2 * t_max + 2], ctx);
    if (!cells[2 * t_max + 3].empty()) s.imputed_label = parse_label(cells[2 * t_max + 3], ctx);
    etsc::validate(s);
    samples.push_back(std::move(s));
  }
  return samples;
}

std::vector<etsc::EtscSample> etsc_samples_from_json(const json& j) {
  if (!j.is_array()) throw DataError("ETSC samples must be a JSON array");
  std::vector<etsc::EtscSample> samples;
  try {
    for (const auto& item : j) {
      etsc::EtscSample s;
      s.id = (item.contains("sample_id") ? item.at("sample_id") : item.at("id")).get<std::string>();
      s.confidence = item.at("confidence").get<std::vector<double>>();
      s.early_pred = item.at("early_pred").get<std::vector<etsc::Label>>();
      s.full_pred = item.at("full_pred").get<etsc::Label>();
      if (item.contains("true_label") && !item["true_label"].is_null()) s.true_label = item["true_label"].get<etsc::Label>();
      if (item.contains("imputed_label") && !item["imputed_label"].is_null()) {
        s.imputed_label = item["imputed_label"].get<etsc::Label>();
      }
      etsc::validate(s);
      samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("ETSC sample JSON: ") + e.what());
  }
  return samples;
}

std::vector<etsc::EtscSample> read_etsc_samples(const std::string& path) {
  if (has_extension(path, ".json")) return etsc_samples_from_json(read_json_file(path));
  auto in = open_input(path);
  return read_etsc_samples_csv(in, path);
}

void write_etsc_samples_csv(std::ostream& out, const std::vector<etsc::EtscSample>& samples) {
  const std::size_t t_max = samples.empty() ? 0 : samples.front().t_max();
  out << "sample_id";
  for (std::size_t t = 1; t <= t_max; ++t) out << ",conf_" << t;
  for (std::size_t t = 1; t <= t_max; ++t) out << ",early_" << t;
  out << ",full_pred,true_label,imputed_label\n";
  const auto old_precision = out.precision(17);
  for (const auto& s : samples) {
    if (s.t_max() != t_max) throw DataError("samples have different sequence lengths");
    out << s.id;
    for (double c : s.confidence) out << ',' << c;
    for (auto e : s.early_pred) out << ',' << e;
    out << ',' << s.full_pred << ',';
    if (s.true_label) out << *s.true_label;
    out << ',';
    if (s.imputed_label) out << *s.imputed_label;
    out << '\n';
  }
  out.precision(old_precision);
}

json thresholds_to_json(const etsc::ThresholdVector& q) {
  json arr = json::array();
  for (double v : q.values()) arr.push_back(threshold_value(v));
  return arr;
}

etsc::ThresholdVector thresholds_from_json(const json& j) {
  const json& arr = j.is_object() && j.contains("thresholds") ? j.at("thresholds") : j;
  if (!arr.is_array()) throw DataError("thresholds must be a JSON array");
  std::vector<double> values;
  for (const auto& v : arr) {
    if (v.is_string() && v.get<std::string>() == "inf") {
      values.push_back(etsc::kNeverHalt);
    } else if (v.is_number()) {
      values.push_back(v.get<double>());
    } else {
      throw DataError("threshold entries must be numbers or \"inf\"");
    }
  }
  try {
    return etsc::ThresholdVector(std::move(values));
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
}

etsc::ThresholdVector read_thresholds(const std::string& path) { return thresholds_from_json(read_json_file(path)); }

json read_json_file(const std::string& path) {
  auto in = open_input(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("'" + path + "': " + e.what());
  }
}

json to_json(const rcps::CalibrationOutcome& o, const rcps::ParameterGrid& grid) {
  json j{{"method", o.method},
         {"alpha", o.alpha},
         {"delta", o.delta},
         {"abstain", o.abstained()},
         {"selected_index", o.selected ? json(*o.selected) : json(nullptr)},
         {"selected_label", o.selected ? json(grid.label(*o.selected)) : json(nullptr)},
         {"stop_index", o.stop_index},
         {"ucb_trace", o.ucb_trace},
         {"asymptotic", o.asymptotic},
         {"unsafe", o.unsafe}};
  if (o.semi_supervised) {
    const auto& d = *o.semi_supervised;
    j["semi_supervised"] = json{{"lambda_mode", d.lambda_mode},
                                {"lambda_per_column", d.lambda_per_column},
                                {"degenerate_lambda_columns", d.degenerate_lambda_columns},
                                {"delta1", optional_json(d.delta1)},
                                {"delta2", optional_json(d.delta2)},
                                {"block_size", d.block_size ? json(*d.block_size) : json(nullptr)},
                                {"dropped_tail", d.dropped_tail ? json(*d.dropped_tail) : json(nullptr)}};
  }
  return j;
}

json to_json(const etsc::Stage2Result& r) {
  json trace = json::array();
  for (const auto& s : r.trace) {
    trace.push_back(json{{"revealed_t", s.revealed_t},
                         {"t_prime", s.t_prime},
                         {"halted_labeled", s.halted_labeled},
                         {"halted_unlabeled", s.halted_unlabeled},
                         {"ucb", s.ucb},
                         {"passed", s.passed}});
  }
  return json{{"thresholds", thresholds_to_json(r.thresholds)},
              {"revealed", r.revealed},
              {"stop_reason", r.stop_reason},
              {"trace", std::move(trace)}};
}

json to_json(const etsc::EvaluationReport& r) {
  json risk = json::array();
  for (const auto& v : r.conditional_risk) risk.push_back(optional_json(v));
  return json{{"halt_curve", r.halt_curve},
              {"conditional_risk", std::move(risk)},
              {"t0", r.t0 ? json(*r.t0) : json(nullptr)}};
}

}  // namespace ssrcps::io

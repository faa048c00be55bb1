#pragma once

// File formats.
//
// Loss tables are CSV with header `sample_id,<label_1>,...,<label_M>` and one
// row per sample. ETSC samples are CSV with header
// `sample_id,conf_1..conf_T,early_1..early_T,full_pred,true_label,imputed_label`
// (label cells may be empty) or a JSON array of objects with the same fields.
// Threshold vectors are JSON arrays; "inf" stands for +infinity.

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssrcps/etsc.hpp"
#include "ssrcps/rcps.hpp"

namespace ssrcps::io {

rcps::LossTable read_loss_table_csv(std::istream& in, const std::string& source = "<stream>");
rcps::LossTable read_loss_table(const std::string& path);
void write_loss_table_csv(std::ostream& out, const rcps::LossTable& table);

// `other` with its rows reordered to follow reference's sample ids. Throws
// DataError unless both tables hold the same set of ids.
rcps::LossTable align_rows(const rcps::LossTable& reference, const rcps::LossTable& other);

std::vector<etsc::EtscSample> read_etsc_samples_csv(std::istream& in, const std::string& source = "<stream>");
std::vector<etsc::EtscSample> etsc_samples_from_json(const nlohmann::json& json);
// CSV or JSON by file extension.
std::vector<etsc::EtscSample> read_etsc_samples(const std::string& path);
void write_etsc_samples_csv(std::ostream& out, const std::vector<etsc::EtscSample>& samples);

nlohmann::json thresholds_to_json(const etsc::ThresholdVector& q);
// Accepts a bare array or an object with a "thresholds" array.
etsc::ThresholdVector thresholds_from_json(const nlohmann::json& json);
etsc::ThresholdVector read_thresholds(const std::string& path);

nlohmann::json read_json_file(const std::string& path);

nlohmann::json to_json(const rcps::CalibrationOutcome& outcome, const rcps::ParameterGrid& grid);
nlohmann::json to_json(const etsc::Stage2Result& result);
nlohmann::json to_json(const etsc::EvaluationReport& report);

}  // namespace ssrcps::io

#pragma once

#include <string>

#include <json.hpp>

#include "loralab/runner.hpp"

namespace loralab::records {

/// Shortest decimal that round-trips the exact double (std::to_chars);
/// infinities and NaN come out as "inf"/"-inf"/"nan".
std::string format_double(double v);
double parse_double(std::string_view s);

/// JSON value for a double: a number when finite, else the string form
/// (nlohmann would otherwise emit null for non-finite values).
nlohmann::json json_number(double v);

constexpr const char* kCsvHeader =
    "width,scheme,lr,seed,step,train_loss,test_loss,meanZA,meanZB,diverged";

/// One CSV row per recorded step per trial, schema as above. Values are
/// lossless (see format_double), so re-analysis from disk reproduces
/// in-process results exactly.
void write_records_csv(const std::string& path, const runner::SweepResult& result);
void write_trial_csv(const std::string& path, const runner::TrialRecord& record);

/// Rebuilds a SweepResult from a records CSV: grid axes are inferred from
/// the rows, optima recomputed. The embedded TrialConfig echo carries only
/// what the CSV stores (width, scheme, lr).
runner::SweepResult read_records_csv(const std::string& path);

nlohmann::json sweep_summary_json(const runner::SweepResult& result);
nlohmann::json trial_summary_json(const runner::TrialRecord& record);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace loralab::records

#include "loralab/records.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace loralab::records {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument("records: bad number \"" + std::string(s) + "\"");
  return v;
}

nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

namespace {

void append_record_rows(std::ostream& out, const runner::TrialRecord& rec) {
  for (std::size_t i = 0; i < rec.steps_recorded.size(); ++i) {
    out << rec.width << ',' << gamma::scheme_name(rec.config.scheme) << ','
        << format_double(rec.lr) << ',' << rec.seed_index << ',' << rec.steps_recorded[i] << ','
        << format_double(rec.train_loss[i]) << ',' << format_double(rec.test_loss[i]) << ','
        << format_double(rec.mean_za[i]) << ',' << format_double(rec.mean_zb[i]) << ','
        << (rec.diverged ? 1 : 0) << '\n';
  }
}

}  // namespace

void write_records_csv(const std::string& path, const runner::SweepResult& result) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("records: cannot open " + path);
  out << kCsvHeader << '\n';
  for (const auto& rec : result.records) append_record_rows(out, rec);
}

void write_trial_csv(const std::string& path, const runner::TrialRecord& record) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("records: cannot open " + path);
  out << kCsvHeader << '\n';
  append_record_rows(out, record);
}

runner::SweepResult read_records_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("records: cannot open \"" + path + "\"");

  struct Key {
    int width;
    int scheme;  // 0 = A, 1 = B
    double lr;
    int seed;
    bool operator<(const Key& other) const {
      if (width != other.width) return width < other.width;
      if (scheme != other.scheme) return scheme < other.scheme;
      if (lr != other.lr) return lr < other.lr;
      return seed < other.seed;
    }
  };
  struct Row {
    int step;
    double train_loss, test_loss, mean_za, mean_zb;
    bool diverged;
  };
  std::map<Key, std::vector<Row>> trials;

  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("records: empty file \"" + path + "\"");
  if (line != kCsvHeader)
    throw std::invalid_argument("records: unexpected header in \"" + path + "\"");
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream row_stream(line);
    while (std::getline(row_stream, field, ',')) fields.push_back(field);
    if (fields.size() != 10)
      throw std::invalid_argument("records: \"" + path + "\" row " + std::to_string(line_no) +
                                  ": expected 10 fields");
    try {
      Key key{};
      key.width = static_cast<int>(parse_double(fields[0]));
      key.scheme = fields[1] == "A" ? 0 : (fields[1] == "B" ? 1 : throw std::invalid_argument(
                                                                      "bad scheme"));
      key.lr = parse_double(fields[2]);
      key.seed = static_cast<int>(parse_double(fields[3]));
      Row row{};
      row.step = static_cast<int>(parse_double(fields[4]));
      row.train_loss = parse_double(fields[5]);
      row.test_loss = parse_double(fields[6]);
      row.mean_za = parse_double(fields[7]);
      row.mean_zb = parse_double(fields[8]);
      row.diverged = fields[9] == "1";
      trials[key].push_back(row);
    } catch (const std::exception& e) {
      throw std::invalid_argument("records: \"" + path + "\" row " + std::to_string(line_no) +
                                  ": " + e.what());
    }
  }
  if (trials.empty()) throw std::invalid_argument("records: no rows in \"" + path + "\"");

  runner::SweepResult result;
  result.grid.num_seeds = 0;
  for (const auto& [key, rows] : trials) {
    if (std::find(result.grid.widths.begin(), result.grid.widths.end(), key.width) ==
        result.grid.widths.end())
      result.grid.widths.push_back(key.width);
    if (std::find(result.grid.lrs.begin(), result.grid.lrs.end(), key.lr) ==
        result.grid.lrs.end())
      result.grid.lrs.push_back(key.lr);
    result.grid.num_seeds = std::max(result.grid.num_seeds, key.seed + 1);
  }
  std::sort(result.grid.widths.begin(), result.grid.widths.end());
  std::sort(result.grid.lrs.begin(), result.grid.lrs.end());
  bool has_a = false, has_b = false;
  for (const auto& [key, rows] : trials) (key.scheme == 0 ? has_a : has_b) = true;
  if (has_a) result.grid.schemes.push_back(gamma::InitScheme::A);
  if (has_b) result.grid.schemes.push_back(gamma::InitScheme::B);

  for (const auto& [key, rows_const] : trials) {
    auto rows = rows_const;
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.step < b.step; });
    runner::TrialRecord rec;
    rec.width = key.width;
    rec.lr = key.lr;
    rec.config.model.n = key.width;
    rec.config.scheme = key.scheme == 0 ? gamma::InitScheme::A : gamma::InitScheme::B;
    rec.config.optimizer.lr = key.lr;
    rec.seed_index = key.seed;
    const auto lr_it = std::find(result.grid.lrs.begin(), result.grid.lrs.end(), key.lr);
    rec.lr_index = static_cast<int>(lr_it - result.grid.lrs.begin());
    for (const Row& row : rows) {
      rec.steps_recorded.push_back(row.step);
      rec.train_loss.push_back(row.train_loss);
      rec.test_loss.push_back(row.test_loss);
      rec.mean_za.push_back(row.mean_za);
      rec.mean_zb.push_back(row.mean_zb);
      rec.diverged = rec.diverged || row.diverged;
    }
    rec.config.steps = rec.steps_recorded.back();
    rec.final_train_loss = rec.train_loss.back();
    rec.final_test_loss = rec.test_loss.back();
    result.records.push_back(std::move(rec));
  }

  for (const int width : result.grid.widths)
    for (const auto scheme : result.grid.schemes)
      result.optima.push_back(runner::select_optimal_lr(result, width, scheme));
  return result;
}

nlohmann::json sweep_summary_json(const runner::SweepResult& result) {
  nlohmann::json schemes = nlohmann::json::array();
  for (const auto s : result.grid.schemes) schemes.push_back(gamma::scheme_name(s));
  nlohmann::json optima = nlohmann::json::array();
  for (const auto& opt : result.optima) {
    nlohmann::json row{{"width", opt.width},
                       {"scheme", gamma::scheme_name(opt.scheme)},
                       {"resolved", opt.resolved}};
    if (opt.resolved) {
      row["lr"] = opt.lr;
      row["lr_index"] = opt.lr_index;
      row["mean_final_train_loss"] = json_number(opt.mean_final_train_loss);
    }
    optima.push_back(row);
  }
  int diverged_count = 0;
  for (const auto& rec : result.records) diverged_count += rec.diverged ? 1 : 0;
  return nlohmann::json{{"schema_version", 1},
                        {"base_seed", result.base_seed},
                        {"grid",
                         {{"widths", result.grid.widths},
                          {"lrs", result.grid.lrs},
                          {"schemes", schemes},
                          {"seeds", result.grid.num_seeds}}},
                        {"trials", result.records.size()},
                        {"diverged_trials", diverged_count},
                        {"optima", optima}};
}

nlohmann::json trial_summary_json(const runner::TrialRecord& record) {
  return nlohmann::json{{"schema_version", 1},
                        {"width", record.width},
                        {"scheme", gamma::scheme_name(record.config.scheme)},
                        {"lr", record.lr},
                        {"steps", record.config.steps},
                        {"optimizer", optim::kind_name(record.config.optimizer.kind)},
                        {"diverged", record.diverged},
                        {"diverged_at", record.diverged_at},
                        {"final_train_loss", json_number(record.final_train_loss)},
                        {"final_test_loss", json_number(record.final_test_loss)},
                        {"final_mean_za", json_number(record.mean_za.back())},
                        {"final_mean_zb", json_number(record.mean_zb.back())}};
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open \"" + path + "\"");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace loralab::records

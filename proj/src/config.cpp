#include "loralab/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "loralab/rng.hpp"

namespace loralab::config {

namespace {

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

class KeyReader {
 public:
  KeyReader(const std::string& text, const std::string& origin) : origin_(origin) {
    std::istringstream stream(text);
    std::string line;
    int line_no = 0;
    while (std::getline(stream, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string stripped = trim(line);
      if (stripped.empty()) continue;
      const auto eq = stripped.find('=');
      if (eq == std::string::npos)
        fail("line " + std::to_string(line_no) + ": expected key = value");
      const std::string key = trim(stripped.substr(0, eq));
      const std::string value = trim(stripped.substr(eq + 1));
      if (key.empty()) fail("line " + std::to_string(line_no) + ": empty key");
      if (values_.count(key) != 0) fail("duplicate key \"" + key + "\"");
      values_[key] = value;
    }
  }

  std::string get(const std::string& key) {
    const auto it = values_.find(key);
    if (it == values_.end()) fail("missing required key \"" + key + "\"");
    consumed_.insert(consumed_.end(), key);
    return it->second;
  }

  long long get_int(const std::string& key, long long lo, long long hi) {
    const std::string raw = get(key);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
    if (ec != std::errc() || ptr != raw.data() + raw.size())
      fail("key \"" + key + "\": expected integer, got \"" + raw + "\"");
    if (v < lo || v > hi) fail("key \"" + key + "\": value out of range");
    return v;
  }

  double get_double(const std::string& key) {
    const std::string raw = get(key);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
    if (ec != std::errc() || ptr != raw.data() + raw.size())
      fail("key \"" + key + "\": expected number, got \"" + raw + "\"");
    return v;
  }

  std::vector<std::string> get_list(const std::string& key) {
    const std::string raw = get(key);
    std::vector<std::string> items;
    std::string item;
    std::istringstream stream(raw);
    while (std::getline(stream, item, ',')) {
      const std::string t = trim(item);
      if (!t.empty()) items.push_back(t);
    }
    if (items.empty()) fail("key \"" + key + "\": empty list");
    return items;
  }

  void finish() const {
    for (const auto& [key, value] : values_)
      if (std::find(consumed_.begin(), consumed_.end(), key) == consumed_.end())
        fail("unknown key \"" + key + "\"");
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw std::invalid_argument("config " + origin_ + ": " + message);
  }

 private:
  std::string origin_;
  std::map<std::string, std::string> values_;
  std::vector<std::string> consumed_;
};

}  // namespace

ExperimentConfig ExperimentConfig::from_string(const std::string& text,
                                               const std::string& origin) {
  KeyReader reader(text, origin);
  ExperimentConfig cfg;

  cfg.out_dir = reader.get("out_dir");
  cfg.threads = static_cast<int>(reader.get_int("threads", 0, 4096));
  cfg.seed = static_cast<std::uint64_t>(reader.get_int("seed", 0, (1LL << 62)));

  cfg.model.d = static_cast<int>(reader.get_int("model.d", 1, 1 << 20));
  cfg.model.r = static_cast<int>(reader.get_int("model.r", 1, 1 << 20));
  cfg.model.alpha = reader.get_double("model.alpha");
  const std::string mult = reader.get("model.multiplier");
  if (mult == "plain")
    cfg.model.multiplier = model::Multiplier::plain;
  else if (mult == "alpha_over_r")
    cfg.model.multiplier = model::Multiplier::alpha_over_r;
  else
    reader.fail("key \"model.multiplier\": expected plain or alpha_over_r");

  cfg.teacher.n = static_cast<int>(reader.get_int("teacher.n", 1, 1 << 24));
  cfg.teacher.r = static_cast<int>(reader.get_int("teacher.r", 1, 1 << 20));
  cfg.data.train = static_cast<int>(reader.get_int("data.train", 1, 1 << 24));
  cfg.data.test = static_cast<int>(reader.get_int("data.test", 1, 1 << 24));

  cfg.optimizer.kind = optim::parse_kind(reader.get("optimizer.kind"));
  cfg.optimizer.lr = reader.get_double("optimizer.lr");
  cfg.optimizer.beta1 = reader.get_double("optimizer.beta1");
  cfg.optimizer.beta2 = reader.get_double("optimizer.beta2");
  cfg.optimizer.eps = reader.get_double("optimizer.eps");
  cfg.optimizer.weight_decay = reader.get_double("optimizer.weight_decay");

  cfg.trial.steps = static_cast<int>(reader.get_int("trial.steps", 1, 1 << 24));
  cfg.trial.record_every = static_cast<int>(reader.get_int("trial.record_every", 1, 1 << 24));
  const std::string batch = reader.get("trial.batch");
  if (batch == "full") {
    cfg.trial.batch = runner::BatchMode::full_batch();
  } else if (batch.rfind("minibatch:", 0) == 0) {
    int size = 0;
    const std::string tail = batch.substr(10);
    const auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), size);
    if (ec != std::errc() || ptr != tail.data() + tail.size() || size < 1)
      reader.fail("key \"trial.batch\": expected full or minibatch:SIZE");
    cfg.trial.batch = runner::BatchMode::minibatch(size);
  } else {
    reader.fail("key \"trial.batch\": expected full or minibatch:SIZE");
  }
  cfg.trial.width = static_cast<int>(reader.get_int("trial.width", 1, 1 << 24));
  cfg.trial.scheme = gamma::parse_scheme(reader.get("trial.scheme"));

  for (const auto& item : reader.get_list("sweep.widths")) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size() || v < 1)
      reader.fail("key \"sweep.widths\": bad width \"" + item + "\"");
    cfg.sweep.widths.push_back(v);
  }
  for (const auto& item : reader.get_list("sweep.lrs")) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size())
      reader.fail("key \"sweep.lrs\": bad learning rate \"" + item + "\"");
    cfg.sweep.lrs.push_back(v);
  }
  std::sort(cfg.sweep.widths.begin(), cfg.sweep.widths.end());
  cfg.sweep.widths.erase(std::unique(cfg.sweep.widths.begin(), cfg.sweep.widths.end()),
                         cfg.sweep.widths.end());
  std::sort(cfg.sweep.lrs.begin(), cfg.sweep.lrs.end());
  cfg.sweep.lrs.erase(std::unique(cfg.sweep.lrs.begin(), cfg.sweep.lrs.end()),
                      cfg.sweep.lrs.end());
  const std::string schemes = reader.get("sweep.schemes");
  if (schemes == "A")
    cfg.sweep.schemes = {gamma::InitScheme::A};
  else if (schemes == "B")
    cfg.sweep.schemes = {gamma::InitScheme::B};
  else if (schemes == "both")
    cfg.sweep.schemes = {gamma::InitScheme::A, gamma::InitScheme::B};
  else
    reader.fail("key \"sweep.schemes\": expected A, B, or both");
  cfg.sweep.num_seeds = static_cast<int>(reader.get_int("sweep.seeds", 1, 1 << 16));

  cfg.analysis.min_fit_width = static_cast<int>(reader.get_int("analysis.min_fit_width", 1, 1 << 24));
  cfg.analysis.slope_tol = reader.get_double("analysis.slope_tol");
  cfg.analysis.probe_tol = reader.get_double("analysis.probe_tol");

  reader.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open \"" + path + "\"");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_string(buffer.str(), path);
}

void ExperimentConfig::validate() const {
  model.validate();  // n is filled per trial; the default passes
  optimizer.validate();
  sweep.validate();
  if (out_dir.empty()) throw std::invalid_argument("config: out_dir must be nonempty");
  if (trial.steps < 1) throw std::invalid_argument("config: trial.steps must be >= 1");
  if (trial.record_every < 1 || trial.record_every > trial.steps)
    throw std::invalid_argument("config: trial.record_every must be in [1, trial.steps]");
  if (teacher.r > teacher.n) throw std::invalid_argument("config: teacher.r must be <= teacher.n");
  if (analysis.slope_tol <= 0 || analysis.probe_tol <= 0)
    throw std::invalid_argument("config: analysis tolerances must be > 0");
}

ExperimentData build_experiment_data(const ExperimentConfig& cfg) {
  model::ModelConfig teacher_cfg;
  teacher_cfg.d = cfg.model.d;
  teacher_cfg.n = cfg.teacher.n;
  teacher_cfg.r = cfg.teacher.r;
  teacher_cfg.alpha = 1.0;
  teacher_cfg.multiplier = model::Multiplier::plain;

  ExperimentData data;
  data.teacher = model::init_teacher(teacher_cfg, rng::mix({cfg.seed, 0x7eacULL}));
  data.train = model::gen_dataset(data.teacher, cfg.data.train, rng::mix({cfg.seed, 0x7ea12ULL}));
  data.test = model::gen_dataset(data.teacher, cfg.data.test, rng::mix({cfg.seed, 0x7e57ULL}));
  return data;
}

runner::TrialConfig base_trial_config(const ExperimentConfig& cfg) {
  runner::TrialConfig base;
  base.model = cfg.model;
  base.model.n = cfg.trial.width;
  base.scheme = cfg.trial.scheme;
  base.optimizer = cfg.optimizer;
  base.steps = cfg.trial.steps;
  base.record_every = cfg.trial.record_every;
  base.batch = cfg.trial.batch;
  base.seed = cfg.seed;
  base.student_seed = cfg.seed;
  return base;
}

}  // namespace loralab::config

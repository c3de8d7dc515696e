#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace loralab::cli {

/// Flag overrides shared by train/sweep; anything unset falls back to the
/// config document.
struct Overrides {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::vector<int> widths;
  std::vector<double> lrs;
  std::string scheme;  // "A" | "B" | "both" | ""
};

/// --threads flag, then LORA_LAB_THREADS, then the config value; 0 means
/// hardware concurrency.
int resolve_threads(std::optional<int> flag, int config_threads);

int cmd_predict(const std::string& scheme, const std::string& lr_exp, int t_max,
                std::ostream& out, std::ostream& err);

int cmd_train(const Overrides& opts, std::ostream& out, std::ostream& err);

int cmd_sweep(const Overrides& opts, std::ostream& out, std::ostream& err);

struct AnalyzeOptions {
  std::string records_path;  // records.csv or a directory containing it
  std::string out_dir;       // default: directory of the records file
  int min_fit_width = 512;
  double slope_tol = 0.2;
  double probe_tol = 0.1;
  bool strict = false;  // nonzero exit when a mandatory verdict fails
};
int cmd_analyze(const AnalyzeOptions& opts, std::ostream& out, std::ostream& err);

struct PlotOptions {
  std::string records_path;
  std::string out_dir;  // default: directory of the records file
  std::string chart;    // eta_star_vs_width | feature_norms_vs_step | loss_vs_step
  std::vector<int> widths;   // selector; default: smallest and largest
  std::string scheme;        // "A" | "B" | "both" (default both)
  std::vector<double> lrs;   // selector; default: per-scheme optimal lr
};
int cmd_plot(const PlotOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace loralab::cli

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "loralab/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"LoRA width-scaling laboratory"};
  app.require_subcommand(1);

  // predict
  std::string predict_scheme = "A";
  std::string predict_lr_exp;
  int predict_t_max = 8;
  auto* predict = app.add_subcommand(
      "predict", "Exponent-calculus regime report for a scheme and lr exponent");
  predict->add_option("--scheme", predict_scheme, "Init scheme: A or B")->required();
  predict->add_option("--lr-exp", predict_lr_exp, "lr width exponent: p, p/q, or -inf")
      ->required();
  predict->add_option("--t-max", predict_t_max, "steps of the recursion (default 8)");

  // shared flags for train/sweep
  loralab::cli::Overrides train_opts, sweep_opts;
  std::optional<std::uint64_t> train_seed, sweep_seed;
  std::optional<int> train_threads, sweep_threads;
  auto add_common = [](CLI::App* cmd, loralab::cli::Overrides& opts,
                       std::optional<std::uint64_t>& seed, std::optional<int>& threads) {
    cmd->add_option("--config", opts.config_path, "experiment config file")->required();
    cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", [&seed](const std::vector<std::string>& vals) {
          seed = std::stoull(vals.front());
          return true;
        },
        "base seed override")->expected(1);
    cmd->add_option("--threads", [&threads](const std::vector<std::string>& vals) {
          threads = std::stoi(vals.front());
          return true;
        },
        "worker threads (0 = hardware)")->expected(1);
    cmd->add_option("--widths", opts.widths, "width list override")->delimiter(',');
    cmd->add_option("--lrs", opts.lrs, "learning-rate list override")->delimiter(',');
    cmd->add_option("--scheme", opts.scheme, "A, B, or both");
  };

  auto* train = app.add_subcommand("train", "Run one trial and persist its record");
  add_common(train, train_opts, train_seed, train_threads);
  auto* sweep = app.add_subcommand("sweep", "Run the full (width x lr x scheme x seed) grid");
  add_common(sweep, sweep_opts, sweep_seed, sweep_threads);

  // analyze
  loralab::cli::AnalyzeOptions analyze_opts;
  auto* analyze = app.add_subcommand("analyze", "Fit scaling exponents and emit verdicts");
  analyze->add_option("records", analyze_opts.records_path, "records.csv or its directory")
      ->required();
  analyze->add_option("--out", analyze_opts.out_dir, "output directory");
  analyze->add_option("--min-fit-width", analyze_opts.min_fit_width,
                      "smallest width used in slope fits (default 512)");
  analyze->add_option("--slope-tol", analyze_opts.slope_tol, "slope tolerance (default 0.2)");
  analyze->add_flag("--strict", analyze_opts.strict,
                    "exit nonzero when a mandatory verdict fails");

  // plot
  loralab::cli::PlotOptions plot_opts;
  auto* plot = app.add_subcommand("plot", "Render SVG charts from persisted records");
  plot->add_option("records", plot_opts.records_path, "records.csv or its directory")
      ->required();
  plot->add_option("--chart", plot_opts.chart,
                   "eta_star_vs_width | feature_norms_vs_step | loss_vs_step")
      ->required();
  plot->add_option("--out", plot_opts.out_dir, "output directory");
  plot->add_option("--widths", plot_opts.widths, "width selector")->delimiter(',');
  plot->add_option("--lrs", plot_opts.lrs, "lr selector (default: optimal per scheme)")
      ->delimiter(',');
  plot->add_option("--scheme", plot_opts.scheme, "A, B, or both");

  CLI11_PARSE(app, argc, argv);

  if (predict->parsed())
    return loralab::cli::cmd_predict(predict_scheme, predict_lr_exp, predict_t_max, std::cout,
                                     std::cerr);
  if (train->parsed()) {
    train_opts.seed = train_seed;
    train_opts.threads = train_threads;
    return loralab::cli::cmd_train(train_opts, std::cout, std::cerr);
  }
  if (sweep->parsed()) {
    sweep_opts.seed = sweep_seed;
    sweep_opts.threads = sweep_threads;
    return loralab::cli::cmd_sweep(sweep_opts, std::cout, std::cerr);
  }
  if (analyze->parsed()) return loralab::cli::cmd_analyze(analyze_opts, std::cout, std::cerr);
  if (plot->parsed()) return loralab::cli::cmd_plot(plot_opts, std::cout, std::cerr);
  return 2;
}

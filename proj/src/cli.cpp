#include "loralab/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <thread>

#include <json.hpp>

#include "loralab/analysis.hpp"
#include "loralab/config.hpp"
#include "loralab/records.hpp"
#include "loralab/svg.hpp"

namespace loralab::cli {

namespace fs = std::filesystem;

namespace {

nlohmann::json exponent_json(const gamma::Exponent& e) {
  if (e.is_neg_inf()) return "-inf";
  return e.value().to_double();
}

nlohmann::json fit_json(const analysis::SlopeFit& fit) {
  return nlohmann::json{{"slope", fit.slope},
                        {"intercept", fit.intercept},
                        {"r_squared", fit.r_squared},
                        {"points_used", fit.points_used}};
}

nlohmann::json verdict_json(const analysis::TheoryVerdict& v) {
  return nlohmann::json{{"name", v.name},
                        {"quantity", v.quantity},
                        {"predicted_lo", v.predicted_lo},
                        {"predicted_hi", v.predicted_hi},
                        {"tolerance", v.tolerance},
                        {"slope", v.fit.slope},
                        {"fit", fit_json(v.fit)},
                        {"pass", v.pass},
                        {"mandatory", v.mandatory}};
}

config::ExperimentConfig load_config(const Overrides& opts) {
  if (opts.config_path.empty())
    throw std::invalid_argument("missing --config PATH");
  config::ExperimentConfig cfg = config::ExperimentConfig::from_file(opts.config_path);
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  if (opts.seed) cfg.seed = *opts.seed;
  if (!opts.widths.empty()) {
    cfg.sweep.widths = opts.widths;
    std::sort(cfg.sweep.widths.begin(), cfg.sweep.widths.end());
    cfg.sweep.widths.erase(std::unique(cfg.sweep.widths.begin(), cfg.sweep.widths.end()),
                           cfg.sweep.widths.end());
    cfg.trial.width = cfg.sweep.widths.front();
  }
  if (!opts.lrs.empty()) {
    cfg.sweep.lrs = opts.lrs;
    std::sort(cfg.sweep.lrs.begin(), cfg.sweep.lrs.end());
    cfg.sweep.lrs.erase(std::unique(cfg.sweep.lrs.begin(), cfg.sweep.lrs.end()),
                        cfg.sweep.lrs.end());
    cfg.optimizer.lr = cfg.sweep.lrs.front();
  }
  if (!opts.scheme.empty()) {
    if (opts.scheme == "both") {
      cfg.sweep.schemes = {gamma::InitScheme::A, gamma::InitScheme::B};
    } else {
      const auto scheme = gamma::parse_scheme(opts.scheme);
      cfg.sweep.schemes = {scheme};
      cfg.trial.scheme = scheme;
    }
  }
  cfg.validate();
  return cfg;
}

std::string resolve_records_file(const std::string& path) {
  fs::path p(path);
  if (fs::is_directory(p)) p /= "records.csv";
  if (!fs::exists(p))
    throw std::invalid_argument("records: \"" + p.string() + "\" does not exist");
  return p.string();
}

std::string default_out_dir(const std::string& records_file, const std::string& requested) {
  if (!requested.empty()) return requested;
  return fs::path(records_file).parent_path().string();
}

}  // namespace

int resolve_threads(std::optional<int> flag, int config_threads) {
  int threads = 0;
  if (flag) {
    threads = *flag;
  } else if (const char* env = std::getenv("LORA_LAB_THREADS")) {
    const std::string v(env);
    int parsed = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), parsed);
    if (ec != std::errc() || ptr != v.data() + v.size() || parsed < 0)
      throw std::invalid_argument("LORA_LAB_THREADS: expected a non-negative integer");
    threads = parsed;
  } else {
    threads = config_threads;
  }
  if (threads == 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    threads = hw == 0 ? 1 : static_cast<int>(hw);
  }
  return threads;
}

int cmd_predict(const std::string& scheme_text, const std::string& lr_exp_text, int t_max,
                std::ostream& out, std::ostream& err) {
  gamma::InitScheme scheme;
  gamma::Exponent lr_exp;
  try {
    scheme = gamma::parse_scheme(scheme_text);
    lr_exp = gamma::parse_exponent(lr_exp_text);
    if (t_max < 2) throw std::invalid_argument("t_max must be >= 2");
  } catch (const std::exception& e) {
    err << "predict: " << e.what() << '\n';
    return 2;
  }

  const auto steps = gamma::trajectory(scheme, lr_exp, t_max);
  const auto report = gamma::classify_regime(scheme, lr_exp, t_max);

  nlohmann::json steps_json = nlohmann::json::array();
  for (const auto& row : steps) {
    nlohmann::json entry{{"t", row.state.step},
                         {"gZA", exponent_json(row.state.za)},
                         {"gB", exponent_json(row.state.b)},
                         {"gZB", exponent_json(row.state.zb)}};
    if (row.deltas) {
      entry["d1"] = exponent_json(row.deltas->d1);
      entry["d2"] = exponent_json(row.deltas->d2);
      entry["d3"] = exponent_json(row.deltas->d3);
    } else {
      entry["d1"] = nullptr;
      entry["d2"] = nullptr;
      entry["d3"] = nullptr;
    }
    steps_json.push_back(entry);
  }

  const nlohmann::json doc{
      {"schema_version", 1},
      {"scheme", gamma::scheme_name(scheme)},
      {"lr_exp", exponent_json(lr_exp)},
      {"t_max", t_max},
      {"steps", steps_json},
      {"verdicts",
       {{"output_stable", report.output_stable},
        {"feature_learning", report.feature_learning},
        {"efficient", report.efficient},
        {"internal_instability", report.internal_instability},
        {"limit_B_frozen", report.limit_b_frozen}}}};
  out << doc.dump(2) << '\n';
  return 0;
}

int cmd_train(const Overrides& opts, std::ostream& out, std::ostream& err) {
  try {
    config::ExperimentConfig cfg = load_config(opts);
    if (opts.widths.size() > 1 || opts.lrs.size() > 1)
      throw std::invalid_argument("train: takes at most one width and one lr");
    if (!opts.widths.empty()) cfg.trial.width = opts.widths.front();

    const auto data = config::build_experiment_data(cfg);
    runner::TrialConfig trial = config::base_trial_config(cfg);
    trial.seed = runner::trial_stream_seed(cfg.seed, trial.model.n, 0, trial.scheme, 0);
    trial.student_seed = runner::student_init_seed(cfg.seed, trial.model.n, 0);

    const auto record = runner::run_trial(trial, data.train, data.test);

    fs::create_directories(cfg.out_dir);
    const fs::path dir(cfg.out_dir);
    records::write_trial_csv((dir / "trial.csv").string(), record);
    records::write_text_file((dir / "trial_summary.json").string(),
                             records::trial_summary_json(record).dump(2) + "\n");

    out << "train: width=" << record.width << " scheme=" << gamma::scheme_name(trial.scheme)
        << " lr=" << records::format_double(record.lr)
        << " final_train_loss=" << records::format_double(record.final_train_loss)
        << " final_test_loss=" << records::format_double(record.final_test_loss)
        << " diverged=" << (record.diverged ? 1 : 0) << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "train: " << e.what() << '\n';
    return 1;
  }
}

int cmd_sweep(const Overrides& opts, std::ostream& out, std::ostream& err) {
  try {
    config::ExperimentConfig cfg = load_config(opts);
    const int threads = resolve_threads(opts.threads, cfg.threads);

    const auto data = config::build_experiment_data(cfg);
    const runner::TrialConfig base = config::base_trial_config(cfg);
    const auto result = runner::run_sweep(cfg.sweep, base, data.train, data.test, threads);

    fs::create_directories(cfg.out_dir);
    const fs::path dir(cfg.out_dir);
    records::write_records_csv((dir / "records.csv").string(), result);
    records::write_text_file((dir / "sweep_summary.json").string(),
                             records::sweep_summary_json(result).dump(2) + "\n");

    for (const auto& opt : result.optima) {
      out << "sweep: width=" << opt.width << " scheme=" << gamma::scheme_name(opt.scheme);
      if (opt.resolved)
        out << " lr_star=" << records::format_double(opt.lr)
            << " mean_final_train_loss=" << records::format_double(opt.mean_final_train_loss);
      else
        out << " no stable lr";
      out << '\n';
    }
    return 0;
  } catch (const std::exception& e) {
    err << "sweep: " << e.what() << '\n';
    return 1;
  }
}

int cmd_analyze(const AnalyzeOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    const std::string records_file = resolve_records_file(opts.records_path);
    const auto result = records::read_records_csv(records_file);

    analysis::Tolerances tol;
    tol.slope = opts.slope_tol;
    tol.probe = opts.probe_tol;
    const auto eta = analysis::eta_star_exponents(result, opts.min_fit_width, tol);

    nlohmann::json verdicts = nlohmann::json::array();
    bool mandatory_fail = false;
    for (const auto& v : eta.verdicts) {
      verdicts.push_back(verdict_json(v));
      if (v.mandatory && !v.pass) mandatory_fail = true;
    }

    nlohmann::json crossover = nlohmann::json::array();
    for (const auto& row : eta.crossover)
      crossover.push_back({{"width", row.width},
                           {"lr_A", row.lr_a},
                           {"lr_B", row.lr_b},
                           {"pass", row.pass}});
    if (!eta.crossover_pass) mandatory_fail = true;

    nlohmann::json fits;
    if (eta.fit_a) fits["eta_star_A"] = fit_json(*eta.fit_a);
    if (eta.fit_b) fits["eta_star_B"] = fit_json(*eta.fit_b);
    if (eta.fit_a_full) fits["eta_star_A_full_range"] = fit_json(*eta.fit_a_full);
    if (eta.fit_b_full) fits["eta_star_B_full_range"] = fit_json(*eta.fit_b_full);
    if (eta.verdicts.size() < 2) mandatory_fail = true;

    // Feature-norm checks at the optimum are advisory: they need Init[A]
    // optima across enough widths, which not every records file has.
    nlohmann::json advisory = nlohmann::json::array();
    try {
      auto growth = analysis::za_growth_exponent(result, gamma::InitScheme::A,
                                                 analysis::LrRule::at_optimum(), tol);
      growth.verdict.mandatory = false;
      advisory.push_back(verdict_json(growth.verdict));
    } catch (const std::exception& e) {
      advisory.push_back({{"name", "za_growth_at_optimum_initA"}, {"skipped", e.what()}});
    }
    try {
      auto vanish = analysis::zb_vanishing_check(result, tol);
      vanish.verdict.mandatory = false;
      advisory.push_back(verdict_json(vanish.verdict));
    } catch (const std::exception& e) {
      advisory.push_back({{"name", "zb_vanishing_initA"}, {"skipped", e.what()}});
    }

    const nlohmann::json doc{{"schema_version", 1},
                             {"records", records_file},
                             {"min_fit_width", eta.min_fit_width},
                             {"fits", fits},
                             {"verdicts", verdicts},
                             {"crossover", crossover},
                             {"crossover_pass", eta.crossover_pass},
                             {"advisory", advisory},
                             {"gaps", eta.gaps},
                             {"mandatory_pass", !mandatory_fail}};

    const std::string out_dir = default_out_dir(records_file, opts.out_dir);
    fs::create_directories(out_dir);
    records::write_text_file((fs::path(out_dir) / "verdicts.json").string(),
                             doc.dump(2) + "\n");

    for (const auto& v : eta.verdicts)
      out << "analyze: " << v.name << " slope=" << records::format_double(v.fit.slope)
          << (v.pass ? " PASS" : " FAIL") << '\n';
    out << "analyze: eta_star_crossover " << (eta.crossover_pass ? "PASS" : "FAIL") << '\n';
    for (const auto& gap : eta.gaps) out << "analyze: gap: " << gap << '\n';

    if (opts.strict && mandatory_fail) return 1;
    return 0;
  } catch (const std::exception& e) {
    err << "analyze: " << e.what() << '\n';
    return 1;
  }
}

namespace {

constexpr const char* kColorA = "#1f77b4";
constexpr const char* kColorB = "#d62728";
constexpr const char* kColorRef1 = "#7f7f7f";
constexpr const char* kColorRef2 = "#2ca02c";

std::string available_series(const runner::SweepResult& result) {
  std::string text = "available series (width/scheme/lr):";
  std::set<std::string> rows;
  for (const auto& rec : result.records)
    rows.insert("\n  " + std::to_string(rec.width) + " " +
                gamma::scheme_name(rec.config.scheme) + " " + records::format_double(rec.lr));
  for (const auto& row : rows) text += row;
  return text;
}

double log10_clip(double v) { return std::log10(std::max(v, 1e-8)); }

int plot_eta_star(const runner::SweepResult& result, const fs::path& dir, std::ostream& out) {
  std::vector<std::pair<double, double>> pts_a, pts_b;
  for (const auto& opt : result.optima) {
    if (!opt.resolved) continue;
    const auto point = std::make_pair(std::log2(static_cast<double>(opt.width)),
                                      std::log10(opt.lr));
    (opt.scheme == gamma::InitScheme::A ? pts_a : pts_b).push_back(point);
  }
  if (pts_a.empty() && pts_b.empty())
    throw std::invalid_argument("plot: no resolved optima to draw" );

  svg::Chart chart;
  chart.title = "Optimal learning rate vs width";
  double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
  for (const auto* pts : {&pts_a, &pts_b})
    for (const auto& [x, y] : *pts) {
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }

  // Reference trends n^-1/2 and n^-1 anchored at each scheme's first point.
  std::vector<svg::Series> refs;
  const double log10_2 = std::log10(2.0);
  auto ref_series = [&](const std::vector<std::pair<double, double>>& pts, double exponent,
                        const char* label, const char* color) {
    if (pts.empty()) return;
    svg::Series ref;
    ref.label = label;
    ref.color = color;
    ref.dashed = true;
    const auto& [ax, ay] = pts.front();
    for (const double x : {x_lo, x_hi}) {
      const double y = ay + exponent * (x - ax) * log10_2;
      ref.points.emplace_back(x, y);
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }
    refs.push_back(std::move(ref));
  };
  ref_series(pts_a, -0.5, "C1 * n^-1/2", kColorRef2);
  ref_series(pts_b, -1.0, "C2 * n^-1", kColorRef1);

  chart.x = {x_lo - 0.25, x_hi + 0.25, "width n", svg::log2_ticks(x_lo, x_hi)};
  chart.y = {y_lo - 0.25, y_hi + 0.25, "optimal learning rate", svg::log10_ticks(y_lo - 0.25, y_hi + 0.25)};
  if (!pts_a.empty()) chart.series.push_back({"Init[A]", kColorA, false, true, pts_a});
  if (!pts_b.empty()) chart.series.push_back({"Init[B]", kColorB, false, true, pts_b});
  for (auto& ref : refs) chart.series.push_back(std::move(ref));

  const fs::path file = dir / "eta_star.svg";
  records::write_text_file(file.string(), svg::render(chart));
  out << "plot: wrote " << file.string() << '\n';
  return 0;
}

struct SeriesSelection {
  int width;
  gamma::InitScheme scheme;
  int lr_index;
  double lr;
};

std::vector<SeriesSelection> select_series(const runner::SweepResult& result,
                                           const PlotOptions& opts) {
  std::vector<int> widths = opts.widths;
  if (widths.empty() && !result.grid.widths.empty()) {
    widths.push_back(result.grid.widths.front());
    if (result.grid.widths.size() > 1) widths.push_back(result.grid.widths.back());
  }
  std::vector<gamma::InitScheme> schemes;
  if (opts.scheme.empty() || opts.scheme == "both")
    schemes = result.grid.schemes;
  else
    schemes = {gamma::parse_scheme(opts.scheme)};

  std::vector<SeriesSelection> selection;
  for (const int width : widths) {
    for (const auto scheme : schemes) {
      if (!opts.lrs.empty()) {
        for (const double lr : opts.lrs) {
          const auto it = std::find(result.grid.lrs.begin(), result.grid.lrs.end(), lr);
          if (it == result.grid.lrs.end()) continue;
          selection.push_back(
              {width, scheme, static_cast<int>(it - result.grid.lrs.begin()), lr});
        }
      } else {
        const auto opt = runner::select_optimal_lr(result, width, scheme);
        if (opt.resolved) selection.push_back({width, scheme, opt.lr_index, opt.lr});
      }
    }
  }
  return selection;
}

int plot_curves(const runner::SweepResult& result, const PlotOptions& opts, const fs::path& dir,
                bool feature_norms, std::ostream& out) {
  const auto selection = select_series(result, opts);
  if (selection.empty())
    throw std::invalid_argument(std::string("plot: empty selection; ") +
                                available_series(result));

  std::set<int> widths;
  for (const auto& sel : selection) widths.insert(sel.width);
  for (const int width : widths) {
    svg::Chart chart;
    double x_hi = 1.0, y_lo = 1e300, y_hi = -1e300;
    std::string title_tail;
    for (const auto& sel : selection) {
      if (sel.width != width) continue;
      const auto* rec = runner::find_record(result, width, sel.scheme, sel.lr_index, 0);
      if (rec == nullptr) continue;
      const char* color = sel.scheme == gamma::InitScheme::A ? kColorA : kColorB;
      const std::string tag =
          std::string("Init[") + gamma::scheme_name(sel.scheme) + "] lr=" +
          records::format_double(sel.lr);
      if (feature_norms) {
        svg::Series za{"||Z_A|| " + tag, color, false, false, {}};
        svg::Series zb{"||Z_B|| " + tag, color, true, false, {}};
        for (std::size_t i = 0; i < rec->steps_recorded.size(); ++i) {
          if (!std::isfinite(rec->mean_za[i]) || !std::isfinite(rec->mean_zb[i])) break;
          za.points.emplace_back(rec->steps_recorded[i], log10_clip(rec->mean_za[i]));
          zb.points.emplace_back(rec->steps_recorded[i], log10_clip(rec->mean_zb[i]));
        }
        chart.series.push_back(std::move(za));
        chart.series.push_back(std::move(zb));
      } else {
        svg::Series train{"train " + tag, color, false, false, {}};
        svg::Series test{"test " + tag, color, true, false, {}};
        for (std::size_t i = 0; i < rec->steps_recorded.size(); ++i) {
          if (!std::isfinite(rec->train_loss[i])) break;
          train.points.emplace_back(rec->steps_recorded[i], log10_clip(rec->train_loss[i]));
          test.points.emplace_back(rec->steps_recorded[i], log10_clip(rec->test_loss[i]));
        }
        chart.series.push_back(std::move(train));
        chart.series.push_back(std::move(test));
      }
      title_tail += " " + tag + " final=" + records::format_double(rec->final_train_loss);
    }
    for (const auto& series : chart.series)
      for (const auto& [x, y] : series.points) {
        x_hi = std::max(x_hi, x);
        y_lo = std::min(y_lo, y);
        y_hi = std::max(y_hi, y);
      }
    if (chart.series.empty() || y_lo > y_hi)
      throw std::invalid_argument(std::string("plot: empty selection; ") +
                                  available_series(result));
    chart.title = (feature_norms ? "Feature norms, n=" : "Loss, n=") + std::to_string(width) +
                  title_tail;
    chart.x = {0.0, x_hi, "training step", svg::linear_ticks(0.0, x_hi)};
    chart.y = {y_lo - 0.25, y_hi + 0.25,
               feature_norms ? "mean feature norm" : "mean squared error",
               svg::log10_ticks(y_lo - 0.25, y_hi + 0.25)};
    const fs::path file =
        dir / ((feature_norms ? "feature_norms_n" : "loss_n") + std::to_string(width) + ".svg");
    records::write_text_file(file.string(), svg::render(chart));
    out << "plot: wrote " << file.string() << '\n';
  }
  return 0;
}

}  // namespace

int cmd_plot(const PlotOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    const std::string records_file = resolve_records_file(opts.records_path);
    const auto result = records::read_records_csv(records_file);
    const std::string out_dir = default_out_dir(records_file, opts.out_dir);
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    if (opts.chart == "eta_star_vs_width") return plot_eta_star(result, dir, out);
    if (opts.chart == "feature_norms_vs_step") return plot_curves(result, opts, dir, true, out);
    if (opts.chart == "loss_vs_step") return plot_curves(result, opts, dir, false, out);
    throw std::invalid_argument(
        "plot: unknown chart \"" + opts.chart +
        "\" (expected eta_star_vs_width, feature_norms_vs_step, or loss_vs_step)");
  } catch (const std::exception& e) {
    err << "plot: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace loralab::cli

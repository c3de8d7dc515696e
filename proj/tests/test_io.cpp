#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <random>

#include "loralab/analysis.hpp"
#include "loralab/cli.hpp"
#include "loralab/config.hpp"
#include "loralab/records.hpp"
#include "loralab/svg.hpp"

using namespace loralab;
using gamma::InitScheme;

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const char* name) {
  const fs::path dir = fs::temp_directory_path() / "loralab_io_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kGoodConfig = R"(
# canonical smoke config
out_dir = out
threads = 1
seed = 0
model.d = 3
model.r = 2
model.alpha = 2
model.multiplier = plain
teacher.n = 40
teacher.r = 4
data.train = 32
data.test = 12
optimizer.kind = adamw
optimizer.lr = 0.001
optimizer.beta1 = 0.9
optimizer.beta2 = 0.99
optimizer.eps = 1e-8
optimizer.weight_decay = 0
trial.steps = 6
trial.record_every = 2
trial.batch = full
trial.width = 16
trial.scheme = A
sweep.widths = 16,24
sweep.lrs = 0.001,0.005
sweep.schemes = both
sweep.seeds = 1
analysis.min_fit_width = 16
analysis.slope_tol = 0.2
analysis.probe_tol = 0.1
)";

std::string without_line(const std::string& text, const std::string& needle) {
  std::string out;
  std::istringstream stream(text);
  std::string line;
  while (std::getline(stream, line))
    if (line.find(needle) == std::string::npos) out += line + "\n";
  return out;
}

runner::SweepResult small_sweep() {
  const auto cfg = config::ExperimentConfig::from_string(kGoodConfig, "<test>");
  const auto data = config::build_experiment_data(cfg);
  const auto base = config::base_trial_config(cfg);
  return runner::run_sweep(cfg.sweep, base, data.train, data.test, 1);
}

}  // namespace

TEST_CASE("doubles round-trip losslessly through the CSV encoding") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> mag(-300.0, 300.0);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::copysign(std::pow(10.0, mag(gen)), mag(gen));
    CHECK(records::parse_double(records::format_double(v)) == v);
  }
  CHECK(records::parse_double("inf") == std::numeric_limits<double>::infinity());
  CHECK(records::format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(records::format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(std::isnan(records::parse_double(records::format_double(std::nan("")))));
  CHECK(records::format_double(0.1) == "0.1");
  CHECK_THROWS_AS(records::parse_double("zebra"), std::invalid_argument);
}

TEST_CASE("records CSV round-trips the sweep exactly") {
  const auto dir = scratch_dir("csv_roundtrip");
  const auto result = small_sweep();
  const std::string path = (dir / "records.csv").string();
  records::write_records_csv(path, result);
  const auto reread = records::read_records_csv(path);

  REQUIRE(reread.records.size() == result.records.size());
  CHECK(reread.grid.widths == result.grid.widths);
  CHECK(reread.grid.lrs == result.grid.lrs);
  CHECK(reread.grid.num_seeds == result.grid.num_seeds);
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    const auto& a = result.records[i];
    const auto& b = reread.records[i];
    CHECK(a.width == b.width);
    CHECK(a.lr == b.lr);
    CHECK(a.lr_index == b.lr_index);
    CHECK(a.seed_index == b.seed_index);
    CHECK((a.config.scheme == b.config.scheme));
    CHECK(a.steps_recorded == b.steps_recorded);
    CHECK(a.train_loss == b.train_loss);
    CHECK(a.test_loss == b.test_loss);
    CHECK(a.mean_za == b.mean_za);
    CHECK(a.mean_zb == b.mean_zb);
    CHECK(a.diverged == b.diverged);
    CHECK(a.final_train_loss == b.final_train_loss);
  }
  REQUIRE(reread.optima.size() == result.optima.size());
  for (std::size_t i = 0; i < result.optima.size(); ++i) {
    CHECK(reread.optima[i].resolved == result.optima[i].resolved);
    if (result.optima[i].resolved) {
      CHECK(reread.optima[i].lr == result.optima[i].lr);
      CHECK(reread.optima[i].mean_final_train_loss == result.optima[i].mean_final_train_loss);
    }
  }

  // Analysis of persisted records reproduces in-process verdicts exactly.
  const auto in_process = analysis::eta_star_exponents(result, 16);
  const auto from_disk = analysis::eta_star_exponents(reread, 16);
  REQUIRE(in_process.verdicts.size() == from_disk.verdicts.size());
  for (std::size_t i = 0; i < in_process.verdicts.size(); ++i) {
    CHECK(in_process.verdicts[i].fit.slope == from_disk.verdicts[i].fit.slope);
    CHECK(in_process.verdicts[i].pass == from_disk.verdicts[i].pass);
  }
}

TEST_CASE("divergence sentinels survive the CSV round trip") {
  const auto dir = scratch_dir("csv_divergence");
  const auto cfg = config::ExperimentConfig::from_string(kGoodConfig, "<test>");
  const auto data = config::build_experiment_data(cfg);
  auto trial = config::base_trial_config(cfg);
  trial.optimizer.kind = optim::Kind::sgd;
  trial.optimizer.lr = 1e9;
  trial.seed = runner::trial_stream_seed(0, trial.model.n, 0, trial.scheme, 0);
  trial.student_seed = runner::student_init_seed(0, trial.model.n, 0);
  const auto rec = runner::run_trial(trial, data.train, data.test);
  REQUIRE(rec.diverged);

  const std::string path = (dir / "records.csv").string();
  records::write_trial_csv(path, rec);
  const auto reread = records::read_records_csv(path);
  REQUIRE(reread.records.size() == 1);
  CHECK(reread.records.front().diverged);
  CHECK(std::isinf(reread.records.front().final_train_loss));
}

TEST_CASE("config parsing: happy path and every rejection names the key") {
  const auto cfg = config::ExperimentConfig::from_string(kGoodConfig, "<test>");
  CHECK(cfg.model.d == 3);
  CHECK(cfg.sweep.widths == std::vector<int>{16, 24});
  CHECK(cfg.sweep.lrs == std::vector<double>{0.001, 0.005});
  CHECK(cfg.sweep.schemes.size() == 2);
  CHECK(cfg.optimizer.kind == optim::Kind::adamw);
  CHECK(cfg.trial.batch.full);

  // Missing key: the error message names it.
  try {
    config::ExperimentConfig::from_string(without_line(kGoodConfig, "optimizer.beta2"),
                                          "<test>");
    FAIL("expected a throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("optimizer.beta2") != std::string::npos);
  }

  // Unknown key rejected by name.
  try {
    config::ExperimentConfig::from_string(std::string(kGoodConfig) + "\nbogus.key = 1\n",
                                          "<test>");
    FAIL("expected a throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("bogus.key") != std::string::npos);
  }

  // Duplicate key rejected.
  CHECK_THROWS_AS(config::ExperimentConfig::from_string(
                      std::string(kGoodConfig) + "\nmodel.d = 4\n", "<test>"),
                  std::invalid_argument);

  // Bad enum and bad batch spec.
  std::string bad_enum = kGoodConfig;
  bad_enum.replace(bad_enum.find("sweep.schemes = both"), 20, "sweep.schemes = Z   ");
  CHECK_THROWS_AS(config::ExperimentConfig::from_string(bad_enum, "<test>"),
                  std::invalid_argument);

  std::string minibatch = kGoodConfig;
  minibatch.replace(minibatch.find("trial.batch = full"), 18, "trial.batch = minibatch:8");
  const auto mb = config::ExperimentConfig::from_string(minibatch, "<test>");
  CHECK_FALSE(mb.trial.batch.full);
  CHECK(mb.trial.batch.size == 8);
}

TEST_CASE("sweep summary JSON is deterministic and carries the schema version") {
  const auto result = small_sweep();
  const auto j1 = records::sweep_summary_json(result);
  const auto j2 = records::sweep_summary_json(result);
  CHECK(j1.dump(2) == j2.dump(2));
  CHECK(j1.at("schema_version") == 1);
  CHECK(j1.at("grid").at("widths").size() == 2);
  CHECK(j1.at("optima").size() == 4);
}

TEST_CASE("svg rendering is deterministic and self-contained") {
  svg::Chart chart;
  chart.title = "test chart";
  chart.x = {0.0, 10.0, "x", svg::linear_ticks(0.0, 10.0)};
  chart.y = {-3.0, 0.0, "y", svg::log10_ticks(-3.0, 0.0)};
  chart.series.push_back({"series 1", "#1f77b4", false, true, {{0, -2.5}, {5, -1.0}, {10, -0.2}}});
  chart.series.push_back({"ref", "#7f7f7f", true, false, {{0, -3.0}, {10, 0.0}}});
  const auto a = svg::render(chart);
  const auto b = svg::render(chart);
  CHECK(a == b);
  CHECK(a.find("<svg") == 0);
  CHECK(a.find("polyline") != std::string::npos);
  CHECK(a.find("http") != std::string::npos);  // only the xmlns, no external asset
  CHECK(a.find("href") == std::string::npos);

  CHECK(svg::log2_ticks(6.9, 11.1).size() == 5);
  CHECK(svg::log10_ticks(-3.0, 0.0).size() == 4);
}

TEST_CASE("cli round trip: sweep artifacts feed analyze and plot deterministically") {
  const auto dir = scratch_dir("cli_roundtrip");
  const auto cfg_path = (dir / "exp.config").string();
  std::string cfg_text = kGoodConfig;
  cfg_text.replace(cfg_text.find("out_dir = out"), 13,
                   std::string("out_dir = ") + (dir / "out").string());
  records::write_text_file(cfg_path, cfg_text);

  std::ostringstream out, err;
  cli::Overrides sweep_opts;
  sweep_opts.config_path = cfg_path;
  REQUIRE(cli::cmd_sweep(sweep_opts, out, err) == 0);
  REQUIRE(err.str().empty());
  CHECK(fs::exists(dir / "out" / "records.csv"));
  CHECK(fs::exists(dir / "out" / "sweep_summary.json"));

  // Second run into a fresh directory: byte-identical artifacts.
  std::string cfg_text2 = cfg_text;
  cfg_text2.replace(cfg_text2.find((dir / "out").string()),
                    (dir / "out").string().size(), (dir / "out2").string());
  const auto cfg_path2 = (dir / "exp2.config").string();
  records::write_text_file(cfg_path2, cfg_text2);
  cli::Overrides sweep2 = sweep_opts;
  sweep2.config_path = cfg_path2;
  REQUIRE(cli::cmd_sweep(sweep2, out, err) == 0);
  CHECK(records::read_text_file((dir / "out" / "records.csv").string()) ==
        records::read_text_file((dir / "out2" / "records.csv").string()));
  CHECK(records::read_text_file((dir / "out" / "sweep_summary.json").string()) ==
        records::read_text_file((dir / "out2" / "sweep_summary.json").string()));

  cli::PlotOptions plot_opts;
  plot_opts.records_path = (dir / "out").string();
  plot_opts.chart = "eta_star_vs_width";
  REQUIRE(cli::cmd_plot(plot_opts, out, err) == 0);
  CHECK(fs::exists(dir / "out" / "eta_star.svg"));

  plot_opts.chart = "feature_norms_vs_step";
  REQUIRE(cli::cmd_plot(plot_opts, out, err) == 0);
  CHECK(fs::exists(dir / "out" / "feature_norms_n16.svg"));
  CHECK(fs::exists(dir / "out" / "feature_norms_n24.svg"));

  plot_opts.chart = "loss_vs_step";
  plot_opts.widths = {24};
  REQUIRE(cli::cmd_plot(plot_opts, out, err) == 0);
  CHECK(fs::exists(dir / "out" / "loss_n24.svg"));

  // Unknown lr selector: the error lists what exists.
  cli::PlotOptions empty_sel = plot_opts;
  empty_sel.lrs = {123.0};
  std::ostringstream err2;
  CHECK(cli::cmd_plot(empty_sel, out, err2) == 1);
  CHECK(err2.str().find("available series") != std::string::npos);
}

TEST_CASE("cli predict: spec examples") {
  std::ostringstream out, err;
  REQUIRE(cli::cmd_predict("A", "-1/2", 8, out, err) == 0);
  auto doc = nlohmann::json::parse(out.str());
  CHECK(doc.at("schema_version") == 1);
  CHECK(doc.at("verdicts").at("efficient") == true);
  CHECK(doc.at("verdicts").at("internal_instability") == true);
  CHECK(doc.at("steps").size() == 9);
  CHECK(doc.at("steps")[0].at("gB") == "-inf");
  CHECK(doc.at("steps")[1].at("d1").is_null());
  CHECK(doc.at("steps")[2].at("d1") == 0.0);

  std::ostringstream out_b;
  REQUIRE(cli::cmd_predict("B", "-1", 8, out_b, err) == 0);
  doc = nlohmann::json::parse(out_b.str());
  CHECK(doc.at("verdicts").at("efficient") == false);
  CHECK(doc.at("verdicts").at("feature_learning") == true);
  CHECK(doc.at("verdicts").at("limit_B_frozen") == true);

  std::ostringstream out_frozen;
  REQUIRE(cli::cmd_predict("A", "-inf", 8, out_frozen, err) == 0);
  doc = nlohmann::json::parse(out_frozen.str());
  CHECK(doc.at("lr_exp") == "-inf");
  CHECK(doc.at("verdicts").at("output_stable") == true);
  CHECK(doc.at("verdicts").at("feature_learning") == false);
  CHECK(doc.at("verdicts").at("internal_instability") == false);

  std::ostringstream err_bad;
  CHECK(cli::cmd_predict("A", "one-half", 8, out, err_bad) == 2);
  CHECK_FALSE(err_bad.str().empty());
}

TEST_CASE("threads resolution: flag, then env, then config") {
  unsetenv("LORA_LAB_THREADS");
  CHECK(cli::resolve_threads(3, 5) == 3);
  CHECK(cli::resolve_threads(std::nullopt, 5) == 5);
  setenv("LORA_LAB_THREADS", "7", 1);
  CHECK(cli::resolve_threads(std::nullopt, 5) == 7);
  CHECK(cli::resolve_threads(2, 5) == 2);
  setenv("LORA_LAB_THREADS", "zebra", 1);
  CHECK_THROWS_AS(cli::resolve_threads(std::nullopt, 5), std::invalid_argument);
  unsetenv("LORA_LAB_THREADS");
  CHECK(cli::resolve_threads(std::nullopt, 0) >= 1);
}

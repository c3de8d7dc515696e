#include <doctest.h>

#include <cmath>

#include "loralab/model.hpp"
#include "loralab/optim.hpp"
#include "loralab/rng.hpp"
#include "loralab/runner.hpp"

using namespace loralab;
using gamma::InitScheme;

namespace {

struct Fixture {
  model::TeacherParams teacher;
  model::Dataset train;
  model::Dataset test;
};

Fixture make_fixture(int d = 3, int teacher_n = 40, int teacher_r = 4, int train_n = 48,
                     int test_n = 16) {
  model::ModelConfig tcfg;
  tcfg.d = d;
  tcfg.n = teacher_n;
  tcfg.r = teacher_r;
  Fixture f{model::init_teacher(tcfg, 1000), {}, {}};
  f.train = model::gen_dataset(f.teacher, train_n, 2000);
  f.test = model::gen_dataset(f.teacher, test_n, 3000);
  return f;
}

runner::TrialConfig make_trial(int width, InitScheme scheme, double lr, int steps = 10,
                               int record_every = 2) {
  runner::TrialConfig cfg;
  cfg.model.d = 3;
  cfg.model.n = width;
  cfg.model.r = 2;
  cfg.model.alpha = 2.0;
  cfg.scheme = scheme;
  cfg.optimizer.lr = lr;
  cfg.steps = steps;
  cfg.record_every = record_every;
  cfg.seed = runner::trial_stream_seed(7, width, 0, scheme, 0);
  cfg.student_seed = runner::student_init_seed(7, width, 0);
  return cfg;
}

bool records_equal(const runner::TrialRecord& a, const runner::TrialRecord& b) {
  return a.steps_recorded == b.steps_recorded && a.train_loss == b.train_loss &&
         a.test_loss == b.test_loss && a.mean_za == b.mean_za && a.mean_zb == b.mean_zb &&
         a.diverged == b.diverged && a.final_train_loss == b.final_train_loss &&
         a.final_test_loss == b.final_test_loss;
}

}  // namespace

TEST_CASE("curve lengths: ceil(steps/record_every) + 1 sample points") {
  const auto f = make_fixture();
  auto cfg = make_trial(16, InitScheme::A, 1e-3, /*steps=*/7, /*record_every=*/3);
  const auto rec = runner::run_trial(cfg, f.train, f.test);
  CHECK(rec.steps_recorded == std::vector<int>{0, 3, 6, 7});
  CHECK(rec.train_loss.size() == 4);  // ceil(7/3) + 1
  CHECK(rec.test_loss.size() == 4);
  CHECK(rec.mean_za.size() == 4);
  CHECK(rec.mean_zb.size() == 4);

  cfg.steps = 10;
  cfg.record_every = 2;
  const auto rec2 = runner::run_trial(cfg, f.train, f.test);
  CHECK(rec2.steps_recorded.size() == 6);  // 0,2,4,6,8,10
}

TEST_CASE("zero learning rate: nothing moves") {
  const auto f = make_fixture();
  const auto rec = runner::run_trial(make_trial(16, InitScheme::A, 0.0), f.train, f.test);
  CHECK(rec.final_train_loss == rec.train_loss.front());
  CHECK(rec.final_test_loss == rec.test_loss.front());
  CHECK_FALSE(rec.diverged);
}

TEST_CASE("step-0 loss is scheme-independent for a shared backbone seed") {
  const auto f = make_fixture();
  const auto rec_a = runner::run_trial(make_trial(24, InitScheme::A, 1e-3), f.train, f.test);
  const auto rec_b = runner::run_trial(make_trial(24, InitScheme::B, 1e-3), f.train, f.test);
  CHECK(rec_a.train_loss.front() == rec_b.train_loss.front());
  CHECK(rec_a.test_loss.front() == rec_b.test_loss.front());

  // Fig. 3 quantities at step 0: Z_B vanishes under both schemes, Z_A only
  // under Init[B].
  CHECK(rec_a.mean_zb.front() == 0.0);
  CHECK(rec_b.mean_zb.front() == 0.0);
  CHECK(rec_a.mean_za.front() > 0.0);
  CHECK(rec_b.mean_za.front() == 0.0);
}

TEST_CASE("trial is deterministic") {
  const auto f = make_fixture();
  const auto cfg = make_trial(20, InitScheme::B, 5e-3, 12, 3);
  const auto r1 = runner::run_trial(cfg, f.train, f.test);
  const auto r2 = runner::run_trial(cfg, f.train, f.test);
  CHECK(records_equal(r1, r2));
}

TEST_CASE("cached trial loop matches the naive model/optim loop bitwise") {
  const auto f = make_fixture();
  for (const auto scheme : {InitScheme::A, InitScheme::B}) {
    auto cfg = make_trial(24, scheme, 2e-3, /*steps=*/4, /*record_every=*/1);
    const auto rec = runner::run_trial(cfg, f.train, f.test);

    auto student = model::init_student(cfg.model, scheme, cfg.student_seed);
    auto opt_state = optim::OptimizerState::for_student(student, cfg.optimizer);
    std::vector<double> naive_losses;
    for (int k = 0; k <= cfg.steps; ++k) {
      const auto trace = model::forward(student, f.train.inputs);
      naive_losses.push_back(model::mse_loss(trace.y, f.train.targets));
      if (k == cfg.steps) break;
      const auto grads = model::backward(student, trace, f.train.targets);
      optim::step(student, grads, opt_state, cfg.optimizer);
    }
    CHECK(rec.train_loss == naive_losses);
  }
}

TEST_CASE("divergence: sentinel fill, lengths preserved, flag set") {
  const auto f = make_fixture();
  auto cfg = make_trial(16, InitScheme::B, 1e6, /*steps=*/10, /*record_every=*/2);
  cfg.optimizer.kind = optim::Kind::sgd;
  const auto rec = runner::run_trial(cfg, f.train, f.test);
  CHECK(rec.diverged);
  CHECK(rec.diverged_at >= 0);
  CHECK(rec.train_loss.size() == 6);
  CHECK(std::isinf(rec.final_train_loss));
  CHECK(std::isinf(rec.final_test_loss));
  CHECK(std::isinf(rec.train_loss.back()));
}

TEST_CASE("minibatch mode runs deterministically with full-set metrics") {
  const auto f = make_fixture();
  auto cfg = make_trial(16, InitScheme::A, 1e-3, 8, 4);
  cfg.batch = runner::BatchMode::minibatch(8);
  const auto r1 = runner::run_trial(cfg, f.train, f.test);
  const auto r2 = runner::run_trial(cfg, f.train, f.test);
  CHECK(records_equal(r1, r2));
  CHECK(r1.steps_recorded == std::vector<int>{0, 4, 8});

  // Same init: step-0 metrics agree with the full-batch trial.
  auto full_cfg = cfg;
  full_cfg.batch = runner::BatchMode::full_batch();
  const auto full = runner::run_trial(full_cfg, f.train, f.test);
  CHECK(full.train_loss.front() == r1.train_loss.front());
}

TEST_CASE("sweep: cardinality, canonical order, thread invariance") {
  const auto f = make_fixture();
  runner::SweepGrid grid;
  grid.widths = {16, 24};
  grid.lrs = {1e-3, 5e-3};
  grid.schemes = {InitScheme::A, InitScheme::B};
  grid.num_seeds = 1;
  const auto base = make_trial(16, InitScheme::A, 1e-3, 6, 2);

  const auto serial = runner::run_sweep(grid, base, f.train, f.test, 1);
  CHECK(serial.records.size() == 8);

  const auto threaded = runner::run_sweep(grid, base, f.train, f.test, 3);
  REQUIRE(threaded.records.size() == serial.records.size());
  for (std::size_t i = 0; i < serial.records.size(); ++i) {
    CHECK(serial.records[i].width == threaded.records[i].width);
    CHECK(serial.records[i].lr_index == threaded.records[i].lr_index);
    CHECK(serial.records[i].seed_index == threaded.records[i].seed_index);
    CHECK(records_equal(serial.records[i], threaded.records[i]));
  }
  REQUIRE(serial.optima.size() == threaded.optima.size());
  for (std::size_t i = 0; i < serial.optima.size(); ++i) {
    CHECK(serial.optima[i].resolved == threaded.optima[i].resolved);
    CHECK(serial.optima[i].lr == threaded.optima[i].lr);
  }

  // Canonical ordering: width, then scheme, then lr, then seed.
  for (std::size_t i = 1; i < serial.records.size(); ++i) {
    const auto& prev = serial.records[i - 1];
    const auto& cur = serial.records[i];
    const auto key = [](const runner::TrialRecord& r) {
      return std::tuple(r.width, r.config.scheme == InitScheme::B ? 1 : 0, r.lr_index,
                        r.seed_index);
    };
    CHECK(key(prev) < key(cur));
  }
}

TEST_CASE("optimal lr selection: argmin, ties, divergence exclusion") {
  runner::SweepResult result;
  result.grid.widths = {64};
  result.grid.lrs = {1e-3, 1e-2, 1e-1};
  result.grid.schemes = {InitScheme::A};
  result.grid.num_seeds = 2;

  auto add = [&](int lr_index, int seed, double loss, bool diverged) {
    runner::TrialRecord rec;
    rec.width = 64;
    rec.config.scheme = InitScheme::A;
    rec.lr = result.grid.lrs[static_cast<std::size_t>(lr_index)];
    rec.lr_index = lr_index;
    rec.seed_index = seed;
    rec.final_train_loss = loss;
    rec.diverged = diverged;
    result.records.push_back(rec);
  };

  // lr 1e-3: mean 0.2; lr 1e-2: mean 0.1; lr 1e-1: one diverged seed.
  add(0, 0, 0.3, false);
  add(0, 1, 0.1, false);
  add(1, 0, 0.1, false);
  add(1, 1, 0.1, false);
  add(2, 0, 0.01, false);
  add(2, 1, 0.0, true);

  const auto opt = runner::select_optimal_lr(result, 64, InitScheme::A);
  CHECK(opt.resolved);
  CHECK(opt.lr == 1e-2);  // lr 1e-1 is ineligible despite the lower seed-0 loss
  CHECK(opt.mean_final_train_loss == doctest::Approx(0.1));

  // Tie between 1e-3 and 1e-2 -> smaller lr wins.
  result.records[0].final_train_loss = 0.1;
  result.records[1].final_train_loss = 0.1;
  const auto tie = runner::select_optimal_lr(result, 64, InitScheme::A);
  CHECK(tie.lr == 1e-3);

  // Everything diverged -> explicit "no stable lr".
  for (auto& rec : result.records) rec.diverged = true;
  const auto none = runner::select_optimal_lr(result, 64, InitScheme::A);
  CHECK_FALSE(none.resolved);
}

TEST_CASE("lr-rule series: one lr per width, optima echo it") {
  const auto f = make_fixture();
  const auto base = make_trial(16, InitScheme::A, 1e-3, 6, 2);
  const std::vector<int> widths{16, 32};
  const auto series =
      runner::run_lr_rule_series(widths, InitScheme::A, 0.5, -1.0, 2, base, f.train, f.test, 1);
  CHECK(series.records.size() == 4);
  for (const auto& rec : series.records) {
    const double expected_lr = 0.5 * std::pow(static_cast<double>(rec.width), -1.0);
    CHECK(rec.lr == expected_lr);
  }
  for (const auto& opt : series.optima) {
    if (!opt.resolved) continue;
    CHECK(opt.lr == 0.5 * std::pow(static_cast<double>(opt.width), -1.0));
  }
}

TEST_CASE("merge of per-scheme sweeps recomputes optima over the union") {
  const auto f = make_fixture();
  const auto base = make_trial(16, InitScheme::A, 1e-3, 6, 2);
  runner::SweepGrid grid_a;
  grid_a.widths = {16};
  grid_a.lrs = {1e-3, 1e-2};
  grid_a.schemes = {InitScheme::A};
  grid_a.num_seeds = 1;
  auto grid_b = grid_a;
  grid_b.lrs = {5e-4, 5e-3};
  grid_b.schemes = {InitScheme::B};

  const auto part_a = runner::run_sweep(grid_a, base, f.train, f.test, 1);
  const auto part_b = runner::run_sweep(grid_b, base, f.train, f.test, 1);
  const auto merged = runner::merge_sweeps({part_a, part_b});
  CHECK(merged.records.size() == 4);
  CHECK(merged.grid.lrs.size() == 4);
  CHECK(merged.grid.schemes.size() == 2);
  for (const auto& rec : merged.records)
    CHECK(merged.grid.lrs[static_cast<std::size_t>(rec.lr_index)] == rec.lr);
  CHECK(merged.optima.size() == 2);
}

TEST_CASE("seed derivations are stable and collision-averse") {
  const auto s1 = runner::trial_stream_seed(0, 128, 3, InitScheme::A, 1);
  CHECK(s1 == runner::trial_stream_seed(0, 128, 3, InitScheme::A, 1));
  CHECK(s1 != runner::trial_stream_seed(0, 128, 3, InitScheme::B, 1));
  CHECK(s1 != runner::trial_stream_seed(0, 128, 4, InitScheme::A, 1));
  CHECK(s1 != runner::trial_stream_seed(1, 128, 3, InitScheme::A, 1));

  const auto i1 = runner::student_init_seed(0, 128, 1);
  CHECK(i1 == runner::student_init_seed(0, 128, 1));
  CHECK(i1 != runner::student_init_seed(0, 256, 1));
  CHECK(i1 != runner::student_init_seed(0, 128, 2));
}

#include <doctest.h>

#include <cmath>
#include <random>

#include "loralab/optim.hpp"
#include "loralab/rng.hpp"

using namespace loralab;
using gamma::InitScheme;

namespace {

optim::OptimizerConfig make_cfg(optim::Kind kind, double lr) {
  optim::OptimizerConfig cfg;
  cfg.kind = kind;
  cfg.lr = lr;
  return cfg;
}

struct SingleSample {
  model::StudentState student;
  model::ForwardTrace trace;
  model::Grads grads;
};

SingleSample one_backward(int n, std::uint64_t seed) {
  model::ModelConfig cfg;
  cfg.d = 5;
  cfg.n = n;
  cfg.r = 4;
  SingleSample out{model::init_student(cfg, InitScheme::B, seed), {}, {}};
  Matrix x(1, cfg.d);
  rng::GaussianStream stream(rng::mix({seed, 0x5A11ULL}));
  stream.fill_normal(x.data.data(), x.size(), 1.0);
  const std::vector<double> target{stream.normal()};
  out.trace = model::forward(out.student, x);
  out.grads = model::backward(out.student, out.trace, target);
  return out;
}

}  // namespace

TEST_CASE("config validation") {
  auto cfg = make_cfg(optim::Kind::adamw, 1e-3);
  CHECK_NOTHROW(cfg.validate());
  cfg.lr = 0.0;  // zero lr is a legal no-op trial
  CHECK_NOTHROW(cfg.validate());
  cfg.lr = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.lr = 1e-3;
  cfg.beta1 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.beta1 = 0.9;
  cfg.eps = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("signsgd: deltas follow the sign, zero included") {
  const auto cfg = make_cfg(optim::Kind::signsgd, 0.1);
  std::vector<double> p{1.0, 1.0, 1.0};
  const std::vector<double> g{-3.0, 0.0, 5.0};
  optim::step_tensor(p, g, {}, {}, 1, cfg);
  CHECK(p == std::vector<double>{1.1, 1.0, 0.9});
}

TEST_CASE("adamw: first-step closed form and zero-grad fixpoint") {
  auto cfg = make_cfg(optim::Kind::adamw, 1.0);
  cfg.beta1 = 0.9;
  cfg.beta2 = 0.99;
  cfg.eps = 1e-8;
  std::vector<double> p{0.0}, m{0.0}, v{0.0};
  const std::vector<double> g{1.0};
  optim::step_tensor(p, g, m, v, 1, cfg);
  // m_hat = v_hat = 1 after bias correction, so delta = -1/(1 + eps).
  CHECK(p[0] == doctest::Approx(-0.99999999).epsilon(1e-10));

  std::vector<double> p2{2.5}, m2{0.0}, v2{0.0};
  const std::vector<double> zero{0.0};
  optim::step_tensor(p2, zero, m2, v2, 1, cfg);
  CHECK(p2[0] == 2.5);
}

TEST_CASE("adamw: first-step delta is bounded by 2*lr for any finite gradient") {
  auto cfg = make_cfg(optim::Kind::adamw, 0.01);
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> mag(-12.0, 12.0);
  for (int i = 0; i < 500; ++i) {
    const double g_val = std::copysign(std::pow(10.0, mag(gen)), mag(gen));
    std::vector<double> p{0.0}, m{0.0}, v{0.0};
    const std::vector<double> g{g_val};
    optim::step_tensor(p, g, m, v, 1, cfg);
    CHECK(std::fabs(p[0]) <= 2.0 * cfg.lr);
  }
}

TEST_CASE("adamw: decoupled weight decay applies before the moment update") {
  auto cfg = make_cfg(optim::Kind::adamw, 0.1);
  cfg.weight_decay = 0.1;
  std::vector<double> p{2.0}, m{0.0}, v{0.0};
  const std::vector<double> g{0.0};
  optim::step_tensor(p, g, m, v, 1, cfg);
  const double expected = 2.0 - cfg.lr * cfg.weight_decay * 2.0;
  CHECK(p[0] == expected);
}

TEST_CASE("step is pure: identical inputs give identical outputs") {
  model::ModelConfig mcfg;
  mcfg.d = 3;
  mcfg.n = 16;
  mcfg.r = 2;
  const auto cfg = make_cfg(optim::Kind::adamw, 0.01);
  auto s1 = model::init_student(mcfg, InitScheme::B, 4);
  auto s2 = s1;
  auto o1 = optim::OptimizerState::for_student(s1, cfg);
  auto o2 = optim::OptimizerState::for_student(s2, cfg);
  model::Grads grads;
  grads.da = Matrix(2, 16);
  grads.dbt = Matrix(2, 16);
  rng::GaussianStream stream(77);
  stream.fill_normal(grads.da.data.data(), grads.da.size(), 1.0);
  stream.fill_normal(grads.dbt.data.data(), grads.dbt.size(), 1.0);

  optim::step(s1, grads, o1, cfg);
  optim::step(s2, grads, o2, cfg);
  CHECK(s1.a.data == s2.a.data);
  CHECK(s1.bt.data == s2.bt.data);
  CHECK(o1.m_a == o2.m_a);
  CHECK(o1.v_b == o2.v_b);
  CHECK(o1.step == 1);

  optim::step(s1, grads, o1, cfg);
  CHECK(o1.step == 2);
}

TEST_CASE("signsgd rank-1 identity holds exactly on single samples") {
  for (const int n : {64, 256}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto sample = one_backward(n, seed);
      const auto probe =
          optim::signsgd_gradient_structure(sample.grads, sample.trace, sample.student);
      CHECK(probe.rank1_residual == 0.0);
      CHECK(probe.z_l1_norm > 0.0);
      CHECK(probe.ga_z_inf_norm == probe.z_l1_norm);
    }
  }
}

TEST_CASE("rank-1 probe: dead input gives zero norms") {
  model::ModelConfig cfg;
  cfg.d = 3;
  cfg.n = 32;
  cfg.r = 2;
  const auto student = model::init_student(cfg, InitScheme::B, 1);
  Matrix x(1, 3);  // zero input: ReLU kills the whole layer input
  const auto trace = model::forward(student, x);
  const auto grads = model::backward(student, trace, std::vector<double>{1.0});
  const auto probe = optim::signsgd_gradient_structure(grads, trace, student);
  CHECK(probe.z_l1_norm == 0.0);
  CHECK(probe.ga_z_inf_norm == 0.0);
  CHECK(probe.rank1_residual == 0.0);
}

TEST_CASE("rank-1 probe rejects multi-sample batches") {
  model::ModelConfig cfg;
  cfg.d = 3;
  cfg.n = 16;
  cfg.r = 2;
  const auto student = model::init_student(cfg, InitScheme::B, 2);
  Matrix x(2, 3);
  rng::GaussianStream stream(5);
  stream.fill_normal(x.data.data(), x.size(), 1.0);
  const auto trace = model::forward(student, x);
  const auto grads = model::backward(student, trace, std::vector<double>{1.0, 2.0});
  CHECK_THROWS_AS(optim::signsgd_gradient_structure(grads, trace, student),
                  std::invalid_argument);
}

TEST_CASE("assumption probe scales roughly linearly in width") {
  const std::vector<int> widths{128, 256, 512};
  const std::vector<std::uint64_t> seeds{0, 1, 2};
  model::ModelConfig base;
  base.d = 5;
  base.r = 4;
  const auto points = optim::probe_assumption_scaling(widths, seeds, optim::Kind::signsgd, base);
  REQUIRE(points.size() == 3);
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const double ratio = points[i + 1].second / points[i].second;
    CHECK(ratio > 1.6);
    CHECK(ratio < 2.4);
  }

  const std::vector<int> single{128};
  CHECK_THROWS_AS(optim::probe_assumption_scaling(single, seeds, optim::Kind::signsgd, base),
                  std::invalid_argument);
}

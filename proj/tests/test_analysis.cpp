#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "loralab/analysis.hpp"

using namespace loralab;
using gamma::InitScheme;

namespace {

using Points = std::vector<std::pair<double, double>>;

/// Sweep result with hand-planted optima: per (width, scheme) the loss is
/// minimized exactly at the lr closest to target(width).
runner::SweepResult planted_sweep(const std::vector<int>& widths,
                                  const std::vector<double>& lrs,
                                  const std::function<double(int, InitScheme)>& target) {
  runner::SweepResult result;
  result.grid.widths = widths;
  result.grid.lrs = lrs;
  result.grid.schemes = {InitScheme::A, InitScheme::B};
  result.grid.num_seeds = 1;
  for (const int width : widths) {
    for (const auto scheme : result.grid.schemes) {
      for (std::size_t li = 0; li < lrs.size(); ++li) {
        runner::TrialRecord rec;
        rec.width = width;
        rec.config.scheme = scheme;
        rec.lr = lrs[li];
        rec.lr_index = static_cast<int>(li);
        rec.seed_index = 0;
        const double miss = std::log(lrs[li]) - std::log(target(width, scheme));
        rec.final_train_loss = 0.01 + miss * miss;
        rec.steps_recorded = {0};
        rec.train_loss = {rec.final_train_loss};
        rec.test_loss = {rec.final_train_loss};
        rec.mean_za = {1.0};
        rec.mean_zb = {1.0};
        result.records.push_back(rec);
      }
    }
  }
  for (const int width : widths)
    for (const auto scheme : result.grid.schemes)
      result.optima.push_back(runner::select_optimal_lr(result, width, scheme));
  return result;
}

std::vector<double> geometric_grid(double lo, double hi, int count) {
  std::vector<double> grid(count);
  for (int i = 0; i < count; ++i)
    grid[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
  return grid;
}

/// Single-lr-per-width result with planted end-of-training feature norms.
runner::SweepResult planted_series(const std::vector<int>& widths, InitScheme scheme,
                                   const std::function<double(int)>& za_final,
                                   const std::function<double(int)>& zb_final) {
  runner::SweepResult result;
  result.grid.widths = widths;
  result.grid.schemes = {scheme};
  result.grid.num_seeds = 1;
  for (const int width : widths) result.grid.lrs.push_back(1.0 / width);
  std::sort(result.grid.lrs.begin(), result.grid.lrs.end());
  for (const int width : widths) {
    runner::TrialRecord rec;
    rec.width = width;
    rec.config.scheme = scheme;
    rec.lr = 1.0 / width;
    const auto it =
        std::find(result.grid.lrs.begin(), result.grid.lrs.end(), rec.lr);
    rec.lr_index = static_cast<int>(it - result.grid.lrs.begin());
    rec.seed_index = 0;
    rec.steps_recorded = {0, 10};
    rec.final_train_loss = 0.5;
    rec.train_loss = {1.0, 0.5};
    rec.test_loss = {1.0, 0.5};
    rec.mean_za = {0.0, za_final(width)};
    rec.mean_zb = {0.0, zb_final(width)};
    result.records.push_back(rec);
  }
  for (const int width : widths)
    for (const auto s : result.grid.schemes)
      result.optima.push_back(runner::select_optimal_lr(result, width, s));
  return result;
}

}  // namespace

TEST_CASE("log-log fit: exact power laws") {
  const Points square{{2, 4}, {4, 16}, {8, 64}};
  const auto fit_sq = analysis::fit_loglog_slope(square);
  CHECK(fit_sq.slope == 2.0);
  CHECK(fit_sq.r_squared == doctest::Approx(1.0));

  const Points flat{{2, 3.7}, {4, 3.7}};
  const auto fit_flat = analysis::fit_loglog_slope(flat);
  CHECK(fit_flat.slope == 0.0);

  const Points identity{{128, 128}, {256, 256}, {512, 512}};
  const auto fit_id = analysis::fit_loglog_slope(identity);
  CHECK(fit_id.slope == 1.0);
  CHECK(fit_id.r_squared == 1.0);
  CHECK(fit_id.points_used == 3);
}

TEST_CASE("log-log fit: planted power laws across the exponent range") {
  std::mt19937 gen(21);
  std::uniform_real_distribution<double> coeff(0.1, 10.0);
  for (double s = -2.0; s <= 2.0; s += 0.25) {
    const double c = coeff(gen);
    Points pts;
    for (const double n : {64.0, 128.0, 256.0, 512.0, 1024.0})
      pts.emplace_back(n, c * std::pow(n, s));
    const auto fit = analysis::fit_loglog_slope(pts);
    CHECK(fit.slope == doctest::Approx(s).epsilon(1e-10));
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::pow(2.0, fit.intercept) == doctest::Approx(c).epsilon(1e-8));
  }
}

TEST_CASE("log-log fit: errors name the offending point") {
  const Points bad{{2, 4}, {4, 0.0}};
  try {
    analysis::fit_loglog_slope(bad);
    FAIL("expected a throw");
  } catch (const std::invalid_argument& e) {
    const std::string message = e.what();
    CHECK(message.find("n=4") != std::string::npos);
  }
  const Points one{{2, 4}};
  CHECK_THROWS_AS(analysis::fit_loglog_slope(one), std::invalid_argument);
}

TEST_CASE("eta-star exponents on planted optima") {
  const std::vector<int> widths{128, 256, 512, 1024, 2048, 4096};
  const auto lrs = geometric_grid(1e-6, 1.0, 120);  // fine grid: tiny quantization
  const auto result = planted_sweep(widths, lrs, [](int n, InitScheme scheme) {
    return scheme == InitScheme::B ? 8.0 / n : 2.0 * std::pow(n, -0.7);
  });

  const auto report = analysis::eta_star_exponents(result, 512);
  REQUIRE(report.fit_a.has_value());
  REQUIRE(report.fit_b.has_value());
  CHECK(report.fit_b->slope == doctest::Approx(-1.0).epsilon(0.05));
  CHECK(report.fit_a->slope == doctest::Approx(-0.7).epsilon(0.05));
  REQUIRE(report.verdicts.size() == 2);
  for (const auto& v : report.verdicts) CHECK(v.pass);
  CHECK(report.crossover_pass);
  for (const auto& row : report.crossover) {
    CHECK(row.width >= 512);
    CHECK(row.lr_a > row.lr_b);
  }

  // Scaling the whole grid by a constant moves intercepts, not slopes.
  auto scaled_lrs = lrs;
  for (auto& lr : scaled_lrs) lr *= 3.0;
  const auto scaled = planted_sweep(widths, scaled_lrs, [](int n, InitScheme scheme) {
    return 3.0 * (scheme == InitScheme::B ? 8.0 / n : 2.0 * std::pow(n, -0.7));
  });
  const auto scaled_report = analysis::eta_star_exponents(scaled, 512);
  REQUIRE(scaled_report.fit_b.has_value());
  CHECK(scaled_report.fit_b->slope == doctest::Approx(report.fit_b->slope).epsilon(1e-9));
  CHECK(scaled_report.fit_b->intercept != report.fit_b->intercept);
}

TEST_CASE("eta-star verdict fails on a contradictory planted slope") {
  const std::vector<int> widths{512, 1024, 2048, 4096};
  const auto lrs = geometric_grid(1e-6, 1.0, 120);
  const auto result = planted_sweep(widths, lrs, [](int n, InitScheme scheme) {
    // Init[B] planted at n^-1/2: far outside the -1 +- 0.2 band.
    return scheme == InitScheme::B ? std::pow(n, -0.5) : 4.0 * std::pow(n, -0.7);
  });
  const auto report = analysis::eta_star_exponents(result, 512);
  bool found_b = false;
  for (const auto& v : report.verdicts)
    if (v.name == "eta_star_slope_initB") {
      found_b = true;
      CHECK_FALSE(v.pass);
    }
  CHECK(found_b);
}

TEST_CASE("za growth: forced-exponent series against the recursion's prediction") {
  const std::vector<int> widths{128, 256, 512, 1024, 2048};

  const auto grow = planted_series(widths, InitScheme::A,
                                   [](int n) { return 0.3 * std::sqrt(n); },
                                   [](int) { return 0.5; });
  const auto report = analysis::za_growth_exponent(
      grow, InitScheme::A, analysis::LrRule::fixed_exponent(gamma::Exponent{-1, 2}));
  CHECK(report.verdict.predicted_lo == 0.5);
  CHECK(report.fit.slope == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(report.verdict.pass);

  const auto flat = planted_series(widths, InitScheme::B, [](int) { return 0.8; },
                                   [](int) { return 0.5; });
  const auto flat_report = analysis::za_growth_exponent(
      flat, InitScheme::B, analysis::LrRule::fixed_exponent(gamma::Exponent{-1}));
  CHECK(flat_report.verdict.predicted_lo == 0.0);
  CHECK(flat_report.fit.slope == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(flat_report.verdict.pass);

  // Planted contradiction: Z_A constant where a 1/2 slope is predicted.
  const auto wrong = planted_series(widths, InitScheme::A, [](int) { return 0.8; },
                                    [](int) { return 0.5; });
  const auto wrong_report = analysis::za_growth_exponent(
      wrong, InitScheme::A, analysis::LrRule::fixed_exponent(gamma::Exponent{-1, 2}));
  CHECK_FALSE(wrong_report.verdict.pass);
}

TEST_CASE("zb vanishing check brackets the slope") {
  const std::vector<int> widths{512, 1024, 2048, 4096};
  const auto lrs = geometric_grid(1e-6, 1.0, 120);

  auto with_zb = [&](const std::function<double(int)>& zb) {
    auto result = planted_sweep(widths, lrs, [](int n, InitScheme scheme) {
      return scheme == InitScheme::B ? 8.0 / n : 2.0 * std::pow(n, -0.7);
    });
    for (auto& rec : result.records) rec.mean_zb.back() = zb(rec.width);
    return result;
  };

  const auto boundary = analysis::zb_vanishing_check(with_zb([](int) { return 0.37; }));
  CHECK(boundary.fit.slope == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(boundary.verdict.pass);

  const auto inside = analysis::zb_vanishing_check(
      with_zb([](int n) { return std::pow(n, -0.3); }));
  CHECK(inside.fit.slope == doctest::Approx(-0.3).epsilon(1e-9));
  CHECK(inside.verdict.pass);

  const auto outside = analysis::zb_vanishing_check(with_zb([](int n) { return 10.0 / n; }));
  CHECK(outside.fit.slope == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK_FALSE(outside.verdict.pass);
}

TEST_CASE("assumption report") {
  std::vector<std::pair<int, double>> exact;
  for (const int n : {128, 256, 512, 1024, 2048}) exact.emplace_back(n, static_cast<double>(n));
  const auto v = analysis::assumption_report(exact);
  CHECK(v.fit.slope == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(v.fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(v.pass);

  std::vector<std::pair<int, double>> rooted;
  for (const int n : {128, 256, 512, 1024, 2048})
    rooted.emplace_back(n, std::sqrt(static_cast<double>(n)));
  const auto bad = analysis::assumption_report(rooted);
  CHECK(bad.fit.slope == doctest::Approx(0.5).epsilon(1e-9));
  CHECK_FALSE(bad.pass);

  std::vector<std::pair<int, double>> two{{128, 128.0}, {256, 256.0}};
  CHECK_THROWS_AS(analysis::assumption_report(two), std::invalid_argument);
}

#include "loralab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace loralab::analysis {

SlopeFit fit_loglog_slope(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) throw std::invalid_argument("fit_loglog_slope: need >= 2 points");
  for (const auto& [n, value] : points) {
    if (!(n > 0.0) || !(value > 0.0) || !std::isfinite(value))
      throw std::invalid_argument("fit_loglog_slope: non-positive value at n=" +
                                  std::to_string(n) + " (value=" + std::to_string(value) + ")");
  }
  const double count = static_cast<double>(points.size());
  double x_mean = 0.0, y_mean = 0.0;
  for (const auto& [n, value] : points) {
    x_mean += std::log2(n);
    y_mean += std::log2(value);
  }
  x_mean /= count;
  y_mean /= count;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [n, value] : points) {
    const double dx = std::log2(n) - x_mean;
    const double dy = std::log2(value) - y_mean;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_loglog_slope: all points share one n");

  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = y_mean - fit.slope * x_mean;
  fit.points_used = static_cast<int>(points.size());
  if (syy > 0.0) {
    double ss_res = 0.0;
    for (const auto& [n, value] : points) {
      const double resid = std::log2(value) - (fit.intercept + fit.slope * std::log2(n));
      ss_res += resid * resid;
    }
    fit.r_squared = 1.0 - ss_res / syy;
  } else {
    fit.r_squared = 1.0;  // constant data: the flat line is an exact fit
  }
  return fit;
}

namespace {

const runner::OptimalLr* find_optimum(const runner::SweepResult& result, int width,
                                      gamma::InitScheme scheme) {
  for (const auto& opt : result.optima)
    if (opt.width == width && opt.scheme == scheme) return &opt;
  return nullptr;
}

std::vector<std::pair<double, double>> resolved_eta_points(const runner::SweepResult& result,
                                                           gamma::InitScheme scheme,
                                                           int min_width,
                                                           std::vector<std::string>* gaps) {
  std::vector<std::pair<double, double>> points;
  for (const int width : result.grid.widths) {
    const auto* opt = find_optimum(result, width, scheme);
    if (opt == nullptr || !opt->resolved) {
      if (gaps != nullptr)
        gaps->push_back(std::string("no stable lr at width ") + std::to_string(width) +
                        " scheme " + gamma::scheme_name(scheme));
      continue;
    }
    if (width >= min_width) points.emplace_back(static_cast<double>(width), opt->lr);
  }
  return points;
}

}  // namespace

EtaStarReport eta_star_exponents(const runner::SweepResult& result, int min_fit_width,
                                 const Tolerances& tol) {
  EtaStarReport report;
  report.min_fit_width = min_fit_width;

  const auto points_a = resolved_eta_points(result, gamma::InitScheme::A, min_fit_width,
                                            &report.gaps);
  const auto points_b = resolved_eta_points(result, gamma::InitScheme::B, min_fit_width,
                                            &report.gaps);
  const auto points_a_full = resolved_eta_points(result, gamma::InitScheme::A, 0, nullptr);
  const auto points_b_full = resolved_eta_points(result, gamma::InitScheme::B, 0, nullptr);

  if (points_a.size() >= 2) report.fit_a = fit_loglog_slope(points_a);
  if (points_b.size() >= 2) report.fit_b = fit_loglog_slope(points_b);
  if (points_a_full.size() >= 2) report.fit_a_full = fit_loglog_slope(points_a_full);
  if (points_b_full.size() >= 2) report.fit_b_full = fit_loglog_slope(points_b_full);
  if (points_a.size() < 3)
    report.gaps.push_back("scheme A: fewer than 3 fitted widths >= " +
                          std::to_string(min_fit_width));
  if (points_b.size() < 3)
    report.gaps.push_back("scheme B: fewer than 3 fitted widths >= " +
                          std::to_string(min_fit_width));

  if (report.fit_b) {
    TheoryVerdict v;
    v.name = "eta_star_slope_initB";
    v.quantity = "optimal lr vs width, Init[B] (predicted n^-1)";
    v.predicted_lo = v.predicted_hi = -1.0;
    v.tolerance = tol.slope;
    v.fit = *report.fit_b;
    v.pass = std::fabs(v.fit.slope - (-1.0)) <= tol.slope;
    report.verdicts.push_back(v);
  }
  if (report.fit_a) {
    TheoryVerdict v;
    v.name = "eta_star_slope_initA";
    v.quantity = "optimal lr vs width, Init[A] (predicted inside (n^-1, n^-1/2))";
    v.predicted_lo = -1.0;
    v.predicted_hi = -0.5;
    v.tolerance = tol.slope;
    v.fit = *report.fit_a;
    v.pass = v.fit.slope > -1.0 - tol.slope && v.fit.slope < -0.5 + tol.slope;
    report.verdicts.push_back(v);
  }

  report.crossover_pass = true;
  for (const int width : result.grid.widths) {
    if (width < min_fit_width) continue;
    const auto* opt_a = find_optimum(result, width, gamma::InitScheme::A);
    const auto* opt_b = find_optimum(result, width, gamma::InitScheme::B);
    if (opt_a == nullptr || opt_b == nullptr || !opt_a->resolved || !opt_b->resolved) {
      report.crossover_pass = false;
      continue;
    }
    CrossoverRow row;
    row.width = width;
    row.lr_a = opt_a->lr;
    row.lr_b = opt_b->lr;
    row.pass = row.lr_a > row.lr_b;
    if (!row.pass) report.crossover_pass = false;
    report.crossover.push_back(row);
  }
  if (report.crossover.empty()) report.crossover_pass = false;
  return report;
}

namespace {

/// Mean over non-diverged seeds of the final value of one curve.
std::optional<double> seed_mean_final(const runner::SweepResult& result, int width,
                                      gamma::InitScheme scheme, int lr_index,
                                      std::vector<double> runner::TrialRecord::* curve) {
  double acc = 0.0;
  int count = 0;
  for (const auto& rec : result.records) {
    if (rec.width != width || rec.config.scheme != scheme || rec.lr_index != lr_index) continue;
    if (rec.diverged) continue;
    const auto& values = rec.*curve;
    if (values.empty()) continue;
    acc += values.back();
    ++count;
  }
  if (count == 0) return std::nullopt;
  return acc / count;
}

/// Resolves which lr index the rule reads at this width. fixed_exponent
/// expects the width to carry exactly one lr (a rule series).
std::optional<int> rule_lr_index(const runner::SweepResult& result, int width,
                                 gamma::InitScheme scheme, const LrRule& rule,
                                 std::vector<std::string>* excluded) {
  if (rule.kind == LrRule::Kind::at_optimum) {
    const auto* opt = find_optimum(result, width, scheme);
    if (opt == nullptr || !opt->resolved) {
      excluded->push_back("width " + std::to_string(width) + ": no stable lr");
      return std::nullopt;
    }
    return opt->lr_index;
  }
  std::set<int> indices;
  for (const auto& rec : result.records)
    if (rec.width == width && rec.config.scheme == scheme) indices.insert(rec.lr_index);
  if (indices.empty()) {
    excluded->push_back("width " + std::to_string(width) + ": no trials");
    return std::nullopt;
  }
  if (indices.size() > 1)
    throw std::invalid_argument(
        "za_growth_exponent: fixed_exponent rule expects one lr per width (got a grid)");
  return *indices.begin();
}

GrowthReport growth_report(const runner::SweepResult& result, gamma::InitScheme scheme,
                           const LrRule& rule, std::vector<double> runner::TrialRecord::* curve,
                           const Tolerances& tol) {
  GrowthReport report;
  for (const int width : result.grid.widths) {
    const auto li = rule_lr_index(result, width, scheme, rule, &report.excluded);
    if (!li) continue;
    const auto mean = seed_mean_final(result, width, scheme, *li, curve);
    if (!mean) {
      report.excluded.push_back("width " + std::to_string(width) + ": all seeds diverged");
      continue;
    }
    if (!(*mean > 0.0)) {
      report.excluded.push_back("width " + std::to_string(width) + ": zero mean norm");
      continue;
    }
    report.points.emplace_back(width, *mean);
  }
  if (report.points.size() < 2)
    throw std::invalid_argument("growth fit: fewer than 2 usable widths");
  std::vector<std::pair<double, double>> pts;
  pts.reserve(report.points.size());
  for (const auto& [w, v] : report.points) pts.emplace_back(static_cast<double>(w), v);
  report.fit = fit_loglog_slope(pts);
  report.verdict.fit = report.fit;
  report.verdict.tolerance = tol.slope;
  return report;
}

}  // namespace

GrowthReport za_growth_exponent(const runner::SweepResult& result, gamma::InitScheme scheme,
                                const LrRule& rule, const Tolerances& tol) {
  GrowthReport report = growth_report(result, scheme, rule, &runner::TrialRecord::mean_za, tol);
  if (rule.kind == LrRule::Kind::fixed_exponent) {
    const auto after_step = gamma::step_dynamics(gamma::init_state(scheme), rule.exponent);
    if (after_step.za.is_neg_inf())
      throw std::invalid_argument("za_growth_exponent: rule predicts a vanishing Z_A");
    const double predicted = after_step.za.value().to_double();
    report.verdict.name = std::string("za_growth_init") + gamma::scheme_name(scheme);
    report.verdict.quantity = "end-of-training mean ||Z_A|| vs width at lr ~ n^" +
                              gamma::to_string(rule.exponent);
    report.verdict.predicted_lo = report.verdict.predicted_hi = predicted;
    report.verdict.pass = std::fabs(report.fit.slope - predicted) <= tol.slope;
  } else {
    report.verdict.name = std::string("za_growth_at_optimum_init") + gamma::scheme_name(scheme);
    report.verdict.quantity = "mean ||Z_A|| grows with width at the optimal lr";
    report.verdict.predicted_lo = 0.0;
    report.verdict.predicted_hi = 0.0;
    report.verdict.tolerance = 0.0;
    const auto& first = report.points.front();
    const auto& last = report.points.back();
    report.verdict.pass = last.second > first.second;
  }
  return report;
}

GrowthReport zb_vanishing_check(const runner::SweepResult& result, const Tolerances& tol) {
  GrowthReport report = growth_report(result, gamma::InitScheme::A, LrRule::at_optimum(),
                                      &runner::TrialRecord::mean_zb, tol);
  report.verdict.name = "zb_vanishing_initA";
  report.verdict.quantity =
      "end-of-training mean ||Z_B|| vs width at the optimal lr (predicted slope in (-1/2, 0])";
  report.verdict.predicted_lo = -0.5;
  report.verdict.predicted_hi = 0.0;
  report.verdict.pass =
      report.fit.slope > -0.5 - tol.slope && report.fit.slope <= 0.0 + tol.slope;
  return report;
}

TheoryVerdict assumption_report(std::span<const std::pair<int, double>> probe_points,
                                const Tolerances& tol) {
  if (probe_points.size() < 3)
    throw std::invalid_argument("assumption_report: need >= 3 widths");
  std::vector<std::pair<double, double>> pts;
  pts.reserve(probe_points.size());
  for (const auto& [w, v] : probe_points) pts.emplace_back(static_cast<double>(w), v);
  TheoryVerdict v;
  v.name = "assumption_gaz_scaling";
  v.quantity = "||g_A Z||_inf vs width (predicted n^1)";
  v.predicted_lo = v.predicted_hi = 1.0;
  v.tolerance = tol.probe;
  v.fit = fit_loglog_slope(pts);
  v.pass = std::fabs(v.fit.slope - 1.0) <= tol.probe;
  return v;
}

}  // namespace loralab::analysis

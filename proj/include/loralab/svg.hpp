#pragma once

#include <string>
#include <utility>
#include <vector>

namespace loralab::svg {

/// Minimal deterministic line-chart renderer: fixed canvas, polyline series,
/// caller-supplied tick positions/labels. No external assets; numbers are
/// formatted with two fixed decimals so identical inputs give identical
/// bytes.
struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  std::string label;
  std::vector<std::pair<double, std::string>> ticks;
};

struct Series {
  std::string label;
  std::string color;
  bool dashed = false;
  bool markers = false;
  std::vector<std::pair<double, double>> points;
};

struct Chart {
  std::string title;
  Axis x;
  Axis y;
  std::vector<Series> series;
};

std::string render(const Chart& chart, int width = 860, int height = 520);

/// Decade ticks (.., 1e-2, 1e-1, 1, ..) covering [lo, hi] in log10 space.
std::vector<std::pair<double, std::string>> log10_ticks(double log_lo, double log_hi);

/// Power-of-two ticks in log2 space, labeled 2^k.
std::vector<std::pair<double, std::string>> log2_ticks(double log_lo, double log_hi);

/// Round-number linear ticks (1/2/5 scaling).
std::vector<std::pair<double, std::string>> linear_ticks(double lo, double hi);

}  // namespace loralab::svg

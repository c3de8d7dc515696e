#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "loralab/gamma.hpp"
#include "loralab/model.hpp"
#include "loralab/optim.hpp"

namespace loralab::runner {

struct BatchMode {
  bool full = true;
  int size = 0;  // minibatch size when !full

  static BatchMode full_batch() { return {true, 0}; }
  static BatchMode minibatch(int size) { return {false, size}; }
};

struct TrialConfig {
  model::ModelConfig model;
  gamma::InitScheme scheme = gamma::InitScheme::A;
  optim::OptimizerConfig optimizer;
  int steps = 500;
  int record_every = 10;
  BatchMode batch;
  std::uint64_t seed = 0;          // streams owned by the trial (minibatch order)
  std::uint64_t student_seed = 0;  // weight initialization; shared across the lr axis
  double divergence_factor = 1e6;  // diverged when loss > factor * step-0 loss

  void validate() const;
};

/// One (width, scheme, lr, seed) training run. Curves are sampled at steps
/// {0, record_every, 2*record_every, ...} plus the final step, so their
/// length is ceil(steps/record_every) + 1. After divergence the remaining
/// sample points hold +inf sentinels.
struct TrialRecord {
  TrialConfig config;
  int width = 0;
  double lr = 0.0;
  int lr_index = -1;
  int seed_index = -1;
  std::vector<int> steps_recorded;
  std::vector<double> train_loss;
  std::vector<double> test_loss;
  std::vector<double> mean_za;
  std::vector<double> mean_zb;
  bool diverged = false;
  int diverged_at = -1;
  double final_train_loss = 0.0;
  double final_test_loss = 0.0;
};

struct SweepGrid {
  std::vector<int> widths;                  // ascending
  std::vector<double> lrs;                  // ascending
  std::vector<gamma::InitScheme> schemes;
  int num_seeds = 3;

  void validate() const;
};

struct OptimalLr {
  int width = 0;
  gamma::InitScheme scheme = gamma::InitScheme::A;
  bool resolved = false;  // false: every grid lr diverged ("no stable lr")
  int lr_index = -1;
  double lr = 0.0;
  double mean_final_train_loss = 0.0;
};

struct SweepResult {
  SweepGrid grid;
  std::uint64_t base_seed = 0;
  std::vector<TrialRecord> records;  // ordered by (width, seed, scheme, lr)
  std::vector<OptimalLr> optima;     // ordered by (width, scheme)
};

/// Stream seed for one grid cell.
std::uint64_t trial_stream_seed(std::uint64_t base, int width, int lr_index,
                                gamma::InitScheme scheme, int seed_index);

/// Init seed for the student weights. Deliberately excludes the lr index and
/// the scheme: trials along the lr axis train the same sampled network, and
/// both schemes share one frozen backbone per (width, seed) replicate.
std::uint64_t student_init_seed(std::uint64_t base, int width, int seed_index);

TrialRecord run_trial(const TrialConfig& cfg, const model::Dataset& train,
                      const model::Dataset& test);

/// Full grid product. Trials are pure functions of their configs and run on
/// a worker pool; results land in canonical order regardless of thread
/// count. `base` supplies everything the grid does not (optimizer, steps,
/// model dims); base.seed seeds the grid derivations.
SweepResult run_sweep(const SweepGrid& grid, const TrialConfig& base,
                      const model::Dataset& train, const model::Dataset& test, int threads);

/// Trials with a width-dependent learning rate lr(n) = coeff * n^exponent,
/// one lr per width (for forced-exponent feature-growth measurements).
SweepResult run_lr_rule_series(std::span<const int> widths, gamma::InitScheme scheme,
                               double coeff, double exponent, int num_seeds,
                               const TrialConfig& base, const model::Dataset& train,
                               const model::Dataset& test, int threads);

/// Argmin over grid lrs of the seed-mean final train loss, restricted to lrs
/// where no seed diverged; ties break toward the smaller lr.
OptimalLr select_optimal_lr(const SweepResult& result, int width, gamma::InitScheme scheme);

/// Merge records of several sweeps over the same base seed (e.g. per-scheme
/// grids); optima are recomputed over the combined grid.
SweepResult merge_sweeps(const std::vector<SweepResult>& parts);

const TrialRecord* find_record(const SweepResult& result, int width, gamma::InitScheme scheme,
                               int lr_index, int seed_index);

}  // namespace loralab::runner

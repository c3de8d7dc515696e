#pragma once

#include <cstdint>
#include <string>

#include "loralab/analysis.hpp"
#include "loralab/model.hpp"
#include "loralab/optim.hpp"
#include "loralab/runner.hpp"

namespace loralab::config {

/// The experiment document: flat "key = value" lines with dotted keys,
/// '#' comments. Every key is required; unknown or duplicate keys are
/// rejected. The canonical example ships as experiment.default.
struct ExperimentConfig {
  std::string out_dir;
  int threads = 0;  // 0 = hardware concurrency
  std::uint64_t seed = 0;

  model::ModelConfig model;  // student dims; n is taken from trial/sweep

  struct Teacher {
    int n = 1000;
    int r = 20;
  } teacher;

  struct Data {
    int train = 1000;
    int test = 100;
  } data;

  optim::OptimizerConfig optimizer;

  struct Trial {
    int steps = 500;
    int record_every = 10;
    runner::BatchMode batch;
    int width = 1024;  // used by the train command
    gamma::InitScheme scheme = gamma::InitScheme::A;
  } trial;

  runner::SweepGrid sweep;

  struct Analysis {
    int min_fit_width = 512;
    double slope_tol = 0.2;
    double probe_tol = 0.1;
  } analysis;

  void validate() const;

  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_string(const std::string& text, const std::string& origin);
};

/// Teacher network and train/test datasets for one experiment seed.
struct ExperimentData {
  model::TeacherParams teacher;
  model::Dataset train;
  model::Dataset test;
};
ExperimentData build_experiment_data(const ExperimentConfig& cfg);

/// Base trial config (everything but width/scheme/lr, which the grid sets).
runner::TrialConfig base_trial_config(const ExperimentConfig& cfg);

}  // namespace loralab::config

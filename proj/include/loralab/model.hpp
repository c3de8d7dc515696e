#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "loralab/gamma.hpp"
#include "loralab/matrix.hpp"

namespace loralab::model {

enum class Multiplier { plain, alpha_over_r };

struct ModelConfig {
  int d = 5;       // input dimension
  int n = 1024;    // width (the scaling axis)
  int r = 4;       // LoRA rank
  double alpha = 4.0;
  Multiplier multiplier = Multiplier::plain;

  /// Scale s applied to the LoRA branch: 1 for plain, alpha/r otherwise.
  double scale() const { return multiplier == Multiplier::plain ? 1.0 : alpha / r; }
  void validate() const;
};

/// Teacher network: residual block with an injected LoRA pair and W_h
/// identically zero. Both LoRA factors are stored row-major as r x n
/// ("a" holds A, "bt" holds B transposed) so rows are the contiguous unit.
struct TeacherParams {
  ModelConfig cfg;
  Matrix w_in;   // n x d
  Matrix w_out;  // 1 x n
  Matrix a;      // r x n
  Matrix bt;     // r x n, = B^T
};

struct Dataset {
  Matrix inputs;  // count x d
  std::vector<double> targets;
  int size() const { return inputs.rows; }
};

struct StudentState {
  ModelConfig cfg;
  gamma::InitScheme scheme = gamma::InitScheme::A;
  std::uint64_t seed = 0;
  Matrix w_in;   // n x d, frozen
  Matrix w_h;    // n x n, frozen; empty when initialized without materialization
  Matrix w_out;  // 1 x n, frozen
  Matrix a;      // r x n, trainable
  Matrix bt;     // r x n, trainable (B is logically n x r; stored transposed)

  bool w_h_materialized() const { return !w_h.empty(); }
};

/// Per-sample caches for one forward pass over a batch. phi is ReLU.
///   h = W_in x, u = phi(h), za = A u, zb = s * B za, g = W_h u,
///   yh = (h + g) + zb, v = phi(yh), y = W_out v.
struct ForwardTrace {
  Matrix h;    // batch x n
  Matrix u;    // batch x n
  Matrix za;   // batch x r
  Matrix zb;   // batch x n
  Matrix g;    // batch x n
  Matrix yh;   // batch x n
  Matrix v;    // batch x n
  std::vector<double> y;  // batch
};

struct Grads {
  Matrix da;   // r x n
  Matrix dbt;  // r x n (gradient of B, stored transposed like bt)
  Matrix dyh;  // batch x n, upstream gradient at the LoRA layer output
};

TeacherParams init_teacher(const ModelConfig& cfg, std::uint64_t seed);

std::vector<double> teacher_predict(const TeacherParams& teacher, const Matrix& inputs);

/// Inputs ~ N(0, I_d); targets are exact teacher outputs (noiseless).
Dataset gen_dataset(const TeacherParams& teacher, int count, std::uint64_t seed);

/// Frozen weights use fan-in variances (W_in: 1/d, W_h and W_out: 1/n).
/// Init[A]: A ~ N(0, 1/n), B = 0. Init[B]: B ~ N(0, 1/r), A = 0.
/// With materialize_w_h = false the n x n frozen matrix is not stored;
/// its rows can be regenerated bit-identically via w_h_row_fill.
StudentState init_student(const ModelConfig& cfg, gamma::InitScheme scheme, std::uint64_t seed,
                          bool materialize_w_h = true);

/// Regenerates row `row` of the student's W_h for (seed, n). Identical to
/// the materialized matrix row.
void w_h_row_fill(std::uint64_t seed, int n, int row, double* out);

ForwardTrace forward(const StudentState& student, const Matrix& inputs);

double mse_loss(std::span<const double> predictions, std::span<const double> targets);

Grads backward(const StudentState& student, const ForwardTrace& trace,
               std::span<const double> targets);

/// Mean over the dataset of ||Z_A|| and ||Z_B|| (Euclidean, per sample).
std::pair<double, double> feature_norms(const StudentState& student, const Dataset& data);

/// Debug/golden-test snapshot: flat little-endian float64 blob plus a JSON
/// sidecar listing tensor names and shapes. B is written in its logical
/// n x r orientation.
void save_snapshot(const StudentState& student, const std::string& path_prefix);

}  // namespace loralab::model

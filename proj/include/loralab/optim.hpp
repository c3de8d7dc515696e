#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "loralab/model.hpp"

namespace loralab::optim {

enum class Kind { adamw, signsgd, sgd };

const char* kind_name(Kind k);
Kind parse_kind(std::string_view text);

struct OptimizerConfig {
  Kind kind = Kind::adamw;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  double weight_decay = 0.0;
  void validate() const;
};

/// Moment accumulators for the two trainable tensors plus the step counter.
/// signsgd/sgd keep only the counter.
struct OptimizerState {
  std::vector<double> m_a, v_a, m_b, v_b;
  long step = 0;

  static OptimizerState for_student(const model::StudentState& student, const OptimizerConfig&);
};

/// One update of A and B. adamw: decoupled weight decay, then bias-corrected
/// Adam. signsgd: p -= lr*sign(g). sgd: p -= lr*g.
void step(model::StudentState& student, const model::Grads& grads, OptimizerState& state,
          const OptimizerConfig& cfg);

/// Single-tensor update, for tests and probes. m/v may be empty spans for
/// signsgd/sgd. `t` is the 1-based step used for bias correction.
void step_tensor(std::span<double> p, std::span<const double> g, std::span<double> m,
                 std::span<double> v, long t, const OptimizerConfig& cfg);

/// Probe of the SignSGD gradient structure on a single sample:
/// sign(dL/dA) factors exactly as sign(S) (x) sign(Z), with S = s*B^T dYh
/// and Z the LoRA-layer input, hence g_A Z = ||Z||_1 * sign(S).
struct AssumptionProbe {
  double ga_z_inf_norm = 0.0;   // ||g_A Z||_inf
  double z_l1_norm = 0.0;       // ||Z||_1
  double rank1_residual = 0.0;  // max |sign(dA_ij) - sign(S_i) sign(Z_j)|; 0 when exact
};

/// Requires a single-sample trace (the factorization is per sample).
AssumptionProbe signsgd_gradient_structure(const model::Grads& grads,
                                           const model::ForwardTrace& trace,
                                           const model::StudentState& student);

/// For each width: fresh student (B random so the A-gradient is nonzero at
/// step 1), one backward on one synthetic sample, processed-gradient probe;
/// returns (width, mean ||g_A Z||_inf over seeds). Needs >= 2 widths.
std::vector<std::pair<int, double>> probe_assumption_scaling(std::span<const int> widths,
                                                             std::span<const std::uint64_t> seeds,
                                                             Kind kind,
                                                             const model::ModelConfig& base);

}  // namespace loralab::optim

#pragma once

#include <optional>
#include <vector>

#include "loralab/exponent.hpp"

namespace loralab::gamma {

/// Which LoRA factor starts random. InitScheme::A: A ~ N(0, Theta(1/n)),
/// B = 0 (the stock LoRA choice). InitScheme::B: B ~ N(0, Theta(1/r)), A = 0.
enum class InitScheme { A, B };

const char* scheme_name(InitScheme s);
InitScheme parse_scheme(std::string_view text);

/// Width exponents of the LoRA features at one finetuning step.
/// za = gamma[Z_A^t], b = gamma[B_t], zb = gamma[Z_B^t] = b + za.
struct GammaState {
  int step = 0;
  Exponent za;
  Exponent b;
  Exponent zb;
};

/// Exponents of the three update terms in
/// Delta Z_B = B Delta Z_A + Delta B Z_A + Delta B Delta Z_A,
/// and of their sum (dzb = max of the three).
struct DeltaExponents {
  Exponent d1;
  Exponent d2;
  Exponent d3;
  Exponent dzb;
};

struct RegimeReport {
  bool output_stable = false;       // gamma[Z_B^t] <= 0 at every step
  bool feature_learning = false;    // gamma[Delta Z_B^t] == 0 for all t > 1
  bool efficient = false;           // d1 == 0 and d2 == 0 for all t > 1
  bool internal_instability = false;  // gamma[Z_A^t] > 0 at some step
  bool limit_b_frozen = false;      // d2 < 0 while d1 == 0: B untrained in the limit
};

GammaState init_state(InitScheme scheme);

/// One step of the exponent recursion:
/// za' = max(za, lr + 1), b' = max(b, lr).
GammaState step_dynamics(const GammaState& state, const Exponent& lr_exp);

/// Update-term exponents for the step following `prev`. Requires
/// prev.step >= 1: at step 1 the generic formulas do not hold (one of the
/// processed gradients is still exactly zero).
DeltaExponents delta_exponents(const GammaState& prev, const Exponent& lr_exp);

/// Full trajectory for reporting: states at t = 0..t_max, with the update
/// exponents attached from t = 2 on.
struct TrajectoryStep {
  GammaState state;
  std::optional<DeltaExponents> deltas;  // engaged for state.step >= 2
};
std::vector<TrajectoryStep> trajectory(InitScheme scheme, const Exponent& lr_exp, int t_max);

/// Runs the recursion to t_max (>= 2) and classifies the regime.
RegimeReport classify_regime(InitScheme scheme, const Exponent& lr_exp, int t_max);

}  // namespace loralab::gamma

#include "loralab/gamma.hpp"

#include <charconv>
#include <numeric>

namespace loralab::gamma {

Rational::Rational(std::int64_t num, std::int64_t den) : num_(num), den_(den) {
  if (den_ == 0) throw std::invalid_argument("Rational: zero denominator");
  if (den_ < 0) {
    num_ = -num_;
    den_ = -den_;
  }
  const std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
  if (g > 1) {
    num_ /= g;
    den_ /= g;
  }
}

std::string Rational::str() const {
  std::string s = std::to_string(num_);
  if (den_ != 1) {
    s += '/';
    s += std::to_string(den_);
  }
  return s;
}

Rational operator+(const Rational& a, const Rational& b) {
  return {a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_};
}

Rational operator-(const Rational& a, const Rational& b) {
  return {a.num_ * b.den_ - b.num_ * a.den_, a.den_ * b.den_};
}

Rational operator-(const Rational& a) { return {-a.num_, a.den_}; }

bool operator<(const Rational& a, const Rational& b) {
  return a.num_ * b.den_ < b.num_ * a.den_;
}

Exponent exp_add(const Exponent& a, const Exponent& b) {
  if (a.is_neg_inf()) return b;
  if (b.is_neg_inf()) return a;
  return a.value() < b.value() ? b : a;
}

Exponent exp_mul(const Exponent& a, const Exponent& b) {
  if (a.is_neg_inf() || b.is_neg_inf()) return Exponent::neg_inf();
  return Exponent{a.value() + b.value()};
}

Exponent parse_exponent(std::string_view text) {
  if (text == "-inf") return Exponent::neg_inf();
  auto parse_int = [](std::string_view s) -> std::int64_t {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw std::invalid_argument("exponent: expected integer, \"p/q\", or \"-inf\"");
    return v;
  };
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return Exponent{Rational{parse_int(text)}};
  const std::int64_t num = parse_int(text.substr(0, slash));
  const std::int64_t den = parse_int(text.substr(slash + 1));
  if (den == 0) throw std::invalid_argument("exponent: zero denominator");
  return Exponent{Rational{num, den}};
}

std::string to_string(const Exponent& e) {
  return e.is_neg_inf() ? "-inf" : e.value().str();
}

const char* scheme_name(InitScheme s) { return s == InitScheme::A ? "A" : "B"; }

InitScheme parse_scheme(std::string_view text) {
  if (text == "A" || text == "a") return InitScheme::A;
  if (text == "B" || text == "b") return InitScheme::B;
  throw std::invalid_argument("scheme: expected A or B");
}

namespace {

GammaState with_product(int step, Exponent za, Exponent b) {
  GammaState s;
  s.step = step;
  s.za = za;
  s.b = b;
  s.zb = exp_mul(b, za);
  return s;
}

}  // namespace

GammaState init_state(InitScheme scheme) {
  // Init[A]: gamma[A_0 Z] = 0, gamma[B_0] = -inf; Init[B] is the mirror.
  if (scheme == InitScheme::A) return with_product(0, Exponent{0}, Exponent::neg_inf());
  return with_product(0, Exponent::neg_inf(), Exponent{0});
}

GammaState step_dynamics(const GammaState& state, const Exponent& lr_exp) {
  const Exponent update_za = exp_mul(lr_exp, Exponent{1});  // gamma[eta g_A Z] = gamma[eta] + 1
  return with_product(state.step + 1, exp_add(state.za, update_za), exp_add(state.b, lr_exp));
}

DeltaExponents delta_exponents(const GammaState& prev, const Exponent& lr_exp) {
  if (prev.step < 1)
    throw std::invalid_argument(
        "delta_exponents: update-term exponents are defined from step 2 on (prev.step >= 1)");
  const Exponent dza = exp_mul(lr_exp, Exponent{1});  // gamma[Delta Z_A] = gamma[eta] + 1
  DeltaExponents d;
  d.d1 = exp_mul(prev.b, dza);
  d.d2 = exp_mul(lr_exp, prev.za);
  d.d3 = exp_mul(lr_exp, dza);
  d.dzb = exp_add(exp_add(d.d1, d.d2), d.d3);
  return d;
}

std::vector<TrajectoryStep> trajectory(InitScheme scheme, const Exponent& lr_exp, int t_max) {
  if (t_max < 2) throw std::invalid_argument("trajectory: t_max must be >= 2");
  std::vector<TrajectoryStep> out;
  out.reserve(static_cast<std::size_t>(t_max) + 1);
  GammaState state = init_state(scheme);
  out.push_back({state, std::nullopt});
  for (int t = 1; t <= t_max; ++t) {
    std::optional<DeltaExponents> deltas;
    if (state.step >= 1) deltas = delta_exponents(state, lr_exp);
    state = step_dynamics(state, lr_exp);
    out.push_back({state, deltas});
  }
  return out;
}

RegimeReport classify_regime(InitScheme scheme, const Exponent& lr_exp, int t_max) {
  const auto steps = trajectory(scheme, lr_exp, t_max);
  const Exponent zero{0};

  RegimeReport report;
  report.output_stable = true;
  report.feature_learning = true;
  report.efficient = true;
  bool saw_delta = false;
  for (const auto& row : steps) {
    if (row.state.zb > zero) report.output_stable = false;
    if (row.state.za > zero) report.internal_instability = true;
    if (row.deltas) {
      saw_delta = true;
      if (!(row.deltas->dzb == zero)) report.feature_learning = false;
      if (!(row.deltas->d1 == zero && row.deltas->d2 == zero)) report.efficient = false;
      if (row.deltas->d2 < zero && row.deltas->d1 == zero) report.limit_b_frozen = true;
    }
  }
  if (!saw_delta) {
    report.feature_learning = false;
    report.efficient = false;
  }
  return report;
}

}  // namespace loralab::gamma

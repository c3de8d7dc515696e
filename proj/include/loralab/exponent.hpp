#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace loralab::gamma {

/// Exact rational arithmetic for width exponents. The calculus only ever
/// sees small values (theorem boundaries sit at quarters), so int64
/// numerator/denominator is plenty.
class Rational {
 public:
  constexpr Rational() = default;
  constexpr Rational(std::int64_t value) : num_(value) {}  // NOLINT: implicit by design
  Rational(std::int64_t num, std::int64_t den);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  std::string str() const;

  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a, const Rational& b);
  friend Rational operator-(const Rational& a);
  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend bool operator<(const Rational& a, const Rational& b);
  friend bool operator<=(const Rational& a, const Rational& b) { return a == b || a < b; }
  friend bool operator>(const Rational& a, const Rational& b) { return b < a; }
  friend bool operator>=(const Rational& a, const Rational& b) { return b <= a; }

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;  // always > 0, gcd(|num|, den) == 1
};

/// gamma[v] for a width-indexed quantity v = Theta(n^gamma[v]).
/// The bottom element stands for v == 0 and behaves as -infinity:
/// identity under exp_add, absorbing under exp_mul.
class Exponent {
 public:
  constexpr Exponent() : bottom_(true) {}
  Exponent(Rational value) : bottom_(false), value_(value) {}  // NOLINT: implicit by design
  Exponent(std::int64_t num, std::int64_t den) : bottom_(false), value_(num, den) {}

  static constexpr Exponent neg_inf() { return Exponent{}; }

  bool is_neg_inf() const { return bottom_; }
  const Rational& value() const {
    if (bottom_) throw std::logic_error("Exponent: value() on -inf");
    return value_;
  }

  friend bool operator==(const Exponent& a, const Exponent& b) {
    if (a.bottom_ || b.bottom_) return a.bottom_ == b.bottom_;
    return a.value_ == b.value_;
  }
  friend bool operator<(const Exponent& a, const Exponent& b) {
    if (a.bottom_) return !b.bottom_;
    if (b.bottom_) return false;
    return a.value_ < b.value_;
  }
  friend bool operator<=(const Exponent& a, const Exponent& b) { return a == b || a < b; }
  friend bool operator>(const Exponent& a, const Exponent& b) { return b < a; }
  friend bool operator>=(const Exponent& a, const Exponent& b) { return b <= a; }

 private:
  bool bottom_ = true;
  Rational value_;
};

/// gamma[v + v'] = max(gamma[v], gamma[v']).
Exponent exp_add(const Exponent& a, const Exponent& b);

/// gamma[v * v'] = gamma[v] + gamma[v'].
Exponent exp_mul(const Exponent& a, const Exponent& b);

/// Accepts "p", "p/q", or "-inf". Throws std::invalid_argument otherwise.
Exponent parse_exponent(std::string_view text);

/// "-1/2", "3", or "-inf".
std::string to_string(const Exponent& e);

}  // namespace loralab::gamma

#pragma once

// Exact-arithmetic evaluation of the discrete E-Post / E-Lik formulas used
// to demonstrate their inequality on finite probability tables.

#include "twostep/istep.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace twostep {

struct Rational {
  long long num = 0;
  long long den = 1;

  Rational() = default;
  Rational(long long n, long long d);
  static Rational from_int(long long n) { return Rational(n, 1); }

  Rational operator+(const Rational& o) const;
  Rational operator-(const Rational& o) const;
  Rational operator*(const Rational& o) const;
  Rational operator/(const Rational& o) const;
  bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
  bool operator!=(const Rational& o) const { return !(*this == o); }

  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
  std::string str() const;
};

struct DiscreteTables {
  std::vector<Rational> p_omega;
  std::vector<Rational> p_theta;
  // p_y_given[y][omega][theta]
  std::vector<std::vector<std::vector<Rational>>> p_y_given;

  void validate() const;  // all three pmfs must normalize exactly
};

// Exact posterior P(omega | y_obs) per entry of omega's support, under the
// chosen propagation rule (EPost or ELik only).
std::vector<Rational> discrete_posterior(const DiscreteTables& tables, UpMethod::Kind method,
                                         int y_obs);

// The counterexample tables: binary omega, theta, y.
DiscreteTables counterexample_tables();

}  // namespace twostep

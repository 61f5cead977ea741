#include "twostep/discrete.hpp"

#include <numeric>
#include <stdexcept>

namespace twostep {

Rational::Rational(long long n, long long d) {
  if (d == 0) throw std::invalid_argument("Rational: zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  const long long g = std::gcd(n < 0 ? -n : n, d);
  num = g ? n / g : n;
  den = g ? d / g : d;
}

Rational Rational::operator+(const Rational& o) const {
  return Rational(num * o.den + o.num * den, den * o.den);
}

Rational Rational::operator-(const Rational& o) const {
  return Rational(num * o.den - o.num * den, den * o.den);
}

Rational Rational::operator*(const Rational& o) const { return Rational(num * o.num, den * o.den); }

Rational Rational::operator/(const Rational& o) const {
  if (o.num == 0) throw std::invalid_argument("Rational: division by zero");
  return Rational(num * o.den, den * o.num);
}

std::string Rational::str() const {
  if (den == 1) return std::to_string(num);
  return std::to_string(num) + "/" + std::to_string(den);
}

void DiscreteTables::validate() const {
  const Rational one = Rational::from_int(1);
  auto check_pmf = [&one](const std::vector<Rational>& pmf, const char* what) {
    if (pmf.empty()) throw std::invalid_argument(std::string(what) + ": empty pmf");
    Rational sum;
    for (const auto& p : pmf) {
      if (p.num < 0) throw std::invalid_argument(std::string(what) + ": negative probability");
      sum = sum + p;
    }
    if (sum != one) throw std::invalid_argument(std::string(what) + ": pmf does not sum to 1");
  };
  check_pmf(p_omega, "p(omega)");
  check_pmf(p_theta, "p(theta)");
  if (p_y_given.empty()) throw std::invalid_argument("p(y|omega,theta): empty table");
  for (std::size_t w = 0; w < p_omega.size(); ++w) {
    for (std::size_t t = 0; t < p_theta.size(); ++t) {
      Rational sum;
      for (const auto& slice : p_y_given) {
        if (slice.size() != p_omega.size() || slice[w].size() != p_theta.size())
          throw std::invalid_argument("p(y|omega,theta): ragged table");
        sum = sum + slice[w][t];
      }
      if (sum != one)
        throw std::invalid_argument("p(y|omega,theta): conditional pmf does not sum to 1");
    }
  }
}

std::vector<Rational> discrete_posterior(const DiscreteTables& tables, UpMethod::Kind method,
                                         int y_obs) {
  tables.validate();
  if (y_obs < 0 || static_cast<std::size_t>(y_obs) >= tables.p_y_given.size())
    throw std::invalid_argument("discrete_posterior: y_obs outside table");
  const auto& lik = tables.p_y_given[static_cast<std::size_t>(y_obs)];
  const std::size_t n_omega = tables.p_omega.size();
  const std::size_t n_theta = tables.p_theta.size();
  std::vector<Rational> post(n_omega);

  if (method == UpMethod::Kind::ELik) {
    // p(w|y) = p(w) sum_t p(y|w,t)p(t) / sum_{w',t} p(y|w',t)p(w')p(t)
    Rational norm;
    for (std::size_t w = 0; w < n_omega; ++w)
      for (std::size_t t = 0; t < n_theta; ++t)
        norm = norm + lik[w][t] * tables.p_omega[w] * tables.p_theta[t];
    for (std::size_t w = 0; w < n_omega; ++w) {
      Rational mix;
      for (std::size_t t = 0; t < n_theta; ++t) mix = mix + lik[w][t] * tables.p_theta[t];
      post[w] = tables.p_omega[w] * mix / norm;
    }
    return post;
  }

  if (method == UpMethod::Kind::EPost) {
    // p(w|y) = sum_t p(t) * [ p(w)p(y|w,t) / sum_{w'} p(y|w',t)p(w') ]
    for (std::size_t t = 0; t < n_theta; ++t) {
      Rational norm;
      for (std::size_t w = 0; w < n_omega; ++w) norm = norm + lik[w][t] * tables.p_omega[w];
      for (std::size_t w = 0; w < n_omega; ++w)
        post[w] = post[w] + tables.p_theta[t] * tables.p_omega[w] * lik[w][t] / norm;
    }
    return post;
  }

  throw std::invalid_argument("discrete_posterior: only EPost and ELik are defined");
}

DiscreteTables counterexample_tables() {
  DiscreteTables t;
  const Rational half(1, 2), quarter(1, 4), three_quarters(3, 4);
  t.p_omega = {half, half};
  t.p_theta = {half, half};
  // p(y | omega, theta): y=0 slice then y=1 slice, indexed [omega][theta].
  t.p_y_given = {
      {{quarter, half}, {half, half}},
      {{three_quarters, half}, {half, half}},
  };
  return t;
}

}  // namespace twostep

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "twostep/prob.hpp"
#include "twostep/quadrature.hpp"

#include <cmath>
#include <vector>

using namespace twostep;

namespace {

struct MomentStats {
  double mean, var, se_mean, se_var;
};

MomentStats sample_moments(const DistSpec& spec, long n, Rng& rng) {
  std::vector<double> xs(static_cast<std::size_t>(n));
  for (auto& x : xs) x = draw(spec, rng);
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = x - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m4 /= n;
  MomentStats s;
  s.mean = mean;
  s.var = m2;
  s.se_mean = std::sqrt(m2 / n);
  s.se_var = std::sqrt(std::max(0.0, m4 - m2 * m2) / n);
  return s;
}

}  // namespace

TEST_CASE("normal log density at the mode") {
  const DistSpec d = DistSpec::normal(0.0, 1.0);
  CHECK(log_density(d, 0.0) == doctest::Approx(-0.5 * std::log(2.0 * M_PI)).epsilon(1e-12));
  CHECK(log_density(d, 0.0) == doctest::Approx(-0.91894).epsilon(1e-4));
}

TEST_CASE("invalid parameters fail at construction") {
  CHECK_THROWS(DistSpec::normal(0.0, 0.0));
  CHECK_THROWS(DistSpec::normal(0.0, -1.0));
  CHECK_THROWS(DistSpec::uniform(1.0, 1.0));
  CHECK_THROWS(DistSpec::truncated_normal(2.0, -2.0, 0.0, 1.0));
  CHECK_THROWS(DistSpec::neg_binomial(-3.0, 9.6));
  Matrix bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;  // indefinite
  CHECK_THROWS(DistSpec::mvnormal(Vector::Zero(2), bad));
}

TEST_CASE("out-of-support evaluation returns -inf, not an error") {
  CHECK(log_density(DistSpec::uniform(0.0, 1.0), 2.0) == -INFINITY);
  CHECK(log_density(DistSpec::log_normal(0.0, 1.0), -1.0) == -INFINITY);
  CHECK(log_density(DistSpec::truncated_normal(-1.0, 1.0, 0.0, 0.5), 1.5) == -INFINITY);
  CHECK(log_density(DistSpec::neg_binomial(3.0, 9.6), 2.5) == -INFINITY);
  CHECK(log_density(DistSpec::neg_binomial(3.0, 9.6), -1.0) == -INFINITY);
  CHECK(log_density(DistSpec::half_normal(0.0, 1.0), -0.1) == -INFINITY);
}

TEST_CASE("negative binomial pmf sums to one (direct summation)") {
  const DistSpec d = DistSpec::neg_binomial(3.0, 9.6);
  double total = 0.0;
  for (int n = 0; n <= 200; ++n) total += std::exp(log_density(d, static_cast<double>(n)));
  CHECK(total >= 1.0 - 1e-8);
  CHECK(total <= 1.0 + 1e-12);
}

TEST_CASE("negative binomial moments match mu and mu + mu^2/phi") {
  Rng rng(42, 0);
  const double mu = 3.0, phi = 9.6;
  const DistSpec d = DistSpec::neg_binomial(mu, phi);
  const MomentStats s = sample_moments(d, 1000000, rng);
  CHECK(std::abs(s.mean - mu) < 3.0 * s.se_mean);
  CHECK(std::abs(s.var - (mu + mu * mu / phi)) < 3.0 * s.se_var);
}

TEST_CASE("log-normal moments match exp(mu + sigma^2/2)") {
  Rng rng(7, 3);
  const DistSpec d = DistSpec::log_normal(0.0, 0.5);
  const MomentStats s = sample_moments(d, 1000000, rng);
  CHECK(std::abs(s.mean - std::exp(0.125)) < 3.0 * s.se_mean);
  const double true_var = (std::exp(0.25) - 1.0) * std::exp(0.25);
  CHECK(std::abs(s.var - true_var) < 3.0 * s.se_var);
}

TEST_CASE("draws stay in support") {
  Rng rng(1, 0);
  const DistSpec u = DistSpec::uniform(0.0, 0.05);
  for (int i = 0; i < 10000; ++i) {
    const double x = draw(u, rng);
    CHECK(x >= 0.0);
    CHECK(x <= 0.05);
  }
  const DistSpec t = DistSpec::truncated_normal(-1.0, 1.0, 0.0, 0.5);
  double mean = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double x = draw(t, rng);
    CHECK(x >= -1.0);
    CHECK(x <= 1.0);
    mean += x;
  }
  CHECK(std::abs(mean / n) < 0.01);
}

TEST_CASE("identical (seed, stream) gives identical sequences") {
  const DistSpec d = DistSpec::normal(2.0, 0.5);
  Rng a(123, 5), b(123, 5), c(123, 6);
  bool any_differ = false;
  for (int i = 0; i < 100; ++i) {
    const double xa = draw(d, a), xb = draw(d, b), xc = draw(d, c);
    CHECK(xa == xb);
    if (xa != xc) any_differ = true;
  }
  CHECK(any_differ);
}

TEST_CASE("fork gives reproducible independent streams") {
  Rng root(9, 0);
  Rng a = root.fork(1), b = root.fork(1), c = root.fork(2);
  CHECK(a.next_u64() == b.next_u64());
  CHECK(a.next_u64() != c.next_u64());
}

TEST_CASE("log_sum_exp exact small cases") {
  Vector one(1);
  one << std::log(3.0);
  CHECK(log_sum_exp(one) == std::log(3.0));

  Vector two(2);
  two << std::log(2.0), std::log(5.0);
  CHECK(log_sum_exp(two) == doctest::Approx(std::log(7.0)).epsilon(1e-15));

  Vector big(2);
  big << 1000.0, 1000.0;
  Vector w(2);
  w << 0.5, 0.5;
  CHECK(log_sum_exp(big, w) == 1000.0);
}

TEST_CASE("log_sum_exp edge cases") {
  Vector empty(0);
  CHECK_THROWS(log_sum_exp(empty));
  Vector ninf(3);
  ninf.setConstant(-INFINITY);
  CHECK(log_sum_exp(ninf) == -INFINITY);
  Vector vals(2);
  vals << 0.0, 1.0;
  Vector zero_w(2);
  zero_w << 0.0, 0.0;
  CHECK_THROWS(log_sum_exp(vals, zero_w));
}

TEST_CASE("log_sum_exp shift invariance property") {
  Rng rng(11, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 1 + static_cast<int>(rng.uniform01() * 20);
    Vector v(n), w(n);
    for (int i = 0; i < n; ++i) {
      v[i] = 200.0 * (rng.uniform01() - 0.5);
      w[i] = rng.uniform01() + 1e-3;
    }
    const double c = 500.0 * (rng.uniform01() - 0.5);
    CHECK(log_sum_exp((v.array() + c).matrix(), w) ==
          doctest::Approx(log_sum_exp(v, w) + c).epsilon(1e-12));
  }
}

TEST_CASE("densities normalize over their support") {
  auto grid_integral = [](const DistSpec& d, double lo, double hi, int n) {
    double acc = 0.0;
    const double h = (hi - lo) / n;
    for (int i = 0; i < n; ++i) {
      const double x = lo + (i + 0.5) * h;
      acc += std::exp(log_density(d, x)) * h;
    }
    return acc;
  };
  CHECK(grid_integral(DistSpec::normal(1.0, 2.0), -20.0, 22.0, 400000) ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK(grid_integral(DistSpec::uniform(-2.0, 3.0), -2.0, 3.0, 1000) ==
        doctest::Approx(1.0).epsilon(1e-9));
  CHECK(grid_integral(DistSpec::truncated_normal(-1.0, 1.0, 0.2, 0.5), -1.0, 1.0, 200000) ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK(grid_integral(DistSpec::half_normal(0.0, 1.5), 0.0, 20.0, 400000) ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK(grid_integral(DistSpec::log_normal(0.0, 0.5), 1e-9, 30.0, 600000) ==
        doctest::Approx(1.0).epsilon(1e-6));
  double nb = 0.0;
  const DistSpec d = DistSpec::neg_binomial(5.0, 2.0);
  for (int k = 0; k <= 2000; ++k) nb += std::exp(log_density(d, static_cast<double>(k)));
  CHECK(nb == doctest::Approx(1.0).epsilon(1e-9));

  // 2-d MVN by tensor midpoint rule.
  Matrix cov(2, 2);
  cov << 1.0, 0.3, 0.3, 0.5;
  const DistSpec mvn = DistSpec::mvnormal(Vector::Zero(2), cov);
  double acc = 0.0;
  const int n = 600;
  const double lo = -8.0, hi = 8.0, h = (hi - lo) / n;
  Vector x(2);
  for (int i = 0; i < n; ++i) {
    x[0] = lo + (i + 0.5) * h;
    for (int j = 0; j < n; ++j) {
      x[1] = lo + (j + 0.5) * h;
      acc += std::exp(log_density(mvn, x)) * h * h;
    }
  }
  CHECK(acc == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("mvnormal density and draws agree with moments") {
  Matrix cov(2, 2);
  cov << 0.5, -0.2, -0.2, 0.8;
  Vector mean(2);
  mean << 1.0, -2.0;
  const DistSpec mvn = DistSpec::mvnormal(mean, cov);
  Rng rng(21, 0);
  Vector acc = Vector::Zero(2);
  Matrix acc2 = Matrix::Zero(2, 2);
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const Vector x = draw_vector(mvn, rng);
    acc += x;
    acc2 += x * x.transpose();
  }
  const Vector m = acc / n;
  const Matrix c = acc2 / n - m * m.transpose();
  CHECK((m - mean).cwiseAbs().maxCoeff() < 0.01);
  CHECK((c - cov).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("inverse normal cdf round trip") {
  for (double p : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.7, 0.99, 1.0 - 1e-9}) {
    CHECK(normal_cdf(inverse_normal_cdf(p)) == doctest::Approx(p).epsilon(1e-9));
  }
  CHECK(inverse_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("gauss rules integrate polynomials exactly") {
  const QuadRule gl = gauss_legendre(8);
  double acc = 0.0;
  for (int i = 0; i < 8; ++i) acc += gl.weights[i] * std::pow(gl.nodes[i], 6);
  CHECK(acc == doctest::Approx(2.0 / 7.0).epsilon(1e-12));

  const QuadRule gh = gauss_hermite(16);
  double m2 = 0.0;
  for (int i = 0; i < 16; ++i) m2 += gh.weights[i] * gh.nodes[i] * gh.nodes[i];
  CHECK(m2 == doctest::Approx(0.5 * std::sqrt(M_PI)).epsilon(1e-12));
}

TEST_CASE("adaptive simpson integrates a gaussian") {
  const double z = integrate_adaptive(
      [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }, -10.0, 10.0,
      1e-12);
  CHECK(z == doctest::Approx(1.0).epsilon(1e-10));
}

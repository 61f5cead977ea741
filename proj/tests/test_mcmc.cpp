#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "twostep/mcmc.hpp"

#include <cmath>

using namespace twostep;

namespace {

TargetDensity standard_normal_target(int dim) {
  TargetDensity t;
  t.dim = dim;
  t.log_prob = [](const Vector& x) { return -0.5 * x.squaredNorm(); };
  return t;
}

}  // namespace

TEST_CASE("samples a standard normal") {
  McmcConfig config;
  config.n_chains = 4;
  config.n_warmup = 1000;
  config.n_post = 2000;
  const Chains chains = sample(standard_normal_target(1), config, Rng(1, 0));
  const Matrix flat = chains.flat();
  const double mean = flat.col(0).mean();
  const double var = (flat.col(0).array() - mean).square().sum() / (flat.rows() - 1);
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.1);
  for (int c = 0; c < 4; ++c) {
    CHECK(chains.acceptance_rate[c] > 0.1);
    CHECK(chains.acceptance_rate[c] < 0.6);
  }
}

TEST_CASE("matches the analytic linear Point posterior moments within 2%") {
  // Normal(mu, sigma) with the Table-2 Point I-posterior values.
  const double mu = -0.4988, sigma = 0.04997;
  TargetDensity t;
  t.dim = 1;
  t.log_prob = [mu, sigma](const Vector& x) {
    const double z = (x[0] - mu) / sigma;
    return -0.5 * z * z;
  };
  McmcConfig config;
  config.n_chains = 4;
  config.n_warmup = 1000;
  config.n_post = 10000;
  const Chains chains = sample(t, config, Rng(2, 0));
  const Matrix flat = chains.flat();
  const double mean = flat.col(0).mean();
  const double sd = std::sqrt((flat.col(0).array() - mean).square().sum() / (flat.rows() - 1));
  CHECK(std::abs(mean - mu) < 0.02 * std::abs(mu));
  CHECK(std::abs(sd - sigma) < 0.02 * sigma);
}

TEST_CASE("fixed seed gives bit-identical chains") {
  McmcConfig config;
  config.n_chains = 2;
  config.n_warmup = 200;
  config.n_post = 300;
  const Chains a = sample(standard_normal_target(2), config, Rng(7, 3));
  const Chains b = sample(standard_normal_target(2), config, Rng(7, 3));
  for (int c = 0; c < 2; ++c) CHECK(a.draws[c] == b.draws[c]);
  // Parallel chain execution does not change the result.
  McmcConfig par = config;
  par.jobs = 2;
  const Chains p = sample(standard_normal_target(2), par, Rng(7, 3));
  for (int c = 0; c < 2; ++c) CHECK(a.draws[c] == p.draws[c]);
}

TEST_CASE("split rhat calibration") {
  Rng rng(11, 0);
  Chains iid;
  iid.draws.resize(4);
  for (auto& d : iid.draws) {
    d.resize(1000, 1);
    for (int i = 0; i < 1000; ++i) d(i, 0) = draw_standard_normal(rng);
  }
  const RhatResult r = split_rhat(iid);
  CHECK(r.value[0] >= 0.99);
  CHECK(r.value[0] <= 1.02);

  Chains stuck;
  stuck.draws.resize(2);
  stuck.draws[0] = Matrix::Constant(100, 1, 0.0);
  stuck.draws[1] = Matrix::Constant(100, 1, 5.0);
  // Tiny within-chain jitter so the statistic is defined.
  stuck.draws[0](0, 0) = 1e-8;
  stuck.draws[1](0, 0) = 5.0 + 1e-8;
  CHECK(split_rhat(stuck).value[0] > 1.1);

  Chains constant;
  constant.draws.resize(2);
  constant.draws[0] = Matrix::Constant(100, 1, 2.0);
  constant.draws[1] = Matrix::Constant(100, 1, 2.0);
  const RhatResult rc = split_rhat(constant);
  CHECK(rc.degenerate[0]);
}

TEST_CASE("detailed balance on a 3-state indicator target") {
  // Piecewise-constant density on [0, 3): cell masses 0.2 / 0.5 / 0.3.
  const double mass[3] = {0.2, 0.5, 0.3};
  TargetDensity t;
  t.dim = 1;
  t.transforms = {Transform::interval(0.0, 3.0)};
  t.log_prob = [mass](const Vector& x) {
    const int cell = std::min(2, static_cast<int>(x[0]));
    return std::log(mass[cell]);
  };
  McmcConfig config;
  config.n_chains = 1;
  config.n_warmup = 2000;
  config.n_post = 1000000;
  Matrix init(1, 1);
  init << 1.5;
  config.init_points = init;
  const Chains chains = sample(t, config, Rng(3, 0));
  long counts[3] = {0, 0, 0};
  const Matrix flat = chains.flat();
  for (long i = 0; i < flat.rows(); ++i)
    ++counts[std::min(2, static_cast<int>(flat(i, 0)))];
  for (int c = 0; c < 3; ++c)
    CHECK(std::abs(static_cast<double>(counts[c]) / flat.rows() - mass[c]) < 0.01);
}

TEST_CASE("lower-bound transform carries the correct jacobian") {
  // Exponential(1) via a LowerBounded(0) coordinate; posterior mean is 1.
  TargetDensity t;
  t.dim = 1;
  t.transforms = {Transform::lower_bounded(0.0)};
  t.log_prob = [](const Vector& x) { return x[0] > 0.0 ? -x[0] : -INFINITY; };
  McmcConfig config;
  config.n_chains = 4;
  config.n_warmup = 1000;
  config.n_post = 25000;
  Matrix init = Matrix::Constant(4, 1, 1.0);
  config.init_points = init;
  const Chains chains = sample(t, config, Rng(5, 0));
  const double mean = chains.flat().col(0).mean();
  CHECK(std::abs(mean - 1.0) < 0.02);
}

TEST_CASE("interval transform keeps draws inside the support") {
  TargetDensity t;
  t.dim = 1;
  t.transforms = {Transform::interval(-1.0, 1.0)};
  t.log_prob = [](const Vector& x) {
    const double z = x[0] / 0.5;
    return -0.5 * z * z;
  };
  McmcConfig config;
  config.n_chains = 2;
  config.n_warmup = 500;
  config.n_post = 2000;
  const Chains chains = sample(t, config, Rng(6, 0));
  const Matrix flat = chains.flat();
  for (long i = 0; i < flat.rows(); ++i) {
    CHECK(flat(i, 0) > -1.0);
    CHECK(flat(i, 0) < 1.0);
  }
}

TEST_CASE("error handling") {
  // NaN from the density is a hard error.
  TargetDensity nan_target;
  nan_target.dim = 1;
  nan_target.log_prob = [](const Vector& x) {
    return x[0] > 0.5 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
  };
  McmcConfig config;
  config.n_chains = 1;
  config.n_warmup = 100;
  config.n_post = 100;
  CHECK_THROWS(sample(nan_target, config, Rng(8, 0)));

  // A target that is -inf everywhere cannot be initialized.
  TargetDensity dead;
  dead.dim = 1;
  dead.log_prob = [](const Vector&) { return -INFINITY; };
  CHECK_THROWS_WITH_AS(sample(dead, config, Rng(8, 0)), doctest::Contains("init"),
                       std::runtime_error);

  CHECK_THROWS(split_rhat(Chains{}));
}

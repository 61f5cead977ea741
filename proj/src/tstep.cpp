#include "twostep/tstep.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <vector>

namespace twostep {

double TPosterior::sigma_a(long s) const {
  if (!includes_sigma_a) throw std::logic_error("TPosterior: sigma_A not sampled");
  return draws(s, draws.cols() - 1);
}

TPosterior TPosterior::point_mass(const Vector& coeffs, std::optional<double> sigma_a) {
  TPosterior t;
  const int extra = sigma_a ? 1 : 0;
  t.draws.resize(1, coeffs.size() + extra);
  t.draws.row(0).head(coeffs.size()) = coeffs.transpose();
  if (sigma_a) {
    t.draws(0, coeffs.size()) = *sigma_a;
    t.includes_sigma_a = true;
  }
  return t;
}

std::uint64_t hash_doubles(const double* data, long n, std::uint64_t seed) {
  // FNV-1a over the raw bytes; used for provenance only.
  std::uint64_t h = seed;
  for (long i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &data[i], sizeof(bits));
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffULL;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::uint64_t dataset_hash(const TrainingDataset& data) {
  std::uint64_t h = hash_doubles(data.inputs.data(), data.inputs.size());
  h = hash_doubles(data.noise_hypers.data(), data.noise_hypers.size(), h);
  return hash_doubles(data.outputs.data(), data.outputs.size(), h);
}

namespace {

Matrix exact_gaussian_draws(const AnalyticGaussian& g, long n_draws, Rng& rng) {
  Eigen::LLT<Matrix> llt(g.cov);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("exact_gaussian_draws: covariance not positive-definite");
  const Matrix L = llt.matrixL();
  Matrix draws(n_draws, g.mean.size());
  Vector z(g.mean.size());
  for (long s = 0; s < n_draws; ++s) {
    for (int i = 0; i < z.size(); ++i) z[i] = draw_standard_normal(rng);
    draws.row(s) = (g.mean + L * z).transpose();
  }
  return draws;
}

}  // namespace

TPosterior train_conjugate_linear(const TrainingDataset& data, const GaussianPrior& prior,
                                  double sigma_a, long n_draws, Rng* rng) {
  if (!(sigma_a > 0.0)) throw std::invalid_argument("train_conjugate_linear: sigma_a > 0 required");
  if (prior.mean.size() != 2 || prior.cov.rows() != 2 || prior.cov.cols() != 2)
    throw std::invalid_argument("train_conjugate_linear: prior must be 2-dimensional");
  if (data.inputs.cols() != 1)
    throw std::invalid_argument("train_conjugate_linear: univariate inputs required");

  const long n = data.size();
  Eigen::LLT<Matrix> prior_llt(prior.cov);
  if (prior_llt.info() != Eigen::Success)
    throw std::invalid_argument("train_conjugate_linear: prior covariance not positive-definite");

  // Accumulate the sufficient statistics in a canonical (sorted) row order so
  // the posterior is bit-identical under training-row permutations.
  std::vector<long> order(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](long a, long b) {
    if (data.inputs(a, 0) != data.inputs(b, 0)) return data.inputs(a, 0) < data.inputs(b, 0);
    return data.outputs[a] < data.outputs[b];
  });
  Matrix xtx = Matrix::Zero(2, 2);
  Vector xty = Vector::Zero(2);
  for (long idx : order) {
    const double w = data.inputs(idx, 0);
    const double y = data.outputs[idx];
    xtx(0, 0) += 1.0;
    xtx(0, 1) += w;
    xtx(1, 1) += w * w;
    xty[0] += y;
    xty[1] += w * y;
  }
  xtx(1, 0) = xtx(0, 1);

  const double lik_precision = 1.0 / (sigma_a * sigma_a);
  const Matrix precision = prior_llt.solve(Matrix::Identity(2, 2)) + lik_precision * xtx;
  Eigen::LLT<Matrix> post_llt(precision);
  if (post_llt.info() != Eigen::Success)
    throw std::runtime_error("train_conjugate_linear: singular posterior precision");

  AnalyticGaussian post;
  post.cov = post_llt.solve(Matrix::Identity(2, 2));
  post.mean = post_llt.solve(prior_llt.solve(prior.mean) + lik_precision * xty);

  TPosterior t;
  t.analytic = post;
  t.dataset_hash = dataset_hash(data);
  if (n_draws > 0) {
    if (!rng) throw std::invalid_argument("train_conjugate_linear: rng required for draws");
    t.seed = rng->seed();
    t.draws = exact_gaussian_draws(post, n_draws, *rng);
  } else {
    t.draws.resize(1, 2);
    t.draws.row(0) = post.mean.transpose();
  }
  return t;
}

TPosterior train_conjugate_slope(const TrainingDataset& data, double prior_mean,
                                 double prior_sd, double sigma_a, long n_draws, Rng* rng) {
  if (!(sigma_a > 0.0) || !(prior_sd > 0.0))
    throw std::invalid_argument("train_conjugate_slope: scales must be > 0");
  if (data.inputs.cols() != 1)
    throw std::invalid_argument("train_conjugate_slope: univariate inputs required");

  std::vector<long> order(static_cast<std::size_t>(data.size()));
  for (long i = 0; i < data.size(); ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](long a, long b) {
    if (data.inputs(a, 0) != data.inputs(b, 0)) return data.inputs(a, 0) < data.inputs(b, 0);
    return data.outputs[a] < data.outputs[b];
  });
  double precision = 1.0 / (prior_sd * prior_sd);
  double weighted = precision * prior_mean;
  const double lik_precision = 1.0 / (sigma_a * sigma_a);
  for (long idx : order) {
    const double w = data.inputs(idx, 0);
    precision += lik_precision * w * w;
    weighted += lik_precision * w * data.outputs[idx];
  }

  AnalyticGaussian post;
  post.mean = Vector::Constant(1, weighted / precision);
  post.cov = Matrix::Constant(1, 1, 1.0 / precision);

  TPosterior t;
  t.analytic = post;
  t.dataset_hash = dataset_hash(data);
  if (n_draws > 0) {
    if (!rng) throw std::invalid_argument("train_conjugate_slope: rng required for draws");
    t.seed = rng->seed();
    t.draws = exact_gaussian_draws(post, n_draws, *rng);
  } else {
    t.draws = post.mean.transpose();
  }
  return t;
}

TargetDensity make_training_target(const SurrogateSpec& spec, const TrainingDataset& data) {
  if (spec.coeff_priors.size() != static_cast<std::size_t>(spec.n_coeffs()))
    throw std::invalid_argument("make_training_target: one prior per coefficient required");
  const bool sample_sigma_a = spec.sigma_a_prior.has_value();
  const bool pce = spec.kind == SurrogateKind::Pce;

  // Pre-scale PCE inputs once; other families evaluate on raw inputs.
  Matrix inputs = data.inputs;
  if (pce && !spec.input_bounds.empty()) {
    for (long i = 0; i < inputs.rows(); ++i)
      inputs.row(i) = scale_inputs(spec.input_bounds, data.inputs.row(i).transpose()).transpose();
  }

  TargetDensity target;
  target.dim = spec.n_params();
  target.transforms.assign(static_cast<std::size_t>(target.dim), Transform::unbounded());
  if (sample_sigma_a) target.transforms.back() = Transform::lower_bounded(0.0);

  const Vector outputs = data.outputs;
  const Vector noise = data.noise_hypers;
  target.log_prob = [spec, inputs, outputs, noise, sample_sigma_a](const Vector& theta) {
    const int nc = spec.n_coeffs();
    const Vector c = theta.head(nc);
    double lp = 0.0;
    for (int j = 0; j < nc; ++j) {
      lp += log_density(spec.coeff_priors[static_cast<std::size_t>(j)], c[j]);
      if (lp == -std::numeric_limits<double>::infinity()) return lp;
    }
    double sigma_a = 0.0;
    if (sample_sigma_a) {
      sigma_a = theta[nc];
      lp += log_density(*spec.sigma_a_prior, sigma_a);
      if (lp == -std::numeric_limits<double>::infinity()) return lp;
    }
    for (long i = 0; i < outputs.size(); ++i) {
      double scale;
      if (sample_sigma_a)
        scale = sigma_a;
      else if (spec.sigma_a_fixed)
        scale = *spec.sigma_a_fixed;
      else
        scale = noise[i];
      if (!(scale > 0.0)) return -std::numeric_limits<double>::infinity();
      lp += surrogate_log_likelihood(spec, c, inputs.row(i).transpose(), outputs[i], scale);
    }
    return lp;
  };
  return target;
}

TPosterior train_mcmc(const SurrogateSpec& spec, const TrainingDataset& data,
                      const TrainConfig& config, const Rng& rng) {
  TargetDensity target = make_training_target(spec, data);

  McmcConfig mcmc_config = config.mcmc;
  if (!mcmc_config.init_sampler && !mcmc_config.init_points) {
    mcmc_config.init_sampler = [spec](Rng& r) {
      Vector x(spec.n_params());
      for (int j = 0; j < spec.n_coeffs(); ++j)
        x[j] = draw(spec.coeff_priors[static_cast<std::size_t>(j)], r);
      if (spec.sigma_a_prior) x[spec.n_coeffs()] = draw(*spec.sigma_a_prior, r);
      return x;
    };
    if (mcmc_config.init_best_of <= 1) mcmc_config.init_best_of = 64;
  }

  const Chains chains = sample(target, mcmc_config, rng);
  const RhatResult rhat = split_rhat(chains);

  TPosterior t;
  t.draws = chains.flat();
  t.logprobs = chains.flat_logprob();
  t.includes_sigma_a = spec.sigma_a_prior.has_value();
  t.dataset_hash = dataset_hash(data);
  t.seed = rng.seed();
  t.rhat = rhat.value;
  t.rhat_ok = rhat.max() <= config.rhat_threshold;
  return t;
}

}  // namespace twostep

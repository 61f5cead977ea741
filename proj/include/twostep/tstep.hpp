#pragma once

// Surrogate training: exact conjugate posteriors for the linear cases and
// MCMC training for everything else. The resulting TPosterior is what the
// inference step propagates.

#include "twostep/mcmc.hpp"
#include "twostep/prob.hpp"
#include "twostep/simulators.hpp"
#include "twostep/surrogates.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace twostep {

struct AnalyticGaussian {
  Vector mean;
  Matrix cov;
};

struct GaussianPrior {
  Vector mean;
  Matrix cov;
};

struct TPosterior {
  Matrix draws;  // S x (n_coeffs [+1 for sigma_A in the last column])
  bool includes_sigma_a = false;
  std::optional<AnalyticGaussian> analytic;  // conjugate linear training only
  Vector logprobs;  // per-draw log posterior, recorded by MCMC training
  // Provenance
  std::uint64_t dataset_hash = 0;
  std::uint64_t seed = 0;
  Vector rhat;
  bool rhat_ok = true;

  long n_draws() const { return draws.rows(); }
  int n_coeffs() const { return static_cast<int>(draws.cols()) - (includes_sigma_a ? 1 : 0); }
  Vector coeffs(long s) const { return draws.row(s).head(n_coeffs()).transpose(); }
  double sigma_a(long s) const;

  static TPosterior point_mass(const Vector& coeffs, std::optional<double> sigma_a = {});
};

std::uint64_t hash_doubles(const double* data, long n, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t dataset_hash(const TrainingDataset& data);

// Exact normal posterior for the slope-intercept linear surrogate with
// fixed sigma_A; design matrix rows are (1, omega). Draws are exact samples
// when n_draws > 0.
TPosterior train_conjugate_linear(const TrainingDataset& data, const GaussianPrior& prior,
                                  double sigma_a, long n_draws = 0, Rng* rng = nullptr);

// Slope-only special case with scalar prior.
TPosterior train_conjugate_slope(const TrainingDataset& data, double prior_mean,
                                 double prior_sd, double sigma_a, long n_draws = 0,
                                 Rng* rng = nullptr);

// How the T-likelihood residual scale is chosen during MCMC training:
//  - sigma_a_prior present on the spec: sigma_A sampled as the last theta component;
//  - sigma_a_fixed present: constant scale;
//  - neither: the per-point sigma_S from the dataset is conditioned on.
struct TrainConfig {
  McmcConfig mcmc;
  double rhat_threshold = 1.05;
};

TPosterior train_mcmc(const SurrogateSpec& spec, const TrainingDataset& data,
                      const TrainConfig& config, const Rng& rng);

// log p(theta | D_T) up to a constant, exactly the density train_mcmc samples.
TargetDensity make_training_target(const SurrogateSpec& spec, const TrainingDataset& data);

}  // namespace twostep

#pragma once

// Simulation-based calibration for the two-step procedure: rank statistics,
// simultaneous ECDF-difference envelopes, the log-gamma uniformity statistic,
// and sharpness.

#include "twostep/istep.hpp"
#include "twostep/prob.hpp"
#include "twostep/simulators.hpp"
#include "twostep/surrogates.hpp"
#include "twostep/tstep.hpp"

#include <optional>
#include <vector>

namespace twostep {

// Count of posterior draws >= omega_star; ties are broken by uniform
// randomization so the rank stays uniform under the null with atoms.
int rank_statistic(double omega_star, const Vector& draws, Rng& rng);

// Evenly spaced subsample of length k (autocorrelation thinning).
Vector thin_evenly(const Vector& draws, int k);

enum class SbcTraining { Cheat, Mcmc };

struct SbcConfig {
  int n_t_trials = 5;
  int n_i_trials = 10;
  SimulatorSpec simulator;
  SurrogateSpec surrogate;

  SbcTraining training = SbcTraining::Mcmc;
  Vector cheat_coeffs;  // Cheat: surrogate parameters matching the simulator
  TrainConfig train_config;
  int n_t = 5;           // training points per T-trial
  double sigma_s = 0.01;

  UpMethod method;
  IStepPriors priors;
  IStepConfig istep;
  std::optional<long> n_clusters;
  int n_i = 5;                          // measurements per I-trial
  std::optional<double> negbin_phi;     // SIR measurement noise
  int k_eff = 99;                       // rank resolution after thinning
  double max_fail_fraction = 0.10;
  int jobs = 1;
};

struct SbcRecord {
  int t_trial = 0;
  int i_trial = 0;
  int dim = 0;
  double omega_star = 0.0;
  int rank = -1;  // -1 on excluded (failed) trials
  int k_eff = 0;
  double rhat_max = 0.0;
  bool ok = true;
};

std::vector<SbcRecord> sbc_run(const SbcConfig& cfg, const Rng& rng);

// Ranks of one dimension, failed records dropped.
std::vector<int> collect_ranks(const std::vector<SbcRecord>& records, int dim = 0);

struct EcdfEnvelope {
  Vector eval;       // normalized evaluation points (r+1)/(K_eff+1)
  Vector lower;      // simultaneous band on ECDF - uniform CDF
  Vector upper;
  Vector ecdf_diff;  // observed ECDF - uniform CDF
  double log_gamma = 0.0;
  double threshold = 0.0;  // confidence-calibrated log-gamma threshold
};

EcdfEnvelope ecdf_envelope(const std::vector<int>& ranks, int k_eff, double confidence,
                           int n_sim, Rng& rng);

// gamma = min over evaluation points of the two-sided binomial tail
// probability of the observed rank-ECDF count under exact uniformity.
double log_gamma_statistic(const std::vector<int>& ranks, int k_eff);

// Confidence-quantile of log-gamma over n_sim uniform simulations; observed
// values below the threshold indicate miscalibration.
double log_gamma_threshold(double confidence, int n_ranks, int k_eff, int n_sim, Rng& rng);

// Width of the central q-interval of the draws.
double sharpness(const Vector& draws, double q);

}  // namespace twostep

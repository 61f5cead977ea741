#pragma once

// The four uncertainty-propagation methods that turn a T-posterior plus
// measurements into an I-posterior, draw clustering, the analytic and
// quadrature oracles for the linear case studies, and the simulator-based
// reference posterior.

#include "twostep/mcmc.hpp"
#include "twostep/prob.hpp"
#include "twostep/simulators.hpp"
#include "twostep/surrogates.hpp"
#include "twostep/tstep.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace twostep {

enum class PointEstimator { Mean, Median, ModeProxy };

struct UpMethod {
  enum class Kind { Point, EPost, ELik, ELogLik };
  Kind kind = Kind::Point;
  PointEstimator estimator = PointEstimator::Mean;  // Point only

  static UpMethod point(PointEstimator est = PointEstimator::Mean) { return {Kind::Point, est}; }
  static UpMethod epost() { return {Kind::EPost}; }
  static UpMethod elik() { return {Kind::ELik}; }
  static UpMethod eloglik() { return {Kind::ELogLik}; }

  std::string name() const;
};

UpMethod up_method_from_name(const std::string& name);

// Weighted set of surrogate parameter vectors: either raw T-posterior draws
// with uniform weights or cluster centroids with occupancy weights.
struct ThetaSet {
  Matrix values;  // S x (n_coeffs [+1 sigma_A])
  Vector weights;  // nonnegative, sums to 1
  bool includes_sigma_a = false;

  long size() const { return values.rows(); }
  static ThetaSet from_tposterior(const TPosterior& tpost, bool propagate_sigma_a = true);
};

struct ClusterSet {
  Matrix centroids;  // L x dim(theta)
  Vector weights;    // occupancy fractions, sum to 1
  bool includes_sigma_a = false;

  long size() const { return centroids.rows(); }
  ThetaSet to_theta_set() const { return {centroids, weights, includes_sigma_a}; }
};

// Lloyd's algorithm with k-means++ seeding on z-scored draws; centroids are
// returned in the original scale, weights are cluster occupancy fractions.
ClusterSet cluster_draws(const TPosterior& tpost, long n_clusters, Rng& rng);

struct IStepPriors {
  std::vector<DistSpec> omega_priors;     // one per omega dimension
  std::optional<DistSpec> sigma_i_prior;  // sigma_I sampled when present
  double sigma_i_fixed = 0.0;             // used when the prior is absent

  int omega_dim() const { return static_cast<int>(omega_priors.size()); }
};

struct IStepConfig {
  McmcConfig mcmc;
  PointEstimator estimator = PointEstimator::Mean;
  bool propagate_sigma_a = true;
  int jobs = 1;                         // E-Post component parallelism
  double max_component_failures = 0.05;  // E-Post
};

struct IPosterior {
  Matrix draws;  // n x (omega_dim [+1 sigma_I])
  bool includes_sigma_i = false;
  UpMethod method;
  double max_rhat = 0.0;
  int n_failed_components = 0;  // E-Post
  std::uint64_t tpost_hash = 0;
  std::uint64_t seed = 0;

  long size() const { return draws.rows(); }
  Matrix omega_draws(int omega_dim) const { return draws.leftCols(omega_dim); }
};

SurrogateParams point_estimate(const TPosterior& tpost, PointEstimator estimator);

// Support transform induced by a prior's support.
Transform transform_for(const DistSpec& prior);

// The single-model log-posterior over (omega [, sigma_I]) for Point, E-Lik
// and E-Log-Lik; E-Post is accepted only for a single-element ThetaSet
// (where it coincides with Point).
TargetDensity make_istep_target(const UpMethod& method, const SurrogateSpec& spec,
                                const ThetaSet& thetas, const Measurements& meas,
                                const IStepPriors& priors);

// E-Log-Post built directly from per-draw normalized posteriors (each
// normalizer computed by quadrature over a 1-d omega with fixed sigma_I).
std::function<double(double)> make_elogpost_logdensity(const SurrogateSpec& spec,
                                                       const ThetaSet& thetas,
                                                       const Measurements& meas,
                                                       const IStepPriors& priors);

IPosterior infer_point(const SurrogateSpec& spec, const TPosterior& tpost,
                       const Measurements& meas, const IStepPriors& priors,
                       const IStepConfig& config, const Rng& rng);

IPosterior infer_elik(const SurrogateSpec& spec, const ThetaSet& thetas,
                      const Measurements& meas, const IStepPriors& priors,
                      const IStepConfig& config, const Rng& rng);

IPosterior infer_eloglik(const SurrogateSpec& spec, const ThetaSet& thetas,
                         const Measurements& meas, const IStepPriors& priors,
                         const IStepConfig& config, const Rng& rng);

// One Point-style fit per draw/centroid; pooled draws are concatenated for
// equal weights and multinomially resampled for cluster weights.
IPosterior infer_epost(const SurrogateSpec& spec, const ThetaSet& thetas,
                       const Measurements& meas, const IStepPriors& priors,
                       const IStepConfig& config, const Rng& rng);

IPosterior infer(const UpMethod& method, const SurrogateSpec& spec, const ThetaSet& thetas,
                 const Measurements& meas, const IStepPriors& priors, const IStepConfig& config,
                 const Rng& rng);

// Reference posterior against the true simulator (Normal likelihood around
// the simulator response).
IPosterior infer_simulator(const SimulatorSpec& sim, const Measurements& meas,
                           const IStepPriors& priors, const IStepConfig& config, const Rng& rng);

// ---------------------------------------------------------------------------
// Analytic / quadrature oracles for the linear case studies (N_I = 1).

struct LinearIPriors {
  double mu_i0 = 0.0;
  double sigma_i0 = 1.0;
  double sigma_i = 0.1;
};

struct NormalDensity {
  double mean = 0.0;
  double sd = 1.0;
};

struct GridDensity {
  Vector omega;
  Vector pdf;  // normalized
  double mean = 0.0;
  double sd = 0.0;

  int count_local_maxima(double rel_threshold = 1e-3) const;
};

// Eq-41-style inner normalizer variance: the slope-only term (default) or
// the full dot product printed in the reference derivation.
enum class EPostInnerVariance { SlopeSquared, FullDot };

NormalDensity analytic_point_linear(const AnalyticGaussian& tpost, double y,
                                    const LinearIPriors& priors);
NormalDensity analytic_eloglik_linear(const AnalyticGaussian& tpost, double y,
                                      const LinearIPriors& priors);
GridDensity quadrature_elik_linear(const AnalyticGaussian& tpost, double y,
                                   const LinearIPriors& priors, int grid_n = 2001);
GridDensity quadrature_epost_linear(const AnalyticGaussian& tpost, double y,
                                    const LinearIPriors& priors,
                                    EPostInnerVariance variant = EPostInnerVariance::SlopeSquared,
                                    int grid_n = 2001);
// Pointwise unnormalized log density of the E-Post mixture.
std::function<double(double)> epost_linear_logdensity(const AnalyticGaussian& tpost, double y,
                                                      const LinearIPriors& priors,
                                                      EPostInnerVariance variant);

// Slope-only model (surrogate y = c * omega).
NormalDensity analytic_point_slope(double mu_t1, double sigma_t1, double y,
                                   const LinearIPriors& priors);
NormalDensity analytic_eloglik_slope(double mu_t1, double sigma_t1, double y,
                                     const LinearIPriors& priors);
GridDensity quadrature_elik_slope(double mu_t1, double sigma_t1, double y,
                                  const LinearIPriors& priors, int grid_n = 2001);
GridDensity quadrature_epost_slope(double mu_t1, double sigma_t1, double y,
                                   const LinearIPriors& priors, int grid_n = 2001);

struct LinearAnalyticResult {
  std::optional<NormalDensity> normal;
  std::optional<GridDensity> grid;

  double mean() const { return normal ? normal->mean : grid->mean; }
  double sd() const { return normal ? normal->sd : grid->sd; }
};

LinearAnalyticResult analytic_linear_iposterior(const UpMethod& method,
                                                const AnalyticGaussian& tpost, double y,
                                                const LinearIPriors& priors);

}  // namespace twostep

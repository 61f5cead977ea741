#pragma once

// Probability kernels, log-space arithmetic, and seeded random generation.
// All densities are returned as natural logs; evaluation outside the support
// yields -inf rather than an error so that samplers can reject.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace twostep {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kLog2Pi = 1.8378770664093454836;

// Counter-based generator: output i is a pure function of (seed, stream, i).
// Distinct streams give statistically independent sequences; fork() derives
// child streams deterministically so parallel jobs never share state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1).
  double uniform01();

  Rng fork(std::uint64_t substream) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

enum class Family {
  Normal,
  MultivariateNormal,
  TruncatedNormal,
  HalfNormal,
  Uniform,
  LogNormal,
  NegativeBinomial,
};

// Validated distribution specification. Parameter errors (non-positive
// scales, non-PD covariance, unordered bounds) are raised at construction,
// never at evaluation time.
class DistSpec {
 public:
  static DistSpec normal(double mu, double sigma);
  static DistSpec mvnormal(Vector mean, Matrix cov);
  static DistSpec truncated_normal(double lo, double hi, double mu, double sigma);
  static DistSpec half_normal(double mu, double sigma);
  static DistSpec uniform(double lo, double hi);
  static DistSpec log_normal(double mu, double sigma);
  static DistSpec neg_binomial(double mu, double phi);

  Family family() const { return family_; }
  int dim() const;

  double location() const { return a_; }
  double scale() const { return b_; }
  double lower() const { return lo_; }
  double upper() const { return hi_; }
  const Vector& mean_vec() const { return mean_; }
  const Matrix& cov() const { return cov_; }
  const Matrix& chol_lower() const { return chol_; }

  double mean() const;      // first moment
  double variance() const;  // second central moment (scalar families)

 private:
  DistSpec() = default;
  Family family_ = Family::Normal;
  double a_ = 0.0;   // location / count mean
  double b_ = 1.0;   // scale / shape
  double lo_ = 0.0;  // bounds (TruncatedNormal, Uniform)
  double hi_ = 0.0;
  Vector mean_;
  Matrix cov_;
  Matrix chol_;
};

double log_density(const DistSpec& spec, double x);
double log_density(const DistSpec& spec, const Vector& x);

double draw(const DistSpec& spec, Rng& rng);
Vector draw_vector(const DistSpec& spec, Rng& rng);

// log(sum_i w_i exp(v_i)) with the max subtracted first. Unit weights when
// `weights` is absent. Empty input is an error; all-(-inf) values return -inf.
double log_sum_exp(const Vector& values);
double log_sum_exp(const Vector& values, const Vector& weights);

// Standard normal helpers shared by the kernels and the samplers.
double normal_cdf(double z);
double inverse_normal_cdf(double p);
double standard_normal_logpdf(double z);

// Low-level samplers used by draw(); exposed for reuse.
double draw_standard_normal(Rng& rng);
double draw_gamma(double shape, double rate, Rng& rng);
long draw_poisson(double lambda, Rng& rng);

}  // namespace twostep

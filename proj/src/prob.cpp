#include "twostep/prob.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace twostep {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// SplitMix64 finalizer (Stafford mix13).
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t k = mix64(seed);
  k ^= mix64(stream ^ 0xD1B54A32D192ED03ULL);
  return mix64(k);
}

bool is_count(double x) { return x >= 0.0 && std::floor(x) == x && std::isfinite(x); }

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(derive_key(seed, stream)) {}

std::uint64_t Rng::next_u64() { return mix64(key_ + 0x9E3779B97F4A7C15ULL * ++counter_); }

double Rng::uniform01() {
  // 53-bit mantissa, shifted to the open interval.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

Rng Rng::fork(std::uint64_t substream) const {
  // Children are indexed off this stream's key so the tree is reproducible.
  return Rng(key_, mix64(substream ^ 0xA0761D6478BD642FULL));
}

// ---------------------------------------------------------------------------
// DistSpec construction

DistSpec DistSpec::normal(double mu, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(mu) || !std::isfinite(sigma))
    throw std::invalid_argument("Normal: scale must be finite and > 0");
  DistSpec s;
  s.family_ = Family::Normal;
  s.a_ = mu;
  s.b_ = sigma;
  return s;
}

DistSpec DistSpec::mvnormal(Vector mean, Matrix cov) {
  if (mean.size() == 0 || cov.rows() != mean.size() || cov.cols() != mean.size())
    throw std::invalid_argument("MultivariateNormal: dimension mismatch");
  if (!cov.isApprox(cov.transpose(), 1e-10))
    throw std::invalid_argument("MultivariateNormal: covariance not symmetric");
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("MultivariateNormal: covariance not positive-definite");
  DistSpec s;
  s.family_ = Family::MultivariateNormal;
  s.mean_ = std::move(mean);
  s.cov_ = std::move(cov);
  s.chol_ = llt.matrixL();
  return s;
}

DistSpec DistSpec::truncated_normal(double lo, double hi, double mu, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("TruncatedNormal: scale must be > 0");
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("TruncatedNormal: bounds must be finite and ordered");
  DistSpec s;
  s.family_ = Family::TruncatedNormal;
  s.a_ = mu;
  s.b_ = sigma;
  s.lo_ = lo;
  s.hi_ = hi;
  return s;
}

DistSpec DistSpec::half_normal(double mu, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("HalfNormal: scale must be > 0");
  DistSpec s;
  s.family_ = Family::HalfNormal;
  s.a_ = mu;
  s.b_ = sigma;
  return s;
}

DistSpec DistSpec::uniform(double lo, double hi) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("Uniform: bounds must be finite and ordered");
  DistSpec s;
  s.family_ = Family::Uniform;
  s.lo_ = lo;
  s.hi_ = hi;
  return s;
}

DistSpec DistSpec::log_normal(double mu, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("LogNormal: scale must be > 0");
  DistSpec s;
  s.family_ = Family::LogNormal;
  s.a_ = mu;
  s.b_ = sigma;
  return s;
}

DistSpec DistSpec::neg_binomial(double mu, double phi) {
  if (!(mu > 0.0) || !(phi > 0.0))
    throw std::invalid_argument("NegativeBinomial: mu and phi must be > 0");
  DistSpec s;
  s.family_ = Family::NegativeBinomial;
  s.a_ = mu;
  s.b_ = phi;
  return s;
}

int DistSpec::dim() const {
  return family_ == Family::MultivariateNormal ? static_cast<int>(mean_.size()) : 1;
}

double DistSpec::mean() const {
  switch (family_) {
    case Family::Normal:
      return a_;
    case Family::Uniform:
      return 0.5 * (lo_ + hi_);
    case Family::LogNormal:
      return std::exp(a_ + 0.5 * b_ * b_);
    case Family::NegativeBinomial:
      return a_;
    case Family::HalfNormal:
      return a_ + b_ * std::sqrt(2.0 / M_PI);
    case Family::TruncatedNormal: {
      const double alpha = (lo_ - a_) / b_;
      const double beta = (hi_ - a_) / b_;
      const double z = normal_cdf(beta) - normal_cdf(alpha);
      const double phi_a = std::exp(standard_normal_logpdf(alpha));
      const double phi_b = std::exp(standard_normal_logpdf(beta));
      return a_ + b_ * (phi_a - phi_b) / z;
    }
    case Family::MultivariateNormal:
      throw std::invalid_argument("mean(): scalar families only; use mean_vec()");
  }
  return 0.0;
}

double DistSpec::variance() const {
  switch (family_) {
    case Family::Normal:
      return b_ * b_;
    case Family::Uniform:
      return (hi_ - lo_) * (hi_ - lo_) / 12.0;
    case Family::LogNormal:
      return (std::exp(b_ * b_) - 1.0) * std::exp(2.0 * a_ + b_ * b_);
    case Family::NegativeBinomial:
      return a_ + a_ * a_ / b_;
    case Family::HalfNormal:
      return b_ * b_ * (1.0 - 2.0 / M_PI);
    case Family::TruncatedNormal: {
      const double alpha = (lo_ - a_) / b_;
      const double beta = (hi_ - a_) / b_;
      const double z = normal_cdf(beta) - normal_cdf(alpha);
      const double phi_a = std::exp(standard_normal_logpdf(alpha));
      const double phi_b = std::exp(standard_normal_logpdf(beta));
      const double t = (alpha * phi_a - beta * phi_b) / z;
      const double u = (phi_a - phi_b) / z;
      return b_ * b_ * (1.0 + t - u * u);
    }
    case Family::MultivariateNormal:
      throw std::invalid_argument("variance(): scalar families only; use cov()");
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Standard normal helpers

double standard_normal_logpdf(double z) { return -0.5 * (kLog2Pi + z * z); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -kInf;
    if (p == 1.0) return kInf;
    throw std::invalid_argument("inverse_normal_cdf: p outside [0,1]");
  }
  // Acklam's rational approximation, then one Halley refinement step.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

// ---------------------------------------------------------------------------
// Densities

namespace {

double normal_logpdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return standard_normal_logpdf(z) - std::log(sigma);
}

}  // namespace

double log_density(const DistSpec& spec, double x) {
  switch (spec.family()) {
    case Family::Normal:
      return normal_logpdf(x, spec.location(), spec.scale());
    case Family::TruncatedNormal: {
      if (x < spec.lower() || x > spec.upper()) return -kInf;
      const double alpha = (spec.lower() - spec.location()) / spec.scale();
      const double beta = (spec.upper() - spec.location()) / spec.scale();
      const double z = normal_cdf(beta) - normal_cdf(alpha);
      return normal_logpdf(x, spec.location(), spec.scale()) - std::log(z);
    }
    case Family::HalfNormal: {
      if (x < spec.location()) return -kInf;
      return M_LN2 + normal_logpdf(x, spec.location(), spec.scale());
    }
    case Family::Uniform: {
      if (x < spec.lower() || x > spec.upper()) return -kInf;
      return -std::log(spec.upper() - spec.lower());
    }
    case Family::LogNormal: {
      if (!(x > 0.0)) return -kInf;
      const double lx = std::log(x);
      return normal_logpdf(lx, spec.location(), spec.scale()) - lx;
    }
    case Family::NegativeBinomial: {
      if (!is_count(x)) return -kInf;
      const double n = x;
      const double mu = spec.location();
      const double phi = spec.scale();
      return std::lgamma(n + phi) - std::lgamma(n + 1.0) - std::lgamma(phi) +
             n * std::log(mu / (mu + phi)) + phi * std::log(phi / (mu + phi));
    }
    case Family::MultivariateNormal:
      throw std::invalid_argument("log_density: vector argument required for MVN");
  }
  return -kInf;
}

double log_density(const DistSpec& spec, const Vector& x) {
  if (spec.family() != Family::MultivariateNormal) {
    if (x.size() != 1) throw std::invalid_argument("log_density: scalar family, vector input");
    return log_density(spec, x[0]);
  }
  if (x.size() != spec.dim()) throw std::invalid_argument("log_density: dimension mismatch");
  const Matrix& L = spec.chol_lower();
  Vector v = L.triangularView<Eigen::Lower>().solve(x - spec.mean_vec());
  double logdet = 0.0;
  for (int i = 0; i < L.rows(); ++i) logdet += std::log(L(i, i));
  return -0.5 * (spec.dim() * kLog2Pi + v.squaredNorm()) - logdet;
}

// ---------------------------------------------------------------------------
// Sampling

double draw_standard_normal(Rng& rng) { return inverse_normal_cdf(rng.uniform01()); }

double draw_gamma(double shape, double rate, Rng& rng) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw std::invalid_argument("draw_gamma: bad parameters");
  if (shape < 1.0) {
    // Boost: Gamma(a) = Gamma(a+1) * U^(1/a)
    const double u = rng.uniform01();
    return draw_gamma(shape + 1.0, rate, rng) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia-Tsang squeeze
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = draw_standard_normal(rng);
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = rng.uniform01();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v / rate;
  }
}

long draw_poisson(double lambda, Rng& rng) {
  if (lambda < 0.0) throw std::invalid_argument("draw_poisson: lambda < 0");
  // Count unit-rate exponential arrivals in [0, lambda]; no underflow for
  // the count scales used here.
  long n = 0;
  double t = -std::log(rng.uniform01());
  while (t <= lambda) {
    ++n;
    t -= std::log(rng.uniform01());
  }
  return n;
}

double draw(const DistSpec& spec, Rng& rng) {
  switch (spec.family()) {
    case Family::Normal:
      return spec.location() + spec.scale() * draw_standard_normal(rng);
    case Family::TruncatedNormal: {
      // Inverse CDF restricted to the truncation interval.
      const double alpha = (spec.lower() - spec.location()) / spec.scale();
      const double beta = (spec.upper() - spec.location()) / spec.scale();
      const double fa = normal_cdf(alpha);
      const double fb = normal_cdf(beta);
      const double u = fa + rng.uniform01() * (fb - fa);
      const double x = spec.location() + spec.scale() * inverse_normal_cdf(u);
      return std::clamp(x, spec.lower(), spec.upper());
    }
    case Family::HalfNormal:
      return spec.location() +
             spec.scale() * inverse_normal_cdf(0.5 + 0.5 * rng.uniform01());
    case Family::Uniform:
      return spec.lower() + rng.uniform01() * (spec.upper() - spec.lower());
    case Family::LogNormal:
      return std::exp(spec.location() + spec.scale() * draw_standard_normal(rng));
    case Family::NegativeBinomial: {
      // Gamma-Poisson mixture matching the (mu, phi) parameterization.
      const double lambda = draw_gamma(spec.scale(), spec.scale() / spec.location(), rng);
      return static_cast<double>(draw_poisson(lambda, rng));
    }
    case Family::MultivariateNormal:
      throw std::invalid_argument("draw: use draw_vector for MVN");
  }
  return 0.0;
}

Vector draw_vector(const DistSpec& spec, Rng& rng) {
  if (spec.family() != Family::MultivariateNormal) {
    Vector v(1);
    v[0] = draw(spec, rng);
    return v;
  }
  Vector z(spec.dim());
  for (int i = 0; i < z.size(); ++i) z[i] = draw_standard_normal(rng);
  return spec.mean_vec() + spec.chol_lower() * z;
}

// ---------------------------------------------------------------------------
// log-sum-exp

double log_sum_exp(const Vector& values) {
  if (values.size() == 0) throw std::invalid_argument("log_sum_exp: empty input");
  const double m = values.maxCoeff();
  if (m == -kInf) return -kInf;
  if (values.size() == 1) return values[0];
  double acc = 0.0;
  for (int i = 0; i < values.size(); ++i) acc += std::exp(values[i] - m);
  return m + std::log(acc);
}

double log_sum_exp(const Vector& values, const Vector& weights) {
  if (values.size() == 0) throw std::invalid_argument("log_sum_exp: empty input");
  if (weights.size() != values.size())
    throw std::invalid_argument("log_sum_exp: weight length mismatch");
  if ((weights.array() < 0.0).any() || weights.maxCoeff() <= 0.0)
    throw std::invalid_argument("log_sum_exp: weights must be nonnegative, not all zero");
  double m = -kInf;
  for (int i = 0; i < values.size(); ++i)
    if (weights[i] > 0.0) m = std::max(m, values[i]);
  if (m == -kInf) return -kInf;
  double acc = 0.0;
  for (int i = 0; i < values.size(); ++i)
    if (weights[i] > 0.0) acc += weights[i] * std::exp(values[i] - m);
  return m + std::log(acc);
}

}  // namespace twostep

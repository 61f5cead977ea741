#include "twostep/surrogates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace twostep {

double legendre_univariate(int k, double omega) {
  if (k < 0) throw std::invalid_argument("legendre_univariate: k >= 0 required");
  if (k == 0) return 1.0;
  if (k == 1) return omega;
  double pm1 = 1.0, p = omega;
  for (int n = 1; n < k; ++n) {
    const double next = ((2.0 * n + 1.0) * omega * p - n * pm1) / (n + 1.0);
    pm1 = p;
    p = next;
  }
  return p;
}

std::vector<MultiIndex> pce_index_set(int input_dim, int max_degree) {
  if (input_dim < 1 || max_degree < 0)
    throw std::invalid_argument("pce_index_set: input_dim >= 1, max_degree >= 0 required");
  std::vector<MultiIndex> out;
  // Graded order: enumerate each total degree, lexicographic within it.
  MultiIndex idx(input_dim, 0);
  for (int total = 0; total <= max_degree; ++total) {
    std::fill(idx.begin(), idx.end(), 0);
    idx[0] = total;
    for (;;) {
      out.push_back(idx);
      // Next composition of `total` into input_dim parts, lexicographic
      // descending on the leading entries.
      int k = input_dim - 2;
      while (k >= 0 && idx[k] == 0) --k;
      if (k < 0) break;
      --idx[k];
      int tail = idx[input_dim - 1] + 1;
      idx[input_dim - 1] = 0;
      idx[k + 1] = tail;
      for (int j = k + 2; j < input_dim; ++j) {
        idx[k + 1] += idx[j];
        idx[j] = 0;
      }
    }
  }
  return out;
}

SurrogateSpec SurrogateSpec::linear_lm() {
  SurrogateSpec s;
  s.kind = SurrogateKind::LinearLM;
  s.input_dim = 1;
  return s;
}

SurrogateSpec SurrogateSpec::slope_only() {
  SurrogateSpec s;
  s.kind = SurrogateKind::SlopeOnly;
  s.input_dim = 1;
  return s;
}

SurrogateSpec SurrogateSpec::logistic_param() {
  SurrogateSpec s;
  s.kind = SurrogateKind::LogisticParam;
  s.input_dim = 1;
  return s;
}

SurrogateSpec SurrogateSpec::pce(int input_dim, int max_degree,
                                 std::vector<std::pair<double, double>> bounds) {
  SurrogateSpec s;
  s.kind = SurrogateKind::Pce;
  s.input_dim = input_dim;
  s.max_degree = max_degree;
  s.index_set = pce_index_set(input_dim, max_degree);
  s.input_bounds = std::move(bounds);
  if (!s.input_bounds.empty() && static_cast<int>(s.input_bounds.size()) != input_dim)
    throw std::invalid_argument("SurrogateSpec::pce: bounds dimension mismatch");
  return s;
}

int SurrogateSpec::n_coeffs() const {
  switch (kind) {
    case SurrogateKind::LinearLM:
      return 2;
    case SurrogateKind::SlopeOnly:
      return 1;
    case SurrogateKind::LogisticParam:
      return 4;
    case SurrogateKind::Pce:
      return static_cast<int>(index_set.size());
  }
  return 0;
}

double surrogate_eval(const SurrogateSpec& spec, const Vector& c, const Vector& omega) {
  if (c.size() != spec.n_coeffs())
    throw std::invalid_argument("surrogate_eval: coefficient dimension mismatch");
  if (omega.size() != spec.input_dim)
    throw std::invalid_argument("surrogate_eval: input dimension mismatch");
  switch (spec.kind) {
    case SurrogateKind::LinearLM:
      return c[0] + c[1] * omega[0];
    case SurrogateKind::SlopeOnly:
      return c[0] * omega[0];
    case SurrogateKind::LogisticParam:
      // alpha / (1 + exp(-beta (omega - gamma))) + delta
      return c[0] / (1.0 + std::exp(-c[1] * (omega[0] - c[2]))) + c[3];
    case SurrogateKind::Pce: {
      double acc = 0.0;
      for (std::size_t i = 0; i < spec.index_set.size(); ++i) {
        double basis = 1.0;
        for (int j = 0; j < spec.input_dim; ++j) {
          const int deg = spec.index_set[i][j];
          if (deg > 0) basis *= legendre_univariate(deg, omega[j]);
        }
        acc += c[static_cast<long>(i)] * basis;
      }
      return acc;
    }
  }
  return 0.0;
}

double surrogate_eval(const SurrogateSpec& spec, const SurrogateParams& params,
                      const Vector& omega) {
  return surrogate_eval(spec, params.c, omega);
}

Vector scale_inputs(const std::vector<std::pair<double, double>>& bounds, const Vector& raw,
                    bool* clamped) {
  if (static_cast<long>(bounds.size()) != raw.size())
    throw std::invalid_argument("scale_inputs: dimension mismatch");
  if (clamped) *clamped = false;
  Vector out(raw.size());
  for (long i = 0; i < raw.size(); ++i) {
    const auto& [lo, hi] = bounds[static_cast<std::size_t>(i)];
    if (!(lo < hi)) throw std::invalid_argument("scale_inputs: bounds must be ordered");
    double u = (raw[i] - lo) / (hi - lo) * 2.0 - 1.0;
    if (u < -1.0 || u > 1.0) {
      if (clamped) *clamped = true;
      u = std::clamp(u, -1.0, 1.0);
    }
    out[i] = u;
  }
  return out;
}

Vector unscale_inputs(const std::vector<std::pair<double, double>>& bounds,
                      const Vector& scaled) {
  if (static_cast<long>(bounds.size()) != scaled.size())
    throw std::invalid_argument("unscale_inputs: dimension mismatch");
  Vector out(scaled.size());
  for (long i = 0; i < scaled.size(); ++i) {
    const auto& [lo, hi] = bounds[static_cast<std::size_t>(i)];
    out[i] = lo + (scaled[i] + 1.0) * 0.5 * (hi - lo);
  }
  return out;
}

double surrogate_log_likelihood(const SurrogateSpec& spec, const Vector& c,
                                const Vector& omega, double y, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("surrogate_log_likelihood: scale must be > 0");
  const double mean = surrogate_eval(spec, c, omega);
  switch (spec.likelihood) {
    case LikelihoodFamily::Normal:
      return log_density(DistSpec::normal(mean, scale), y);
    case LikelihoodFamily::LogNormal:
      if (!(y > 0.0)) return -std::numeric_limits<double>::infinity();
      return log_density(DistSpec::log_normal(mean, scale), y);
  }
  return -std::numeric_limits<double>::infinity();
}

double surrogate_log_likelihood(const SurrogateSpec& spec, const SurrogateParams& params,
                                const Vector& omega, double y) {
  double scale = 0.0;
  if (params.sigma_a)
    scale = *params.sigma_a;
  else if (spec.sigma_a_fixed)
    scale = *spec.sigma_a_fixed;
  else
    throw std::invalid_argument("surrogate_log_likelihood: no sigma_A available for the scale");
  return surrogate_log_likelihood(spec, params.c, omega, y, scale);
}

}  // namespace twostep

#pragma once

// Parametric surrogate families: linear, slope-only, parametric logistic,
// and (multivariate) Legendre polynomial chaos expansion.

#include "twostep/prob.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace twostep {

enum class SurrogateKind { LinearLM, SlopeOnly, LogisticParam, Pce };
enum class LikelihoodFamily { Normal, LogNormal };

using MultiIndex = std::vector<int>;

// All multi-indices with total degree <= d in graded lexicographic order.
// Size is C(input_dim + d, d).
std::vector<MultiIndex> pce_index_set(int input_dim, int max_degree);

// Standard Legendre P_k via the Bonnet recurrence; P_k(1) = 1.
double legendre_univariate(int k, double omega);

struct SurrogateSpec {
  SurrogateKind kind = SurrogateKind::LinearLM;
  int input_dim = 1;
  int max_degree = 0;                 // Pce
  std::vector<MultiIndex> index_set;  // Pce
  std::vector<DistSpec> coeff_priors;
  std::optional<DistSpec> sigma_a_prior;  // sampled sigma_A when present
  std::optional<double> sigma_a_fixed;    // fixed sigma_A when present
  LikelihoodFamily likelihood = LikelihoodFamily::Normal;
  // Per-dimension input bounds for the linear scaling to [-1, 1]^dim (Pce).
  std::vector<std::pair<double, double>> input_bounds;

  static SurrogateSpec linear_lm();
  static SurrogateSpec slope_only();
  static SurrogateSpec logistic_param();
  static SurrogateSpec pce(int input_dim, int max_degree,
                           std::vector<std::pair<double, double>> bounds = {});

  int n_coeffs() const;
  // Total sampled dimension: coefficients plus sigma_A when sampled.
  int n_params() const { return n_coeffs() + (sigma_a_prior ? 1 : 0); }
};

struct SurrogateParams {
  Vector c;
  std::optional<double> sigma_a;
};

// Deterministic mean response. Pce expects inputs already scaled to
// [-1, 1]^dim; the other families take raw inputs.
double surrogate_eval(const SurrogateSpec& spec, const Vector& c, const Vector& omega);
double surrogate_eval(const SurrogateSpec& spec, const SurrogateParams& params,
                      const Vector& omega);

// Affine map of raw inputs into [-1, 1]^dim; values outside the bounds are
// clamped and flagged through `clamped` when provided.
Vector scale_inputs(const std::vector<std::pair<double, double>>& bounds, const Vector& raw,
                    bool* clamped = nullptr);
Vector unscale_inputs(const std::vector<std::pair<double, double>>& bounds,
                      const Vector& scaled);

// log p(y | omega, c) with the given residual scale: Normal density around
// the mean response, or LogNormal with the response as log-scale location.
double surrogate_log_likelihood(const SurrogateSpec& spec, const Vector& c,
                                const Vector& omega, double y, double scale);
// Convenience overload taking the scale from params/spec sigma_A.
double surrogate_log_likelihood(const SurrogateSpec& spec, const SurrogateParams& params,
                                const Vector& omega, double y);

}  // namespace twostep

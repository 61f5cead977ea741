#pragma once

// Generic seedable posterior sampler over user supplied log densities:
// adaptive random-walk Metropolis in unconstrained space with support
// transforms, warmup-only adaptation, and split-Rhat diagnostics.

#include "twostep/prob.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace twostep {

enum class TransformKind { Unbounded, LowerBounded, Interval };

struct Transform {
  TransformKind kind = TransformKind::Unbounded;
  double lo = 0.0;
  double hi = 0.0;

  static Transform unbounded() { return {}; }
  static Transform lower_bounded(double lo) { return {TransformKind::LowerBounded, lo, 0.0}; }
  static Transform interval(double lo, double hi) { return {TransformKind::Interval, lo, hi}; }

  double to_constrained(double z) const;
  double to_unconstrained(double x) const;
  double log_jacobian(double z) const;
};

struct TargetDensity {
  int dim = 0;
  std::function<double(const Vector&)> log_prob;  // constrained space
  std::vector<Transform> transforms;              // size dim (empty = all unbounded)
};

struct McmcConfig {
  int n_chains = 4;
  int n_warmup = 500;
  int n_post = 500;
  // Optional per-chain initial points in constrained space (n_chains x dim).
  std::optional<Matrix> init_points;
  // Optional sampler of fresh initial points, used for -inf retries.
  std::function<Vector(Rng&)> init_sampler;
  // Greedy init: each chain starts at the highest-density point among this
  // many init_sampler candidates. Guards against starting in a prior-
  // disfavored mirror mode of a concentrated likelihood.
  int init_best_of = 1;
  int jobs = 1;
};

struct Chains {
  std::vector<Matrix> draws;    // per chain: n_post x dim, constrained space
  std::vector<Vector> logprob;  // per chain: target log density of each draw
  Vector acceptance_rate;       // post-warmup, per chain
  int n_warmup = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  int n_chains() const { return static_cast<int>(draws.size()); }
  int dim() const { return draws.empty() ? 0 : static_cast<int>(draws[0].cols()); }
  long n_total() const;
  Matrix flat() const;         // (n_chains * n_post) x dim
  Vector flat_logprob() const;
};

Chains sample(const TargetDensity& target, const McmcConfig& config, const Rng& rng);

struct RhatResult {
  Vector value;                 // per parameter
  std::vector<bool> degenerate;  // zero within-chain variance on all splits
  double max() const;
};

RhatResult split_rhat(const Chains& chains);

}  // namespace twostep

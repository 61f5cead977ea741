#include "twostep/mcmc.hpp"

#include "twostep/parallel.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace twostep {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double softplus(double z) {
  if (z > 30.0) return z;
  return std::log1p(std::exp(z));
}

}  // namespace

double Transform::to_constrained(double z) const {
  switch (kind) {
    case TransformKind::Unbounded:
      return z;
    case TransformKind::LowerBounded:
      return lo + std::exp(z);
    case TransformKind::Interval:
      return lo + (hi - lo) / (1.0 + std::exp(-z));
  }
  return z;
}

double Transform::to_unconstrained(double x) const {
  switch (kind) {
    case TransformKind::Unbounded:
      return x;
    case TransformKind::LowerBounded:
      if (!(x > lo)) throw std::invalid_argument("Transform: point at or below lower bound");
      return std::log(x - lo);
    case TransformKind::Interval: {
      if (!(x > lo && x < hi)) throw std::invalid_argument("Transform: point outside interval");
      const double u = (x - lo) / (hi - lo);
      return std::log(u / (1.0 - u));
    }
  }
  return x;
}

double Transform::log_jacobian(double z) const {
  switch (kind) {
    case TransformKind::Unbounded:
      return 0.0;
    case TransformKind::LowerBounded:
      return z;
    case TransformKind::Interval:
      return std::log(hi - lo) - softplus(z) - softplus(-z);
  }
  return 0.0;
}

namespace {

struct UnconstrainedTarget {
  const TargetDensity& target;

  Vector constrain(const Vector& z) const {
    if (target.transforms.empty()) return z;
    Vector x(z.size());
    for (int i = 0; i < z.size(); ++i) x[i] = target.transforms[i].to_constrained(z[i]);
    return x;
  }

  double log_prob(const Vector& z) const {
    Vector x = constrain(z);
    double lp = target.log_prob(x);
    if (std::isnan(lp)) {
      std::ostringstream msg;
      msg << "mcmc: log_prob returned NaN at point (";
      for (int i = 0; i < x.size(); ++i) msg << (i ? ", " : "") << x[i];
      msg << ")";
      throw std::runtime_error(msg.str());
    }
    if (lp == -kInf) return lp;
    if (!target.transforms.empty())
      for (int i = 0; i < z.size(); ++i) lp += target.transforms[i].log_jacobian(z[i]);
    return lp;
  }
};

Vector unconstrain_point(const TargetDensity& target, const Vector& x) {
  if (target.transforms.empty()) return x;
  Vector z(x.size());
  for (int i = 0; i < x.size(); ++i) z[i] = target.transforms[i].to_unconstrained(x[i]);
  return z;
}

struct ChainResult {
  Matrix draws;
  Vector logprob;
  double acceptance = 0.0;
};

ChainResult run_chain(const TargetDensity& target, const McmcConfig& config, int chain_id,
                      Rng rng) {
  const int dim = target.dim;
  const UnconstrainedTarget utarget{target};

  // Initial point: configured point, else sampler/zero with up to 10 retries
  // while the density is -inf.
  Vector z;
  double lp = -kInf;
  for (int attempt = 0; attempt < 10; ++attempt) {
    if (config.init_points && attempt == 0) {
      z = unconstrain_point(target, config.init_points->row(chain_id).transpose());
    } else if (config.init_sampler) {
      z = unconstrain_point(target, config.init_sampler(rng));
      if (config.init_best_of > 1) {
        double best = utarget.log_prob(z);
        for (int k = 1; k < config.init_best_of; ++k) {
          Vector cand = unconstrain_point(target, config.init_sampler(rng));
          const double cand_lp = utarget.log_prob(cand);
          if (cand_lp > best) {
            best = cand_lp;
            z = std::move(cand);
          }
        }
      }
    } else if (attempt == 0) {
      z = Vector::Zero(dim);
    } else {
      z = Vector::Zero(dim);
      for (int i = 0; i < dim; ++i) z[i] = draw_standard_normal(rng);
    }
    lp = utarget.log_prob(z);
    if (lp > -kInf) break;
  }
  if (lp == -kInf)
    throw std::runtime_error(
        "mcmc: initial point has zero density after 10 attempts; provide init_points or "
        "an init_sampler covering the support");

  const double target_accept = dim == 1 ? 0.44 : 0.234;
  double log_scale = std::log(2.38 / std::sqrt(static_cast<double>(dim)));
  Matrix chol = Matrix::Identity(dim, dim);

  // Warmup adaptation: an initial scale-only phase, then expanding windows;
  // at the end of each window the proposal Cholesky is recomputed from that
  // window's draws only, which keeps early transients out of the covariance.
  // The Robbins-Monro scale update runs through all of warmup; everything is
  // frozen afterwards.
  Vector acc_mean = Vector::Zero(dim);
  Matrix acc_outer = Matrix::Zero(dim, dim);
  long acc_n = 0;
  std::vector<int> window_ends;
  {
    const int first = config.n_warmup / 4;
    int start = first;
    int width = std::max(1, config.n_warmup / 8);
    while (start < config.n_warmup) {
      int end = start + width;
      if (end + width / 2 > config.n_warmup) end = config.n_warmup;
      window_ends.push_back(end);
      start = end;
      width *= 2;
    }
  }
  std::size_t window_idx = 0;
  int rm_iter = 0;

  const int n_iter = config.n_warmup + config.n_post;

  Matrix draws(config.n_post, dim);
  Vector logprob(config.n_post);
  long accepted_post = 0;

  Vector proposal(dim), step(dim);
  for (int iter = 0; iter < n_iter; ++iter) {
    for (int i = 0; i < dim; ++i) step[i] = draw_standard_normal(rng);
    proposal = z + std::exp(log_scale) * (chol * step);
    const double lp_prop = utarget.log_prob(proposal);
    const double log_alpha = lp_prop - lp;
    const bool accept = std::log(rng.uniform01()) < log_alpha;
    if (accept) {
      z = proposal;
      lp = lp_prop;
    }

    const bool warming = iter < config.n_warmup;
    if (warming) {
      const double alpha = std::min(1.0, std::exp(std::min(0.0, log_alpha)));
      const double eta = 1.0 / std::pow(++rm_iter, 0.6);
      log_scale += eta * (alpha - target_accept);
      if (iter >= config.n_warmup / 4) {
        acc_mean += z;
        acc_outer += z * z.transpose();
        ++acc_n;
      }
      if (window_idx < window_ends.size() && iter + 1 == window_ends[window_idx]) {
        if (acc_n >= 2 * dim + 10) {
          const Vector mean = acc_mean / static_cast<double>(acc_n);
          Matrix cov = acc_outer / static_cast<double>(acc_n) - mean * mean.transpose();
          cov = 0.5 * (cov + cov.transpose());
          cov.diagonal().array() += 1e-10 + 1e-6 * cov.diagonal().mean();
          Eigen::LLT<Matrix> llt(cov);
          if (llt.info() == Eigen::Success) {
            chol = llt.matrixL();
            // Fresh window: restart moment accumulation and scale schedule.
            acc_mean.setZero();
            acc_outer.setZero();
            acc_n = 0;
            rm_iter = 0;
          }
        }
        ++window_idx;
      }
    } else {
      const int post_iter = iter - config.n_warmup;
      draws.row(post_iter) = utarget.constrain(z).transpose();
      double jac = 0.0;
      if (!target.transforms.empty())
        for (int i = 0; i < dim; ++i) jac += target.transforms[i].log_jacobian(z[i]);
      logprob[post_iter] = lp - jac;
      if (accept) ++accepted_post;
    }
  }

  ChainResult result;
  result.draws = std::move(draws);
  result.logprob = std::move(logprob);
  result.acceptance = config.n_post > 0 ? static_cast<double>(accepted_post) / config.n_post : 0.0;
  return result;
}

}  // namespace

long Chains::n_total() const {
  long n = 0;
  for (const auto& d : draws) n += d.rows();
  return n;
}

Matrix Chains::flat() const {
  Matrix out(n_total(), dim());
  long row = 0;
  for (const auto& d : draws) {
    out.middleRows(row, d.rows()) = d;
    row += d.rows();
  }
  return out;
}

Vector Chains::flat_logprob() const {
  Vector out(n_total());
  long row = 0;
  for (const auto& v : logprob) {
    out.segment(row, v.size()) = v;
    row += v.size();
  }
  return out;
}

Chains sample(const TargetDensity& target, const McmcConfig& config, const Rng& rng) {
  if (target.dim < 1) throw std::invalid_argument("sample: target dim >= 1 required");
  if (!target.transforms.empty() &&
      static_cast<int>(target.transforms.size()) != target.dim)
    throw std::invalid_argument("sample: transform count must match dim");
  if (config.n_chains < 1 || config.n_warmup < 0 || config.n_post < 1)
    throw std::invalid_argument("sample: invalid chain/draw counts");
  if (config.init_points &&
      (config.init_points->rows() != config.n_chains || config.init_points->cols() != target.dim))
    throw std::invalid_argument("sample: init_points must be n_chains x dim");

  Chains chains;
  chains.draws.resize(static_cast<std::size_t>(config.n_chains));
  chains.logprob.resize(static_cast<std::size_t>(config.n_chains));
  chains.acceptance_rate.resize(config.n_chains);
  chains.n_warmup = config.n_warmup;
  chains.seed = rng.seed();
  chains.stream = rng.stream();

  std::vector<ChainResult> results(static_cast<std::size_t>(config.n_chains));
  parallel_for(static_cast<std::size_t>(config.n_chains), config.jobs, [&](std::size_t c) {
    results[c] = run_chain(target, config, static_cast<int>(c), rng.fork(1000 + c));
  });
  for (int c = 0; c < config.n_chains; ++c) {
    chains.draws[static_cast<std::size_t>(c)] = std::move(results[static_cast<std::size_t>(c)].draws);
    chains.logprob[static_cast<std::size_t>(c)] = std::move(results[static_cast<std::size_t>(c)].logprob);
    chains.acceptance_rate[c] = results[static_cast<std::size_t>(c)].acceptance;
  }
  return chains;
}

RhatResult split_rhat(const Chains& chains) {
  if (chains.n_chains() < 2) throw std::invalid_argument("split_rhat: >= 2 chains required");
  const long n = chains.draws[0].rows();
  if (n < 4) throw std::invalid_argument("split_rhat: >= 4 draws per chain required");
  const int dim = chains.dim();
  const long half = n / 2;
  const long m = 2L * chains.n_chains();

  RhatResult result;
  result.value.resize(dim);
  result.degenerate.assign(static_cast<std::size_t>(dim), false);

  for (int p = 0; p < dim; ++p) {
    double grand = 0.0;
    std::vector<double> means, vars;
    for (const auto& d : chains.draws) {
      for (int s = 0; s < 2; ++s) {
        const auto seg = d.col(p).segment(s * half, half);
        const double mu = seg.mean();
        const double var = (seg.array() - mu).square().sum() / static_cast<double>(half - 1);
        means.push_back(mu);
        vars.push_back(var);
        grand += mu;
      }
    }
    grand /= static_cast<double>(m);
    double b = 0.0, w = 0.0;
    for (std::size_t j = 0; j < means.size(); ++j) {
      b += (means[j] - grand) * (means[j] - grand);
      w += vars[j];
    }
    b *= static_cast<double>(half) / static_cast<double>(m - 1);
    w /= static_cast<double>(m);
    if (w <= 0.0) {
      result.degenerate[static_cast<std::size_t>(p)] = true;
      result.value[p] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double var_plus = (static_cast<double>(half - 1) / half) * w + b / static_cast<double>(half);
    result.value[p] = std::sqrt(var_plus / w);
  }
  return result;
}

double RhatResult::max() const {
  double v = 0.0;
  for (int i = 0; i < value.size(); ++i)
    if (!degenerate[static_cast<std::size_t>(i)]) v = std::max(v, value[i]);
  return v;
}

}  // namespace twostep

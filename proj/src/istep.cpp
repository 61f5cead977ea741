#include "twostep/istep.hpp"

#include "twostep/parallel.hpp"
#include "twostep/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace twostep {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string UpMethod::name() const {
  switch (kind) {
    case Kind::Point:
      return "point";
    case Kind::EPost:
      return "e-post";
    case Kind::ELik:
      return "e-lik";
    case Kind::ELogLik:
      return "e-log-lik";
  }
  return "?";
}

UpMethod up_method_from_name(const std::string& name) {
  if (name == "point") return UpMethod::point();
  if (name == "e-post" || name == "epost") return UpMethod::epost();
  if (name == "e-lik" || name == "elik") return UpMethod::elik();
  if (name == "e-log-lik" || name == "eloglik") return UpMethod::eloglik();
  throw std::invalid_argument("unknown UP method: " + name);
}

ThetaSet ThetaSet::from_tposterior(const TPosterior& tpost, bool propagate_sigma_a) {
  ThetaSet set;
  if (tpost.includes_sigma_a && !propagate_sigma_a) {
    set.values = tpost.draws.leftCols(tpost.draws.cols() - 1);
    set.includes_sigma_a = false;
  } else {
    set.values = tpost.draws;
    set.includes_sigma_a = tpost.includes_sigma_a;
  }
  set.weights = Vector::Constant(set.values.rows(), 1.0 / static_cast<double>(set.values.rows()));
  return set;
}

// ---------------------------------------------------------------------------
// Clustering

ClusterSet cluster_draws(const TPosterior& tpost, long n_clusters, Rng& rng) {
  const Matrix& draws = tpost.draws;
  const long s = draws.rows();
  const long dim = draws.cols();
  if (n_clusters < 1 || n_clusters > s)
    throw std::invalid_argument("cluster_draws: 1 <= L <= S required");

  // z-score each dimension; constant columns keep unit scale.
  Vector mean = draws.colwise().mean();
  Vector sd(dim);
  for (long j = 0; j < dim; ++j) {
    const double var = (draws.col(j).array() - mean[j]).square().sum() / std::max(1L, s - 1);
    sd[j] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  Matrix z(s, dim);
  for (long j = 0; j < dim; ++j) z.col(j) = (draws.col(j).array() - mean[j]) / sd[j];

  // k-means++ seeding.
  Matrix centers(n_clusters, dim);
  std::vector<long> chosen;
  chosen.push_back(static_cast<long>(rng.uniform01() * s) % s);
  centers.row(0) = z.row(chosen[0]);
  Vector d2 = (z.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (long k = 1; k < n_clusters; ++k) {
    const double total = d2.sum();
    long pick = 0;
    if (total > 0.0) {
      double u = rng.uniform01() * total;
      for (; pick < s - 1; ++pick) {
        u -= d2[pick];
        if (u <= 0.0) break;
      }
    } else {
      pick = static_cast<long>(rng.uniform01() * s) % s;
    }
    centers.row(k) = z.row(pick);
    d2 = d2.cwiseMin((z.rowwise() - centers.row(k)).rowwise().squaredNorm());
  }

  std::vector<long> assign(static_cast<std::size_t>(s), 0);
  std::vector<long> counts(static_cast<std::size_t>(n_clusters), 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    std::fill(counts.begin(), counts.end(), 0);
    for (long i = 0; i < s; ++i) {
      long best = 0;
      double best_d = (z.row(i) - centers.row(0)).squaredNorm();
      for (long k = 1; k < n_clusters; ++k) {
        const double d = (z.row(i) - centers.row(k)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      if (assign[static_cast<std::size_t>(i)] != best) changed = true;
      assign[static_cast<std::size_t>(i)] = best;
      ++counts[static_cast<std::size_t>(best)];
    }

    // Empty clusters grab the point farthest from its current centroid.
    for (int repair = 0; repair < 10; ++repair) {
      long empty = -1;
      for (long k = 0; k < n_clusters; ++k)
        if (counts[static_cast<std::size_t>(k)] == 0) {
          empty = k;
          break;
        }
      if (empty < 0) break;
      long far_i = 0;
      double far_d = -1.0;
      for (long i = 0; i < s; ++i) {
        if (counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])] <= 1) continue;
        const double d = (z.row(i) - centers.row(assign[static_cast<std::size_t>(i)])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far_i = i;
        }
      }
      if (far_d < 0.0) break;
      --counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(far_i)])];
      assign[static_cast<std::size_t>(far_i)] = empty;
      ++counts[static_cast<std::size_t>(empty)];
      centers.row(empty) = z.row(far_i);
      changed = true;
    }

    Matrix sums = Matrix::Zero(n_clusters, dim);
    for (long i = 0; i < s; ++i) sums.row(assign[static_cast<std::size_t>(i)]) += z.row(i);
    for (long k = 0; k < n_clusters; ++k)
      if (counts[static_cast<std::size_t>(k)] > 0)
        centers.row(k) = sums.row(k) / static_cast<double>(counts[static_cast<std::size_t>(k)]);
    if (!changed && iter > 0) break;
  }

  // Drop clusters that stayed empty after repairs.
  long n_kept = 0;
  for (long k = 0; k < n_clusters; ++k)
    if (counts[static_cast<std::size_t>(k)] > 0) ++n_kept;

  ClusterSet out;
  out.centroids.resize(n_kept, dim);
  out.weights.resize(n_kept);
  out.includes_sigma_a = tpost.includes_sigma_a;
  long idx = 0;
  for (long k = 0; k < n_clusters; ++k) {
    if (counts[static_cast<std::size_t>(k)] == 0) continue;
    for (long j = 0; j < dim; ++j) out.centroids(idx, j) = centers(k, j) * sd[j] + mean[j];
    out.weights[idx] = static_cast<double>(counts[static_cast<std::size_t>(k)]) / static_cast<double>(s);
    ++idx;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Point estimates

SurrogateParams point_estimate(const TPosterior& tpost, PointEstimator estimator) {
  if (tpost.n_draws() < 1) throw std::invalid_argument("point_estimate: empty TPosterior");
  const int nc = tpost.n_coeffs();
  SurrogateParams params;
  switch (estimator) {
    case PointEstimator::Mean: {
      if (tpost.analytic) {
        params.c = tpost.analytic->mean;
      } else {
        params.c = tpost.draws.leftCols(nc).colwise().mean().transpose();
      }
      if (tpost.includes_sigma_a) params.sigma_a = tpost.draws.col(nc).mean();
      return params;
    }
    case PointEstimator::Median: {
      params.c.resize(nc);
      auto column_median = [&](long j) {
        std::vector<double> v(tpost.draws.col(j).data(),
                              tpost.draws.col(j).data() + tpost.n_draws());
        const std::size_t mid = v.size() / 2;
        std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
        double hi = v[mid];
        if (v.size() % 2 == 0) {
          std::nth_element(v.begin(), v.begin() + static_cast<long>(mid) - 1, v.end());
          return 0.5 * (hi + v[mid - 1]);
        }
        return hi;
      };
      for (int j = 0; j < nc; ++j) params.c[j] = column_median(j);
      if (tpost.includes_sigma_a) params.sigma_a = column_median(nc);
      return params;
    }
    case PointEstimator::ModeProxy: {
      if (tpost.logprobs.size() != tpost.n_draws())
        throw std::invalid_argument("point_estimate: mode proxy needs recorded log-probs");
      long best;
      tpost.logprobs.maxCoeff(&best);
      params.c = tpost.draws.row(best).head(nc).transpose();
      if (tpost.includes_sigma_a) params.sigma_a = tpost.draws(best, nc);
      return params;
    }
  }
  throw std::logic_error("point_estimate: unreachable");
}

Transform transform_for(const DistSpec& prior) {
  switch (prior.family()) {
    case Family::Normal:
      return Transform::unbounded();
    case Family::TruncatedNormal:
    case Family::Uniform:
      return Transform::interval(prior.lower(), prior.upper());
    case Family::HalfNormal:
      return Transform::lower_bounded(prior.location());
    case Family::LogNormal:
      return Transform::lower_bounded(0.0);
    case Family::MultivariateNormal:
    case Family::NegativeBinomial:
      throw std::invalid_argument("transform_for: unsupported prior family for sampling");
  }
  return Transform::unbounded();
}

// ---------------------------------------------------------------------------
// Observation model

namespace {

// Joint log-likelihood of all measurements for one theta draw, with a
// precomputed Legendre-table fast path for the 3-d PCE (SIR) case.
struct ObsModel {
  SurrogateSpec spec;
  Vector ys;
  std::optional<Vector> times;
  bool scale_pce = false;

  bool fast_pce = false;
  Matrix pt_table;                  // N x (d+1): P_k(scaled t_i)
  std::vector<int> at, ab, ag;      // per-term degrees
  Vector log_ys;

  static ObsModel build(const SurrogateSpec& spec, const Measurements& meas) {
    ObsModel m;
    m.spec = spec;
    m.ys = meas.ys;
    m.times = meas.times;
    m.scale_pce = spec.kind == SurrogateKind::Pce && !spec.input_bounds.empty();
    if (spec.kind == SurrogateKind::Pce && meas.times && spec.input_dim == 3 &&
        spec.input_bounds.size() == 3) {
      m.fast_pce = true;
      const int d = spec.max_degree;
      m.pt_table.resize(meas.ys.size(), d + 1);
      for (long i = 0; i < meas.ys.size(); ++i) {
        Vector raw(1);
        raw[0] = (*meas.times)[i];
        const double t = scale_inputs({spec.input_bounds[0]}, raw)[0];
        for (int k = 0; k <= d; ++k) m.pt_table(i, k) = legendre_univariate(k, t);
      }
      for (const auto& idx : spec.index_set) {
        m.at.push_back(idx[0]);
        m.ab.push_back(idx[1]);
        m.ag.push_back(idx[2]);
      }
      if (spec.likelihood == LikelihoodFamily::LogNormal) {
        m.log_ys.resize(meas.ys.size());
        for (long i = 0; i < meas.ys.size(); ++i)
          m.log_ys[i] = meas.ys[i] > 0.0 ? std::log(meas.ys[i]) : -kInf;
      }
    }
    return m;
  }

  double joint(const Vector& omega, const Vector& c, double scale) const {
    if (!(scale > 0.0)) return -kInf;
    const long n = ys.size();
    if (n == 0) return 0.0;

    if (fast_pce) {
      const int d = spec.max_degree;
      Vector pb(d + 1), pg(d + 1);
      const double sb =
          (omega[0] - spec.input_bounds[1].first) /
              (spec.input_bounds[1].second - spec.input_bounds[1].first) * 2.0 - 1.0;
      const double sg =
          (omega[1] - spec.input_bounds[2].first) /
              (spec.input_bounds[2].second - spec.input_bounds[2].first) * 2.0 - 1.0;
      for (int k = 0; k <= d; ++k) {
        pb[k] = legendre_univariate(k, sb);
        pg[k] = legendre_univariate(k, sg);
      }
      const std::size_t terms = at.size();
      Eigen::VectorXd w(static_cast<long>(terms));
      for (std::size_t j = 0; j < terms; ++j)
        w[static_cast<long>(j)] = c[static_cast<long>(j)] * pb[ab[j]] * pg[ag[j]];
      double acc = 0.0;
      const double log_scale = std::log(scale);
      for (long i = 0; i < n; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < terms; ++j)
          mean += w[static_cast<long>(j)] * pt_table(i, at[j]);
        if (spec.likelihood == LikelihoodFamily::LogNormal) {
          if (log_ys[i] == -kInf) return -kInf;
          const double zres = (log_ys[i] - mean) / scale;
          acc += -0.5 * (kLog2Pi + zres * zres) - log_scale - log_ys[i];
        } else {
          const double zres = (ys[i] - mean) / scale;
          acc += -0.5 * (kLog2Pi + zres * zres) - log_scale;
        }
      }
      return acc;
    }

    double acc = 0.0;
    for (long i = 0; i < n; ++i) {
      Vector raw;
      if (times) {
        raw.resize(omega.size() + 1);
        raw[0] = (*times)[i];
        raw.tail(omega.size()) = omega;
      } else {
        raw = omega;
      }
      const Vector input = scale_pce ? scale_inputs(spec.input_bounds, raw) : raw;
      acc += surrogate_log_likelihood(spec, c, input, ys[i], scale);
      if (acc == -kInf) return -kInf;
    }
    return acc;
  }
};

double combined_scale(double sigma_i, double sigma_a) {
  if (sigma_a <= 0.0) return sigma_i;
  return std::sqrt(sigma_i * sigma_i + sigma_a * sigma_a);
}

struct PriorBlock {
  IStepPriors priors;

  int dim() const { return priors.omega_dim() + (priors.sigma_i_prior ? 1 : 0); }

  std::vector<Transform> transforms() const {
    std::vector<Transform> t;
    for (const auto& p : priors.omega_priors) t.push_back(transform_for(p));
    if (priors.sigma_i_prior) t.push_back(transform_for(*priors.sigma_i_prior));
    return t;
  }

  double log_prior(const Vector& x) const {
    double lp = 0.0;
    for (int j = 0; j < priors.omega_dim(); ++j) {
      lp += log_density(priors.omega_priors[static_cast<std::size_t>(j)], x[j]);
      if (lp == -kInf) return lp;
    }
    if (priors.sigma_i_prior) lp += log_density(*priors.sigma_i_prior, x[priors.omega_dim()]);
    return lp;
  }

  double sigma_i(const Vector& x) const {
    return priors.sigma_i_prior ? x[priors.omega_dim()] : priors.sigma_i_fixed;
  }

  Vector draw_init(Rng& rng) const {
    Vector x(dim());
    for (int j = 0; j < priors.omega_dim(); ++j) {
      const auto& p = priors.omega_priors[static_cast<std::size_t>(j)];
      double v = draw(p, rng);
      // Keep interval-transformed coordinates strictly inside the bounds.
      if (p.family() == Family::TruncatedNormal || p.family() == Family::Uniform) {
        const double eps = 1e-9 * (p.upper() - p.lower());
        v = std::clamp(v, p.lower() + eps, p.upper() - eps);
      }
      x[j] = v;
    }
    if (priors.sigma_i_prior) {
      const auto& p = *priors.sigma_i_prior;
      double v = draw(p, rng);
      if (p.family() == Family::Uniform) {
        const double eps = 1e-9 * (p.upper() - p.lower());
        v = std::clamp(v, p.lower() + eps, p.upper() - eps);
      } else if (p.family() == Family::HalfNormal) {
        v = std::max(v, p.location() + 1e-12 + 1e-9 * p.scale());
      }
      x[priors.omega_dim()] = v;
    }
    return x;
  }
};

}  // namespace

TargetDensity make_istep_target(const UpMethod& method, const SurrogateSpec& spec,
                                const ThetaSet& thetas, const Measurements& meas,
                                const IStepPriors& priors) {
  if (thetas.size() < 1) throw std::invalid_argument("make_istep_target: empty theta set");
  if (method.kind == UpMethod::Kind::EPost && thetas.size() != 1)
    throw std::invalid_argument(
        "make_istep_target: E-Post is a mixture, not a single density; pointwise form "
        "exists only for a single draw");
  if ((method.kind == UpMethod::Kind::Point) && thetas.size() != 1)
    throw std::invalid_argument("make_istep_target: Point expects a single theta");

  const ObsModel model = ObsModel::build(spec, meas);
  const PriorBlock prior{priors};
  const int nc = spec.n_coeffs();
  if (thetas.values.cols() != nc + (thetas.includes_sigma_a ? 1 : 0))
    throw std::invalid_argument("make_istep_target: theta dimension mismatch");

  TargetDensity target;
  target.dim = prior.dim();
  target.transforms = prior.transforms();

  const Matrix values = thetas.values;
  const Vector weights = thetas.weights;
  const bool has_sigma_a = thetas.includes_sigma_a;
  const auto kind = method.kind;

  target.log_prob = [model, prior, values, weights, has_sigma_a, nc, kind](const Vector& x) {
    double lp = prior.log_prior(x);
    if (lp == -kInf) return lp;
    const double sigma_i = prior.sigma_i(x);
    const Vector omega = x.head(prior.priors.omega_dim());
    const long s = values.rows();

    if (kind == UpMethod::Kind::Point || kind == UpMethod::Kind::EPost || s == 1) {
      const double sa = has_sigma_a ? values(0, nc) : 0.0;
      const double v = model.joint(omega, values.row(0).head(nc).transpose(),
                                   combined_scale(sigma_i, sa));
      return v == -kInf ? -kInf : lp + v;
    }

    if (kind == UpMethod::Kind::ELogLik) {
      double acc = 0.0;
      for (long i = 0; i < s; ++i) {
        if (weights[i] <= 0.0) continue;
        const double sa = has_sigma_a ? values(i, nc) : 0.0;
        const double v = model.joint(omega, values.row(i).head(nc).transpose(),
                                     combined_scale(sigma_i, sa));
        if (v == -kInf) return -kInf;
        acc += weights[i] * v;
      }
      return lp + acc;
    }

    // E-Lik: streaming weighted log-sum-exp over per-draw joint likelihoods.
    double m = -kInf;
    double acc = 0.0;
    for (long i = 0; i < s; ++i) {
      if (weights[i] <= 0.0) continue;
      const double sa = has_sigma_a ? values(i, nc) : 0.0;
      const double v = model.joint(omega, values.row(i).head(nc).transpose(),
                                   combined_scale(sigma_i, sa));
      if (v == -kInf) continue;
      if (v <= m) {
        acc += weights[i] * std::exp(v - m);
      } else {
        acc = acc * std::exp(m - v) + weights[i];
        m = v;
      }
    }
    if (m == -kInf) return -kInf;
    return lp + m + std::log(acc);
  };
  return target;
}

std::function<double(double)> make_elogpost_logdensity(const SurrogateSpec& spec,
                                                       const ThetaSet& thetas,
                                                       const Measurements& meas,
                                                       const IStepPriors& priors) {
  if (priors.omega_dim() != 1 || priors.sigma_i_prior)
    throw std::invalid_argument(
        "make_elogpost_logdensity: 1-d omega with fixed sigma_I required");
  const ObsModel model = ObsModel::build(spec, meas);
  const int nc = spec.n_coeffs();
  const double sigma_i = priors.sigma_i_fixed;
  const DistSpec omega_prior = priors.omega_priors[0];

  // Per-draw normalizers C(theta_s) = int p(y | omega, theta_s) p(omega) domega.
  const double center = omega_prior.mean();
  const double spread = std::sqrt(omega_prior.variance());
  const double lo = omega_prior.family() == Family::TruncatedNormal ||
                            omega_prior.family() == Family::Uniform
                        ? omega_prior.lower()
                        : center - 10.0 * spread;
  const double hi = omega_prior.family() == Family::TruncatedNormal ||
                            omega_prior.family() == Family::Uniform
                        ? omega_prior.upper()
                        : center + 10.0 * spread;

  const long s = thetas.size();
  Vector log_norm(s);
  for (long i = 0; i < s; ++i) {
    const double sa = thetas.includes_sigma_a ? thetas.values(i, nc) : 0.0;
    const Vector c = thetas.values.row(i).head(nc).transpose();
    const double scale = combined_scale(sigma_i, sa);
    // Shift by the likelihood at the prior center to keep exp() in range.
    Vector w0(1);
    w0[0] = center;
    const double shift = model.joint(w0, c, scale);
    const double z = integrate_adaptive(
        [&](double w) {
          Vector wv(1);
          wv[0] = w;
          return std::exp(model.joint(wv, c, scale) - shift +
                          log_density(omega_prior, w));
        },
        lo, hi, 1e-10);
    log_norm[i] = shift + std::log(z);
  }

  const Matrix values = thetas.values;
  const Vector weights = thetas.weights;
  const bool has_sa = thetas.includes_sigma_a;
  return [model, values, weights, log_norm, has_sa, nc, sigma_i,
          omega_prior](double w) {
    Vector wv(1);
    wv[0] = w;
    const double lprior = log_density(omega_prior, wv[0]);
    if (lprior == -kInf) return -kInf;
    double acc = 0.0;
    for (long i = 0; i < values.rows(); ++i) {
      if (weights[i] <= 0.0) continue;
      const double sa = has_sa ? values(i, nc) : 0.0;
      const double v = model.joint(wv, values.row(i).head(nc).transpose(),
                                   combined_scale(sigma_i, sa));
      if (v == -kInf) return -kInf;
      acc += weights[i] * (lprior + v - log_norm[i]);
    }
    return acc;
  };
}

// ---------------------------------------------------------------------------
// Inference drivers

namespace {

IPosterior run_single_model(const UpMethod& method, const SurrogateSpec& spec,
                            const ThetaSet& thetas, const Measurements& meas,
                            const IStepPriors& priors, const IStepConfig& config,
                            const Rng& rng) {
  TargetDensity target = make_istep_target(method, spec, thetas, meas, priors);
  McmcConfig mcmc_config = config.mcmc;
  const PriorBlock prior{priors};
  if (!mcmc_config.init_sampler && !mcmc_config.init_points)
    mcmc_config.init_sampler = [prior](Rng& r) { return prior.draw_init(r); };
  const Chains chains = sample(target, mcmc_config, rng);

  IPosterior out;
  out.draws = chains.flat();
  out.includes_sigma_i = priors.sigma_i_prior.has_value();
  out.method = method;
  out.max_rhat = chains.n_chains() >= 2 ? split_rhat(chains).max() : 0.0;
  out.tpost_hash = hash_doubles(thetas.values.data(), thetas.values.size());
  out.seed = rng.seed();
  return out;
}

}  // namespace

IPosterior infer_point(const SurrogateSpec& spec, const TPosterior& tpost,
                       const Measurements& meas, const IStepPriors& priors,
                       const IStepConfig& config, const Rng& rng) {
  const SurrogateParams hat = point_estimate(tpost, config.estimator);
  ThetaSet single;
  const bool use_sa = hat.sigma_a.has_value() && config.propagate_sigma_a;
  single.values.resize(1, hat.c.size() + (use_sa ? 1 : 0));
  single.values.row(0).head(hat.c.size()) = hat.c.transpose();
  if (use_sa) single.values(0, hat.c.size()) = *hat.sigma_a;
  single.includes_sigma_a = use_sa;
  single.weights = Vector::Constant(1, 1.0);
  return run_single_model(UpMethod::point(config.estimator), spec, single, meas, priors, config,
                          rng);
}

IPosterior infer_elik(const SurrogateSpec& spec, const ThetaSet& thetas,
                      const Measurements& meas, const IStepPriors& priors,
                      const IStepConfig& config, const Rng& rng) {
  return run_single_model(UpMethod::elik(), spec, thetas, meas, priors, config, rng);
}

IPosterior infer_eloglik(const SurrogateSpec& spec, const ThetaSet& thetas,
                         const Measurements& meas, const IStepPriors& priors,
                         const IStepConfig& config, const Rng& rng) {
  return run_single_model(UpMethod::eloglik(), spec, thetas, meas, priors, config, rng);
}

IPosterior infer_epost(const SurrogateSpec& spec, const ThetaSet& thetas,
                       const Measurements& meas, const IStepPriors& priors,
                       const IStepConfig& config, const Rng& rng) {
  const long s = thetas.size();
  const int nc = spec.n_coeffs();
  std::vector<IPosterior> components(static_cast<std::size_t>(s));
  std::vector<char> failed(static_cast<std::size_t>(s), 0);

  parallel_for(static_cast<std::size_t>(s), config.jobs, [&](std::size_t i) {
    ThetaSet single;
    single.values = thetas.values.row(static_cast<long>(i));
    single.includes_sigma_a = thetas.includes_sigma_a;
    single.weights = Vector::Constant(1, 1.0);
    try {
      components[i] = run_single_model(UpMethod::epost(), spec, single, meas, priors, config,
                                       rng.fork(7000 + i));
    } catch (const std::exception&) {
      failed[i] = 1;
    }
  });

  long n_failed = 0;
  for (char f : failed) n_failed += f;
  if (static_cast<double>(n_failed) > config.max_component_failures * static_cast<double>(s))
    throw std::runtime_error("infer_epost: too many component fits failed (" +
                             std::to_string(n_failed) + " of " + std::to_string(s) + ")");

  // Pool: plain concatenation for equal weights, multinomial resampling to a
  // common pool size otherwise.
  const bool equal_weights = (thetas.weights.array() - thetas.weights[0]).abs().maxCoeff() < 1e-12;
  const int cols = priors.omega_dim() + (priors.sigma_i_prior ? 1 : 0);

  IPosterior out;
  out.method = UpMethod::epost();
  out.includes_sigma_i = priors.sigma_i_prior.has_value();
  out.tpost_hash = hash_doubles(thetas.values.data(), thetas.values.size());
  out.seed = rng.seed();
  out.n_failed_components = static_cast<int>(n_failed);
  double max_rhat = 0.0;
  for (long i = 0; i < s; ++i)
    if (!failed[static_cast<std::size_t>(i)])
      max_rhat = std::max(max_rhat, components[static_cast<std::size_t>(i)].max_rhat);
  out.max_rhat = max_rhat;

  if (equal_weights) {
    long total = 0;
    for (long i = 0; i < s; ++i)
      if (!failed[static_cast<std::size_t>(i)]) total += components[static_cast<std::size_t>(i)].size();
    out.draws.resize(total, cols);
    long row = 0;
    for (long i = 0; i < s; ++i) {
      if (failed[static_cast<std::size_t>(i)]) continue;
      const auto& d = components[static_cast<std::size_t>(i)].draws;
      out.draws.middleRows(row, d.rows()) = d;
      row += d.rows();
    }
    return out;
  }

  // Renormalize weights over surviving components, then resample.
  Vector w = thetas.weights;
  for (long i = 0; i < s; ++i)
    if (failed[static_cast<std::size_t>(i)]) w[i] = 0.0;
  w /= w.sum();
  long per_component = 0;
  for (long i = 0; i < s; ++i)
    if (!failed[static_cast<std::size_t>(i)])
      per_component = std::max(per_component, components[static_cast<std::size_t>(i)].size());
  const long total = per_component * s;

  Rng pool_rng = rng.fork(99991);
  out.draws.resize(total, cols);
  for (long t = 0; t < total; ++t) {
    double u = pool_rng.uniform01();
    long pick = 0;
    for (; pick < s - 1; ++pick) {
      u -= w[pick];
      if (u <= 0.0) break;
    }
    const auto& d = components[static_cast<std::size_t>(pick)].draws;
    const long j = std::min<long>(static_cast<long>(pool_rng.uniform01() * d.rows()), d.rows() - 1);
    out.draws.row(t) = d.row(j);
  }
  (void)nc;
  return out;
}

IPosterior infer(const UpMethod& method, const SurrogateSpec& spec, const ThetaSet& thetas,
                 const Measurements& meas, const IStepPriors& priors, const IStepConfig& config,
                 const Rng& rng) {
  switch (method.kind) {
    case UpMethod::Kind::Point: {
      // Reduce the theta set through a TPosterior-like point estimate.
      TPosterior t;
      t.draws = thetas.values;
      t.includes_sigma_a = thetas.includes_sigma_a;
      IStepConfig cfg = config;
      cfg.estimator = method.estimator;
      return infer_point(spec, t, meas, priors, cfg, rng);
    }
    case UpMethod::Kind::ELik:
      return infer_elik(spec, thetas, meas, priors, config, rng);
    case UpMethod::Kind::ELogLik:
      return infer_eloglik(spec, thetas, meas, priors, config, rng);
    case UpMethod::Kind::EPost:
      return infer_epost(spec, thetas, meas, priors, config, rng);
  }
  throw std::logic_error("infer: unreachable");
}

IPosterior infer_simulator(const SimulatorSpec& sim, const Measurements& meas,
                           const IStepPriors& priors, const IStepConfig& config, const Rng& rng) {
  const PriorBlock prior{priors};
  TargetDensity target;
  target.dim = prior.dim();
  target.transforms = prior.transforms();

  const Vector ys = meas.ys;
  const std::optional<Vector> times = meas.times;
  target.log_prob = [sim, prior, ys, times](const Vector& x) {
    double lp = prior.log_prior(x);
    if (lp == -kInf) return lp;
    const double sigma_i = prior.sigma_i(x);
    if (!(sigma_i > 0.0)) return -kInf;
    const Vector omega = x.head(prior.priors.omega_dim());
    if (ys.size() == 0) return lp;
    if (sim.kind == SimKind::Sir) {
      const SirTrajectory traj = sir_solve(sim, omega[0], omega[1], *times);
      for (long i = 0; i < ys.size(); ++i) {
        const double z = (ys[i] - traj.infected[i]) / sigma_i;
        lp += standard_normal_logpdf(z) - std::log(sigma_i);
      }
      return lp;
    }
    const double response = simulate(sim, omega);
    for (long i = 0; i < ys.size(); ++i) {
      const double z = (ys[i] - response) / sigma_i;
      lp += standard_normal_logpdf(z) - std::log(sigma_i);
    }
    return lp;
  };

  McmcConfig mcmc_config = config.mcmc;
  if (!mcmc_config.init_sampler && !mcmc_config.init_points)
    mcmc_config.init_sampler = [prior](Rng& r) { return prior.draw_init(r); };
  const Chains chains = sample(target, mcmc_config, rng);

  IPosterior out;
  out.draws = chains.flat();
  out.includes_sigma_i = priors.sigma_i_prior.has_value();
  out.method = UpMethod::point();
  out.max_rhat = chains.n_chains() >= 2 ? split_rhat(chains).max() : 0.0;
  out.seed = rng.seed();
  return out;
}

// ---------------------------------------------------------------------------
// Analytic / quadrature oracles (linear case, N_I = 1)

int GridDensity::count_local_maxima(double rel_threshold) const {
  const double peak = pdf.maxCoeff();
  int count = 0;
  for (long i = 1; i + 1 < pdf.size(); ++i)
    if (pdf[i] > pdf[i - 1] && pdf[i] >= pdf[i + 1] && pdf[i] > rel_threshold * peak) ++count;
  return count;
}

namespace {

double normal_lpdf(double x, double mu, double var) {
  const double d = x - mu;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

GridDensity grid_from_logdensity(const std::function<double(double)>& logf, double lo, double hi,
                                 int grid_n) {
  // Locate the peak and the effective support on a fine scan, then restrict
  // the quadrature there so arbitrarily narrow densities are resolved.
  const int scan_n = 4096;
  Vector scan(scan_n + 1);
  double peak = -kInf;
  for (int i = 0; i <= scan_n; ++i) {
    const double w = lo + (hi - lo) * i / scan_n;
    scan[i] = logf(w);
    peak = std::max(peak, scan[i]);
  }
  if (peak == -kInf)
    throw std::runtime_error("grid_from_logdensity: density is zero on the whole interval");
  int i_lo = 0, i_hi = scan_n;
  while (i_lo < scan_n && scan[i_lo] < peak - 46.0) ++i_lo;
  while (i_hi > 0 && scan[i_hi] < peak - 46.0) --i_hi;
  const double h = (hi - lo) / scan_n;
  const double lo_eff = std::max(lo, lo + (i_lo - 2) * h);
  const double hi_eff = std::min(hi, lo + (i_hi + 2) * h);

  auto f = [&](double w) { return std::exp(logf(w) - peak); };
  const double z = integrate_adaptive(f, lo_eff, hi_eff, 1e-10);
  const double m1 =
      integrate_adaptive([&](double w) { return w * f(w); }, lo_eff, hi_eff, 1e-10) / z;
  const double m2 = integrate_adaptive([&](double w) { return (w - m1) * (w - m1) * f(w); },
                                       lo_eff, hi_eff, 1e-10) /
                    z;

  GridDensity g;
  g.omega.resize(grid_n);
  g.pdf.resize(grid_n);
  for (int i = 0; i < grid_n; ++i) {
    g.omega[i] = lo_eff + (hi_eff - lo_eff) * i / (grid_n - 1);
    g.pdf[i] = f(g.omega[i]) / z;
  }
  g.mean = m1;
  g.sd = std::sqrt(m2);
  return g;
}

// log of the integral of exp(logf) over [lo, hi]: peak-shifted adaptive
// Simpson restricted to the effective support found on a scan.
double log_integral(const std::function<double(double)>& logf, double lo, double hi,
                    int scan_n = 1024) {
  Vector scan(scan_n + 1);
  double peak = -kInf;
  for (int i = 0; i <= scan_n; ++i) {
    scan[i] = logf(lo + (hi - lo) * i / scan_n);
    peak = std::max(peak, scan[i]);
  }
  if (peak == -kInf) return -kInf;
  int i_lo = 0, i_hi = scan_n;
  while (i_lo < scan_n && scan[i_lo] < peak - 46.0) ++i_lo;
  while (i_hi > 0 && scan[i_hi] < peak - 46.0) --i_hi;
  const double h = (hi - lo) / scan_n;
  const double lo_eff = std::max(lo, lo + (i_lo - 2) * h);
  const double hi_eff = std::min(hi, lo + (i_hi + 2) * h);
  const double z = integrate_adaptive([&](double x) { return std::exp(logf(x) - peak); },
                                      lo_eff, hi_eff, 1e-9);
  return peak + std::log(z);
}

// Widen the integration window (starting from the prior's +-8 sigma) until
// the density has decayed at both edges; mixture posteriors can carry mass
// well beyond the prior scale.
GridDensity grid_with_adaptive_range(const std::function<double(double)>& logf,
                                     const LinearIPriors& priors, int grid_n) {
  double half = 8.0 * priors.sigma_i0;
  for (int round = 0; round < 4; ++round) {
    const double lo = priors.mu_i0 - half;
    const double hi = priors.mu_i0 + half;
    double peak = -kInf;
    const int scan_n = 1024;
    for (int i = 0; i <= scan_n; ++i)
      peak = std::max(peak, logf(lo + (hi - lo) * i / scan_n));
    if (std::max(logf(lo), logf(hi)) < peak - 46.0)
      return grid_from_logdensity(logf, lo, hi, grid_n);
    half *= 2.0;
  }
  return grid_from_logdensity(logf, priors.mu_i0 - half, priors.mu_i0 + half, grid_n);
}

}  // namespace

NormalDensity analytic_point_linear(const AnalyticGaussian& tpost, double y,
                                    const LinearIPriors& priors) {
  const double mu1 = tpost.mean[0], mu2 = tpost.mean[1];
  const double prec0 = 1.0 / (priors.sigma_i0 * priors.sigma_i0);
  const double preci = 1.0 / (priors.sigma_i * priors.sigma_i);
  const double var = 1.0 / (prec0 + preci * mu2 * mu2);
  const double mean = var * (prec0 * priors.mu_i0 + preci * mu2 * (y - mu1));
  return {mean, std::sqrt(var)};
}

NormalDensity analytic_eloglik_linear(const AnalyticGaussian& tpost, double y,
                                      const LinearIPriors& priors) {
  const double mu1 = tpost.mean[0], mu2 = tpost.mean[1];
  const double s12 = tpost.cov(0, 1), s22 = tpost.cov(1, 1);
  const double prec0 = 1.0 / (priors.sigma_i0 * priors.sigma_i0);
  const double preci = 1.0 / (priors.sigma_i * priors.sigma_i);
  const double var = 1.0 / (prec0 + preci * (mu2 * mu2 + s22));
  const double mean = var * (prec0 * priors.mu_i0 + preci * (mu2 * y - s12 - mu1 * mu2));
  return {mean, std::sqrt(var)};
}

GridDensity quadrature_elik_linear(const AnalyticGaussian& tpost, double y,
                                   const LinearIPriors& priors, int grid_n) {
  const double mu1 = tpost.mean[0], mu2 = tpost.mean[1];
  const double s11 = tpost.cov(0, 0), s12 = tpost.cov(0, 1), s22 = tpost.cov(1, 1);
  const double vi = priors.sigma_i * priors.sigma_i;
  auto logf = [&](double w) {
    const double mean = mu1 + mu2 * w;
    const double var = s11 + 2.0 * s12 * w + s22 * w * w + vi;
    return normal_lpdf(w, priors.mu_i0, priors.sigma_i0 * priors.sigma_i0) +
           normal_lpdf(y, mean, var);
  };
  return grid_with_adaptive_range(logf, priors, grid_n);
}

// Unnormalized log density of the E-Post mixture at omega for the
// slope-intercept model: marginalize the per-draw normalized posterior over
// the T-posterior, N(omega | mu_i0, v0) * E_c[N(y | c0 + c1 w, vi) / Z(c)].
// For the slope-squared normalizer the intercept integrates out in closed
// form (its exponent stays strictly concave); the slope is handled by a
// log-domain 1-d quadrature. The full-dot variant couples the intercept to
// the normalizer variance and is integrated numerically in both coordinates.
std::function<double(double)> epost_linear_logdensity(const AnalyticGaussian& tpost, double y,
                                                      const LinearIPriors& priors,
                                                      EPostInnerVariance variant) {
  const double vi = priors.sigma_i * priors.sigma_i;
  const double v0 = priors.sigma_i0 * priors.sigma_i0;
  const double mu0 = tpost.mean[0], mu1 = tpost.mean[1];
  const double s00 = tpost.cov(0, 0), s01 = tpost.cov(0, 1), s11 = tpost.cov(1, 1);
  const double cond_var = s00 - s01 * s01 / s11;  // c0 | c1 under the T-posterior
  const double slope_sd = std::sqrt(s11);
  const double c1_lo = mu1 - 16.0 * slope_sd;
  const double c1_hi = mu1 + 16.0 * slope_sd;
  const double mu_i0 = priors.mu_i0;

  if (variant == EPostInnerVariance::SlopeSquared) {
    return [=](double w) {
      auto slope_integrand = [&](double c1) {
        const double a = mu0 + s01 / s11 * (c1 - mu1);  // E[c0 | c1]
        const double v_in = c1 * c1 * v0 + vi;
        const double lik_center = y - c1 * w;
        const double norm_center = y - c1 * mu_i0;
        // Quadratic form in c0 from likelihood x conditional / normalizer.
        const double alpha = 1.0 / vi + 1.0 / cond_var - 1.0 / v_in;
        const double beta = lik_center / vi + a / cond_var - norm_center / v_in;
        const double constant = -0.5 * (lik_center * lik_center / vi + a * a / cond_var -
                                        norm_center * norm_center / v_in);
        const double log_c0_integral =
            0.5 * std::log(2.0 * M_PI / alpha) + beta * beta / (2.0 * alpha) + constant -
            0.5 * std::log(2.0 * M_PI * vi) - 0.5 * std::log(2.0 * M_PI * cond_var) +
            0.5 * std::log(2.0 * M_PI * v_in);
        return normal_lpdf(c1, mu1, s11) + log_c0_integral;
      };
      return normal_lpdf(w, mu_i0, v0) + log_integral(slope_integrand, c1_lo, c1_hi, 2048);
    };
  }

  // Full-dot variant: nested numeric integration over (c0, c1).
  return [=](double w) {
    auto slope_integrand = [&](double c1) {
      const double a = mu0 + s01 / s11 * (c1 - mu1);
      const double lik_center = y - c1 * w;
      const double span = 12.0 * std::sqrt(std::max(cond_var, vi));
      const double lo0 = std::min(a, lik_center) - span;
      const double hi0 = std::max(a, lik_center) + span;
      auto intercept_integrand = [&](double c0) {
        const double v_in = (c0 * c0 + c1 * c1) * v0 + vi;
        return normal_lpdf(y, c0 + c1 * w, vi) + normal_lpdf(c0, a, cond_var) -
               normal_lpdf(y, c0 + c1 * mu_i0, v_in);
      };
      return normal_lpdf(c1, mu1, s11) + log_integral(intercept_integrand, lo0, hi0, 512);
    };
    return normal_lpdf(w, mu_i0, v0) + log_integral(slope_integrand, c1_lo, c1_hi, 512);
  };
}

GridDensity quadrature_epost_linear(const AnalyticGaussian& tpost, double y,
                                    const LinearIPriors& priors, EPostInnerVariance variant,
                                    int grid_n) {
  return grid_with_adaptive_range(epost_linear_logdensity(tpost, y, priors, variant), priors,
                                  grid_n);
}

NormalDensity analytic_point_slope(double mu_t1, double sigma_t1, double y,
                                   const LinearIPriors& priors) {
  (void)sigma_t1;
  const double prec0 = 1.0 / (priors.sigma_i0 * priors.sigma_i0);
  const double preci = 1.0 / (priors.sigma_i * priors.sigma_i);
  const double var = 1.0 / (prec0 + preci * mu_t1 * mu_t1);
  const double mean = var * (prec0 * priors.mu_i0 + preci * mu_t1 * y);
  return {mean, std::sqrt(var)};
}

NormalDensity analytic_eloglik_slope(double mu_t1, double sigma_t1, double y,
                                     const LinearIPriors& priors) {
  const double prec0 = 1.0 / (priors.sigma_i0 * priors.sigma_i0);
  const double preci = 1.0 / (priors.sigma_i * priors.sigma_i);
  const double var = 1.0 / (prec0 + preci * (mu_t1 * mu_t1 + sigma_t1 * sigma_t1));
  const double mean = var * (prec0 * priors.mu_i0 + preci * mu_t1 * y);
  return {mean, std::sqrt(var)};
}

GridDensity quadrature_elik_slope(double mu_t1, double sigma_t1, double y,
                                  const LinearIPriors& priors, int grid_n) {
  const double vi = priors.sigma_i * priors.sigma_i;
  auto logf = [&](double w) {
    const double var = w * w * sigma_t1 * sigma_t1 + vi;
    return normal_lpdf(w, priors.mu_i0, priors.sigma_i0 * priors.sigma_i0) +
           normal_lpdf(y, w * mu_t1, var);
  };
  return grid_with_adaptive_range(logf, priors, grid_n);
}

GridDensity quadrature_epost_slope(double mu_t1, double sigma_t1, double y,
                                   const LinearIPriors& priors, int grid_n) {
  const double vi = priors.sigma_i * priors.sigma_i;
  const double v0 = priors.sigma_i0 * priors.sigma_i0;
  const double vt = sigma_t1 * sigma_t1;
  const double c_lo = mu_t1 - 20.0 * sigma_t1;
  const double c_hi = mu_t1 + 20.0 * sigma_t1;
  const double mu_i0 = priors.mu_i0;

  auto logf = [=](double w) {
    auto integrand = [&](double c) {
      return normal_lpdf(y, c * w, vi) + normal_lpdf(c, mu_t1, vt) -
             normal_lpdf(y, c * mu_i0, c * c * v0 + vi);
    };
    return normal_lpdf(w, mu_i0, v0) + log_integral(integrand, c_lo, c_hi, 2048);
  };
  return grid_with_adaptive_range(logf, priors, grid_n);
}

LinearAnalyticResult analytic_linear_iposterior(const UpMethod& method,
                                                const AnalyticGaussian& tpost, double y,
                                                const LinearIPriors& priors) {
  LinearAnalyticResult r;
  switch (method.kind) {
    case UpMethod::Kind::Point:
      r.normal = analytic_point_linear(tpost, y, priors);
      break;
    case UpMethod::Kind::ELogLik:
      r.normal = analytic_eloglik_linear(tpost, y, priors);
      break;
    case UpMethod::Kind::ELik:
      r.grid = quadrature_elik_linear(tpost, y, priors);
      break;
    case UpMethod::Kind::EPost:
      r.grid = quadrature_epost_linear(tpost, y, priors);
      break;
  }
  return r;
}

}  // namespace twostep

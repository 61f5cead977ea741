#include "twostep/calibration.hpp"

#include "twostep/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace twostep {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

int rank_statistic(double omega_star, const Vector& draws, Rng& rng) {
  if (draws.size() == 0) throw std::invalid_argument("rank_statistic: empty draws");
  int greater = 0, ties = 0;
  for (long i = 0; i < draws.size(); ++i) {
    if (draws[i] > omega_star)
      ++greater;
    else if (draws[i] == omega_star)
      ++ties;
  }
  if (ties == 0) return greater;
  const int extra = static_cast<int>(rng.uniform01() * (ties + 1));
  return greater + std::min(extra, ties);
}

Vector thin_evenly(const Vector& draws, int k) {
  if (k < 1) throw std::invalid_argument("thin_evenly: k >= 1 required");
  const long n = draws.size();
  if (n <= k) return draws;
  Vector out(k);
  for (int i = 0; i < k; ++i) {
    const long idx = static_cast<long>((static_cast<double>(i) + 0.5) * n / k);
    out[i] = draws[std::min(idx, n - 1)];
  }
  return out;
}

double sharpness(const Vector& draws, double q) {
  if (draws.size() == 0) throw std::invalid_argument("sharpness: empty draws");
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("sharpness: q in (0,1) required");
  std::vector<double> v(draws.data(), draws.data() + draws.size());
  std::sort(v.begin(), v.end());
  auto quantile = [&v](double p) {
    const double h = p * (static_cast<double>(v.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = h - std::floor(h);
    return v[lo] + frac * (v[hi] - v[lo]);
  };
  return quantile(0.5 + 0.5 * q) - quantile(0.5 - 0.5 * q);
}

// ---------------------------------------------------------------------------
// Binomial tail machinery shared by the gamma statistic, its calibration
// threshold, and the envelope bands.

namespace {

// log CDF tables of Binomial(n_ranks, p_r) for each ECDF evaluation point
// r = 0..k_eff-1 with p_r = (r+1)/(k_eff+1).
struct BinomialTables {
  int n_ranks;
  int k_eff;
  Matrix logcdf;  // k_eff x (n_ranks + 1)

  BinomialTables(int n, int k) : n_ranks(n), k_eff(k), logcdf(k, n + 1) {
    Vector logpmf(n + 1);
    for (int r = 0; r < k; ++r) {
      const double p = static_cast<double>(r + 1) / (k + 1);
      const double lp = std::log(p), lq = std::log1p(-p);
      for (int c = 0; c <= n; ++c)
        logpmf[c] = std::lgamma(n + 1.0) - std::lgamma(c + 1.0) - std::lgamma(n - c + 1.0) +
                    c * lp + (n - c) * lq;
      // Running log-sum-exp prefix.
      double m = logpmf[0], acc = 1.0;
      logcdf(r, 0) = logpmf[0];
      for (int c = 1; c <= n; ++c) {
        const double v = logpmf[c];
        if (v <= m) {
          acc += std::exp(v - m);
        } else {
          acc = acc * std::exp(m - v) + 1.0;
          m = v;
        }
        logcdf(r, c) = m + std::log(acc);
      }
    }
  }

  // log of the two-sided tail probability 2*min(P(X<=c), P(X>=c)), capped at 0.
  double log_two_sided(int r, int c) const {
    const double log_le = std::min(0.0, logcdf(r, c));
    double log_ge;
    if (c == 0) {
      log_ge = 0.0;
    } else {
      const double cdf_below = std::exp(std::min(0.0, logcdf(r, c - 1)));
      log_ge = cdf_below < 1.0 ? std::log1p(-cdf_below) : -kInf;
    }
    return std::min(0.0, M_LN2 + std::min(log_le, log_ge));
  }

  double log_gamma_from_counts(const std::vector<int>& counts) const {
    double lg = 0.0;
    for (int r = 0; r < k_eff; ++r) lg = std::min(lg, log_two_sided(r, counts[static_cast<std::size_t>(r)]));
    return lg;
  }
};

std::vector<int> ecdf_counts(const std::vector<int>& ranks, int k_eff) {
  std::vector<int> hist(static_cast<std::size_t>(k_eff) + 1, 0);
  for (int rank : ranks) {
    if (rank < 0 || rank > k_eff) throw std::invalid_argument("ecdf_counts: rank out of range");
    ++hist[static_cast<std::size_t>(rank)];
  }
  std::vector<int> counts(static_cast<std::size_t>(k_eff), 0);
  int acc = 0;
  for (int r = 0; r < k_eff; ++r) {
    acc += hist[static_cast<std::size_t>(r)];
    counts[static_cast<std::size_t>(r)] = acc;
  }
  return counts;
}

std::vector<double> simulate_log_gammas(const BinomialTables& tables, int n_sim, Rng& rng) {
  std::vector<double> sims(static_cast<std::size_t>(n_sim));
  std::vector<int> ranks(static_cast<std::size_t>(tables.n_ranks));
  for (int s = 0; s < n_sim; ++s) {
    for (auto& r : ranks)
      r = std::min(tables.k_eff,
                   static_cast<int>(rng.uniform01() * (tables.k_eff + 1)));
    sims[static_cast<std::size_t>(s)] = tables.log_gamma_from_counts(ecdf_counts(ranks, tables.k_eff));
  }
  return sims;
}

double quantile_of(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = p * (static_cast<double>(v.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - std::floor(h)) * (v[hi] - v[lo]);
}

}  // namespace

double log_gamma_statistic(const std::vector<int>& ranks, int k_eff) {
  if (ranks.empty()) throw std::invalid_argument("log_gamma_statistic: empty ranks");
  const BinomialTables tables(static_cast<int>(ranks.size()), k_eff);
  return tables.log_gamma_from_counts(ecdf_counts(ranks, k_eff));
}

double log_gamma_threshold(double confidence, int n_ranks, int k_eff, int n_sim, Rng& rng) {
  if (!(confidence > 0.0 && confidence < 1.0))
    throw std::invalid_argument("log_gamma_threshold: confidence in (0,1) required");
  const BinomialTables tables(n_ranks, k_eff);
  const std::vector<double> sims = simulate_log_gammas(tables, n_sim, rng);
  return quantile_of(sims, 1.0 - confidence);
}

EcdfEnvelope ecdf_envelope(const std::vector<int>& ranks, int k_eff, double confidence,
                           int n_sim, Rng& rng) {
  if (ranks.empty()) throw std::invalid_argument("ecdf_envelope: empty ranks");
  const int n = static_cast<int>(ranks.size());
  const BinomialTables tables(n, k_eff);

  EcdfEnvelope env;
  env.eval.resize(k_eff);
  env.lower.resize(k_eff);
  env.upper.resize(k_eff);
  env.ecdf_diff.resize(k_eff);

  const std::vector<int> counts = ecdf_counts(ranks, k_eff);
  env.log_gamma = tables.log_gamma_from_counts(counts);
  const std::vector<double> sims = simulate_log_gammas(tables, n_sim, rng);
  env.threshold = quantile_of(sims, 1.0 - confidence);

  for (int r = 0; r < k_eff; ++r) {
    const double p = static_cast<double>(r + 1) / (k_eff + 1);
    env.eval[r] = p;
    env.ecdf_diff[r] = static_cast<double>(counts[static_cast<std::size_t>(r)]) / n - p;
    // Band: counts whose two-sided tail stays above the calibrated gamma.
    int lo = 0;
    while (lo <= n && tables.log_two_sided(r, lo) < env.threshold) ++lo;
    int hi = n;
    while (hi >= 0 && tables.log_two_sided(r, hi) < env.threshold) --hi;
    env.lower[r] = static_cast<double>(std::min(lo, n)) / n - p;
    env.upper[r] = static_cast<double>(std::max(hi, 0)) / n - p;
  }
  return env;
}

// ---------------------------------------------------------------------------
// SBC driver

namespace {

std::vector<Vector> sbc_design(const SbcConfig& cfg) {
  if (cfg.simulator.input_dim() == 1) {
    const std::vector<double> pts = halton_design_1d(cfg.n_t);
    std::vector<Vector> design;
    for (double p : pts) {
      Vector v(1);
      v[0] = p;
      design.push_back(v);
    }
    return design;
  }
  if (cfg.surrogate.input_bounds.size() != 3)
    throw std::invalid_argument("sbc_run: SIR surrogate needs 3 input bounds");
  std::array<std::pair<double, double>, 3> bounds;
  for (int d = 0; d < 3; ++d) bounds[static_cast<std::size_t>(d)] = cfg.surrogate.input_bounds[static_cast<std::size_t>(d)];
  return sobol_design_3d(cfg.n_t, bounds);
}

}  // namespace

std::vector<SbcRecord> sbc_run(const SbcConfig& cfg, const Rng& rng) {
  if (cfg.n_t_trials < 1 || cfg.n_i_trials < 1)
    throw std::invalid_argument("sbc_run: trial counts >= 1 required");
  const int omega_dim = cfg.priors.omega_dim();

  // Phase 1: train one surrogate per T-trial.
  std::vector<ThetaSet> thetas(static_cast<std::size_t>(cfg.n_t_trials));
  std::vector<TPosterior> tposts(static_cast<std::size_t>(cfg.n_t_trials));
  parallel_for(static_cast<std::size_t>(cfg.n_t_trials), cfg.jobs, [&](std::size_t t) {
    Rng rng_t = rng.fork(100 + t);
    if (cfg.training == SbcTraining::Cheat) {
      tposts[t] = TPosterior::point_mass(cfg.cheat_coeffs);
    } else {
      Rng data_rng = rng_t.fork(1);
      const TrainingDataset data =
          generate_training_data(cfg.simulator, sbc_design(cfg), cfg.sigma_s, data_rng);
      tposts[t] = train_mcmc(cfg.surrogate, data, cfg.train_config, rng_t.fork(2));
    }
    if (cfg.n_clusters && *cfg.n_clusters < tposts[t].n_draws()) {
      Rng cluster_rng = rng_t.fork(3);
      thetas[t] = cluster_draws(tposts[t], *cfg.n_clusters, cluster_rng).to_theta_set();
    } else {
      thetas[t] = ThetaSet::from_tposterior(tposts[t], cfg.istep.propagate_sigma_a);
    }
  });

  // Phase 2: independent I-trials over all (t, i) pairs.
  const int total = cfg.n_t_trials * cfg.n_i_trials;
  std::vector<std::vector<SbcRecord>> per_trial(static_cast<std::size_t>(total));
  parallel_for(static_cast<std::size_t>(total), cfg.jobs, [&](std::size_t job) {
    const int t = static_cast<int>(job) / cfg.n_i_trials;
    const int i = static_cast<int>(job) % cfg.n_i_trials;
    Rng rng_ti = rng.fork(100 + t).fork(50000 + i);

    Vector omega_star(omega_dim);
    for (int d = 0; d < omega_dim; ++d)
      omega_star[d] = draw(cfg.priors.omega_priors[static_cast<std::size_t>(d)], rng_ti);
    double sigma_star = cfg.priors.sigma_i_fixed;
    if (cfg.priors.sigma_i_prior) sigma_star = draw(*cfg.priors.sigma_i_prior, rng_ti);

    std::optional<DistSpec> noise;
    if (cfg.simulator.kind == SimKind::Sir) {
      noise = DistSpec::neg_binomial(1.0, cfg.negbin_phi.value_or(9.6));
    } else if (sigma_star > 0.0) {
      noise = DistSpec::normal(0.0, sigma_star);
    }
    const Measurements meas =
        generate_measurements(cfg.simulator, omega_star, noise, cfg.n_i, rng_ti);

    std::vector<SbcRecord>& recs = per_trial[job];
    recs.resize(static_cast<std::size_t>(omega_dim));
    for (int d = 0; d < omega_dim; ++d) {
      recs[static_cast<std::size_t>(d)].t_trial = t;
      recs[static_cast<std::size_t>(d)].i_trial = i;
      recs[static_cast<std::size_t>(d)].dim = d;
      recs[static_cast<std::size_t>(d)].omega_star = omega_star[d];
      recs[static_cast<std::size_t>(d)].k_eff = cfg.k_eff;
    }
    try {
      IStepConfig istep = cfg.istep;
      istep.jobs = 1;  // outer loop already parallel
      const IPosterior ipost = infer(cfg.method, cfg.surrogate, thetas[static_cast<std::size_t>(t)],
                                     meas, cfg.priors, istep, rng_ti.fork(7));
      Rng tie_rng = rng_ti.fork(8);
      for (int d = 0; d < omega_dim; ++d) {
        const Vector thinned = thin_evenly(ipost.draws.col(d), cfg.k_eff);
        recs[static_cast<std::size_t>(d)].rank = rank_statistic(omega_star[d], thinned, tie_rng);
        recs[static_cast<std::size_t>(d)].k_eff = static_cast<int>(thinned.size());
        recs[static_cast<std::size_t>(d)].rhat_max = ipost.max_rhat;
        recs[static_cast<std::size_t>(d)].ok = true;
      }
    } catch (const std::exception&) {
      for (int d = 0; d < omega_dim; ++d) recs[static_cast<std::size_t>(d)].ok = false;
    }
  });

  std::vector<SbcRecord> records;
  int failures = 0;
  for (const auto& recs : per_trial) {
    if (!recs.empty() && !recs[0].ok) ++failures;
    records.insert(records.end(), recs.begin(), recs.end());
  }
  if (static_cast<double>(failures) > cfg.max_fail_fraction * total)
    throw std::runtime_error("sbc_run: " + std::to_string(failures) + " of " +
                             std::to_string(total) + " trials failed");
  return records;
}

std::vector<int> collect_ranks(const std::vector<SbcRecord>& records, int dim) {
  std::vector<int> ranks;
  for (const auto& r : records)
    if (r.ok && r.dim == dim) ranks.push_back(r.rank);
  return ranks;
}

}  // namespace twostep

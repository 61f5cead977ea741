#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "twostep/discrete.hpp"
#include "twostep/istep.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace twostep;

namespace {

Vector vec1(double x) {
  Vector v(1);
  v[0] = x;
  return v;
}

TrainingDataset table2_data() {
  TrainingDataset data;
  data.inputs.resize(2, 1);
  data.inputs << -0.9, -0.3;
  data.noise_hypers = Vector::Zero(2);
  data.outputs.resize(2);
  data.outputs << -1.3, -0.1;
  return data;
}

GaussianPrior table2_prior() {
  GaussianPrior p;
  p.mean = Vector::Zero(2);
  p.cov = 100.0 * Matrix::Identity(2, 2);
  return p;
}

// Table 2 I-step: single measurement y_I = M(-0.5) = -0.5, prior N(0,1),
// fixed sigma_I = 0.1.
Measurements table2_measurement() {
  Measurements m;
  m.ys = Vector::Constant(1, -0.5);
  m.meta = TruthMeta{vec1(-0.5), 0.1};
  return m;
}

IStepPriors table2_ipriors() {
  IStepPriors p;
  p.omega_priors = {DistSpec::normal(0.0, 1.0)};
  p.sigma_i_fixed = 0.1;
  return p;
}

LinearIPriors table2_linear_priors() { return {0.0, 1.0, 0.1}; }

double sample_sd(const Vector& v) {
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / (v.size() - 1));
}

double ks_statistic(Vector a, Vector b) {
  std::sort(a.data(), a.data() + a.size());
  std::sort(b.data(), b.data() + b.size());
  double d = 0.0;
  long i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                             static_cast<double>(j) / b.size()));
  }
  return d;
}

IStepConfig quick_config(int n_post = 3000) {
  IStepConfig c;
  c.mcmc.n_chains = 4;
  c.mcmc.n_warmup = 1000;
  c.mcmc.n_post = n_post;
  return c;
}

// Max deviation of two probe vectors after centering each to zero mean:
// zero iff the functions differ by an additive constant.
double centered_deviation(const Vector& a, const Vector& b) {
  const Vector ca = a.array() - a.mean();
  const Vector cb = b.array() - b.mean();
  return (ca - cb).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("point estimators") {
  TPosterior t;
  t.draws.resize(3, 1);
  t.draws << 1.0, 2.0, 30.0;
  CHECK(point_estimate(t, PointEstimator::Median).c[0] == 2.0);
  CHECK(point_estimate(t, PointEstimator::Mean).c[0] == doctest::Approx(11.0));

  t.logprobs.resize(3);
  t.logprobs << -5.0, -1.0, -9.0;
  CHECK(point_estimate(t, PointEstimator::ModeProxy).c[0] == 2.0);

  const TPosterior conj = train_conjugate_linear(table2_data(), table2_prior(), 0.1);
  const SurrogateParams mean_est = point_estimate(conj, PointEstimator::Mean);
  CHECK(mean_est.c == conj.analytic->mean);
}

TEST_CASE("analytic point posterior matches table 2 and a direct quadrature of the joint") {
  const TPosterior t = train_conjugate_linear(table2_data(), table2_prior(), 0.1);
  const NormalDensity point = analytic_point_linear(*t.analytic, -0.5, table2_linear_priors());
  CHECK(point.mean == doctest::Approx(-0.499).epsilon(2e-3));
  CHECK(point.sd == doctest::Approx(0.050).epsilon(2e-2));

  // Independent check: grid quadrature of prior(omega) * N(y | mu1 + mu2 w, sigma_i^2).
  const double mu1 = t.analytic->mean[0], mu2 = t.analytic->mean[1];
  double z = 0.0, m1 = 0.0, m2 = 0.0;
  const int n = 400000;
  for (int i = 0; i < n; ++i) {
    const double w = -8.0 + 16.0 * (i + 0.5) / n;
    const double r = (-0.5 - mu1 - mu2 * w) / 0.1;
    const double lp = -0.5 * w * w - 0.5 * r * r;
    const double wgt = std::exp(lp);
    z += wgt;
    m1 += wgt * w;
    m2 += wgt * w * w;
  }
  m1 /= z;
  m2 = m2 / z - m1 * m1;
  CHECK(point.mean == doctest::Approx(m1).epsilon(1e-6));
  CHECK(point.sd == doctest::Approx(std::sqrt(m2)).epsilon(1e-6));
}

TEST_CASE("point is sigma_a invariant in the flat-prior limit") {
  GaussianPrior flat;
  flat.mean = Vector::Zero(2);
  flat.cov = 1e8 * Matrix::Identity(2, 2);
  std::vector<NormalDensity> results;
  for (double sa : {0.1, 0.5, 1.0}) {
    const TPosterior t = train_conjugate_linear(table2_data(), flat, sa);
    results.push_back(analytic_point_linear(*t.analytic, -0.5, table2_linear_priors()));
  }
  for (std::size_t i = 1; i < results.size(); ++i) {
    CHECK(results[i].mean == doctest::Approx(results[0].mean).epsilon(1e-6));
    CHECK(results[i].sd == doctest::Approx(results[0].sd).epsilon(1e-6));
  }
}

TEST_CASE("e-log-lik variance shrinks as the T-posterior widens") {
  const TPosterior t = train_conjugate_linear(table2_data(), table2_prior(), 0.5);
  AnalyticGaussian g = *t.analytic;
  double prev = INFINITY;
  for (double s22 : {0.01, 0.05, 0.2, 1.0, 5.0}) {
    g.cov(1, 1) = s22;
    const NormalDensity d = analytic_eloglik_linear(g, -0.5, table2_linear_priors());
    CHECK(d.sd < prev);
    prev = d.sd;
  }
  // And never wider than Point with the same mean vector.
  const NormalDensity point = analytic_point_linear(*t.analytic, -0.5, table2_linear_priors());
  const NormalDensity ell = analytic_eloglik_linear(*t.analytic, -0.5, table2_linear_priors());
  CHECK(ell.sd < point.sd);
}

TEST_CASE("mcmc point inference matches the analytic posterior within 2%") {
  Rng rng(101, 0);
  const TPosterior t = train_conjugate_linear(table2_data(), table2_prior(), 0.1, 1000, &rng);
  const IPosterior ip = infer_point(SurrogateSpec::linear_lm(), t, table2_measurement(),
                                    table2_ipriors(), quick_config(8000), Rng(102, 0));
  const NormalDensity oracle = analytic_point_linear(*t.analytic, -0.5, table2_linear_priors());
  CHECK(std::abs(ip.draws.col(0).mean() - oracle.mean) < 0.02 * std::abs(oracle.mean));
  CHECK(std::abs(sample_sd(ip.draws.col(0)) - oracle.sd) < 0.02 * oracle.sd);
  CHECK(ip.max_rhat < 1.05);
}

TEST_CASE("e-log-lik mcmc matches the closed form within 2%") {
  Rng rng(103, 0);
  const TPosterior t = train_conjugate_linear(table2_data(), table2_prior(), 0.5, 400, &rng);
  // Build the theta set from the analytic posterior itself so the MCMC’s
  // target uses exact moments: draws enter only through the density sums.
  ThetaSet thetas = ThetaSet::from_tposterior(t);
  const IPosterior ip = infer_eloglik(SurrogateSpec::linear_lm(), thetas, table2_measurement(),
                                      table2_ipriors(), quick_config(8000), Rng(104, 0));
  // The MC oracle uses the same draws, i.e. the sample moments.
  const Vector mean_vec = t.draws.colwise().mean();
  Matrix centered = t.draws.rowwise() - mean_vec.transpose();
  AnalyticGaussian sample_post;
  sample_post.mean = mean_vec;
  sample_post.cov = centered.transpose() * centered / static_cast<double>(t.n_draws());
  const NormalDensity oracle =
      analytic_eloglik_linear(sample_post, -0.5, table2_linear_priors());
  CHECK(std::abs(ip.draws.col(0).mean() - oracle.mean) < 0.02 * std::abs(oracle.mean));
  CHECK(std::abs(sample_sd(ip.draws.col(0)) - oracle.sd) < 0.02 * oracle.sd);
}

TEST_CASE("e-lik posterior is wider than point at sigma_a = 1") {
  Rng rng(105, 0);
  const TPosterior t = train_conjugate_linear(table2_data(), table2_prior(), 1.0, 1000, &rng);
  const IPosterior point = infer_point(SurrogateSpec::linear_lm(), t, table2_measurement(),
                                       table2_ipriors(), quick_config(), Rng(106, 0));
  const IPosterior elik =
      infer_elik(SurrogateSpec::linear_lm(), ThetaSet::from_tposterior(t), table2_measurement(),
                 table2_ipriors(), quick_config(), Rng(107, 0));
  CHECK(sample_sd(elik.draws.col(0)) > 1.1 * sample_sd(point.draws.col(0)));
}

TEST_CASE("e-post and e-lik quadrature oracles are close but not identical") {
  const TPosterior t = train_conjugate_linear(table2_data(), table2_prior(), 1.0);
  const GridDensity elik = quadrature_elik_linear(*t.analytic, -0.5, table2_linear_priors());
  const GridDensity epost = quadrature_epost_linear(*t.analytic, -0.5, table2_linear_priors());
  CHECK(std::abs(epost.mean - elik.mean) < 0.05);
  CHECK(std::abs(epost.sd - elik.sd) / elik.sd < 0.15);
  CHECK((epost.pdf - elik.pdf).cwiseAbs().maxCoeff() > 1e-4);
}

TEST_CASE("e-post mcmc matches its quadrature oracle") {
  Rng rng(108, 0);
  const TPosterior t = train_conjugate_linear(table2_data(), table2_prior(), 1.0, 600, &rng);
  ThetaSet thetas = ThetaSet::from_tposterior(t);
  IStepConfig config = quick_config(400);
  config.mcmc.n_chains = 2;
  config.mcmc.n_warmup = 500;
  config.jobs = 2;
  const IPosterior ep = infer_epost(SurrogateSpec::linear_lm(), thetas, table2_measurement(),
                                    table2_ipriors(), config, Rng(109, 0));
  CHECK(ep.size() == 600 * 800);
  CHECK(ep.n_failed_components == 0);
  const GridDensity oracle = quadrature_epost_linear(*t.analytic, -0.5, table2_linear_priors());
  CHECK(std::abs(ep.draws.col(0).mean() - oracle.mean) < 0.03);
  CHECK(std::abs(sample_sd(ep.draws.col(0)) - oracle.sd) / oracle.sd < 0.08);
}

TEST_CASE("degenerate T-posterior collapses all four methods") {
  Vector c(2);
  c << 0.5, 2.0;
  const TPosterior t = TPosterior::point_mass(c);
  const ThetaSet thetas = ThetaSet::from_tposterior(t);
  const Measurements meas = table2_measurement();
  const IStepPriors priors = table2_ipriors();
  const SurrogateSpec spec = SurrogateSpec::linear_lm();

  // Pointwise log densities agree up to a constant.
  std::vector<TargetDensity> targets;
  targets.push_back(make_istep_target(UpMethod::point(), spec, thetas, meas, priors));
  targets.push_back(make_istep_target(UpMethod::epost(), spec, thetas, meas, priors));
  targets.push_back(make_istep_target(UpMethod::elik(), spec, thetas, meas, priors));
  targets.push_back(make_istep_target(UpMethod::eloglik(), spec, thetas, meas, priors));
  Vector probes(100), base(100), other(100);
  for (int i = 0; i < 100; ++i) probes[i] = -2.0 + 4.0 * i / 99.0;
  for (int i = 0; i < 100; ++i) base[i] = targets[0].log_prob(vec1(probes[i]));
  for (std::size_t m = 1; m < targets.size(); ++m) {
    for (int i = 0; i < 100; ++i) other[i] = targets[m].log_prob(vec1(probes[i]));
    CHECK(centered_deviation(base, other) < 1e-8);
  }

  // Draw sets match in distribution.
  std::vector<IPosterior> ips;
  ips.push_back(infer_point(spec, t, meas, priors, quick_config(4000), Rng(110, 0)));
  ips.push_back(infer_elik(spec, thetas, meas, priors, quick_config(4000), Rng(111, 0)));
  ips.push_back(infer_eloglik(spec, thetas, meas, priors, quick_config(4000), Rng(112, 0)));
  ips.push_back(infer_epost(spec, thetas, meas, priors, quick_config(4000), Rng(113, 0)));
  for (std::size_t a = 0; a < ips.size(); ++a)
    for (std::size_t b = a + 1; b < ips.size(); ++b)
      CHECK(ks_statistic(ips[a].draws.col(0), ips[b].draws.col(0)) < 0.05);
}

TEST_CASE("empty measurements recover the prior") {
  Vector c(2);
  c << 0.5, 2.0;
  const TPosterior t = TPosterior::point_mass(c);
  Measurements empty;
  empty.ys.resize(0);
  const IPosterior ip = infer_point(SurrogateSpec::linear_lm(), t, empty, table2_ipriors(),
                                    quick_config(5000), Rng(114, 0));
  Rng prior_rng(115, 0);
  Vector prior_draws(20000);
  for (long i = 0; i < prior_draws.size(); ++i)
    prior_draws[i] = draw(DistSpec::normal(0.0, 1.0), prior_rng);
  CHECK(ks_statistic(ip.draws.col(0), prior_draws) < 0.05);
}

TEST_CASE("clustering: singleton, full, and weighted-mean identities") {
  Rng rng(116, 0);
  TPosterior t;
  t.draws.resize(12, 2);
  for (long i = 0; i < 12; ++i) {
    t.draws(i, 0) = draw_standard_normal(rng);
    t.draws(i, 1) = 2.0 + 0.5 * draw_standard_normal(rng);
  }

  // L = 1: centroid is the mean.
  Rng r1(117, 0);
  const ClusterSet one = cluster_draws(t, 1, r1);
  CHECK(one.size() == 1);
  CHECK(one.weights[0] == 1.0);
  CHECK((one.centroids.row(0).transpose() - t.draws.colwise().mean().transpose())
            .cwiseAbs()
            .maxCoeff() < 1e-12);

  // L = S with distinct draws: centroids are the draws, weights 1/S.
  Rng r2(118, 0);
  const ClusterSet full = cluster_draws(t, 12, r2);
  CHECK(full.size() == 12);
  for (long k = 0; k < 12; ++k) CHECK(full.weights[k] == doctest::Approx(1.0 / 12.0));
  for (long i = 0; i < 12; ++i) {
    double best = INFINITY;
    for (long k = 0; k < 12; ++k)
      best = std::min(best, (full.centroids.row(k) - t.draws.row(i)).norm());
    CHECK(best < 1e-12);
  }

  // Law of total expectation: weighted centroid mean equals the draw mean.
  Rng r3(119, 0);
  const ClusterSet mid = cluster_draws(t, 4, r3);
  CHECK(mid.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
  const Vector weighted = mid.centroids.transpose() * mid.weights;
  CHECK((weighted - t.draws.colwise().mean().transpose()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("clustered e-log-lik converges to the unclustered density") {
  Rng rng(120, 0);
  const TPosterior t = train_conjugate_linear(table2_data(), table2_prior(), 0.5, 64, &rng);
  const ThetaSet full = ThetaSet::from_tposterior(t);
  const Measurements meas = table2_measurement();
  const IStepPriors priors = table2_ipriors();
  const SurrogateSpec spec = SurrogateSpec::linear_lm();

  const TargetDensity base = make_istep_target(UpMethod::eloglik(), spec, full, meas, priors);
  auto deviation = [&](long n_clusters) {
    Rng crng(121, 0);
    const ClusterSet cs = cluster_draws(t, n_clusters, crng);
    const TargetDensity clustered =
        make_istep_target(UpMethod::eloglik(), spec, cs.to_theta_set(), meas, priors);
    Vector a(100), b(100);
    for (int i = 0; i < 100; ++i) {
      const double w = -2.0 + 4.0 * i / 99.0;
      a[i] = base.log_prob(vec1(w));
      b[i] = clustered.log_prob(vec1(w));
    }
    return centered_deviation(a, b);
  };
  const double dev_full = deviation(64);
  const double dev_quarter = deviation(16);
  CHECK(dev_full < 1e-10);
  CHECK(dev_full <= dev_quarter);

  // Same fidelity for the E-Lik mixture density.
  Rng crng(122, 0);
  const ClusterSet cs = cluster_draws(t, 64, crng);
  const TargetDensity elik_full = make_istep_target(UpMethod::elik(), spec, full, meas, priors);
  const TargetDensity elik_clustered =
      make_istep_target(UpMethod::elik(), spec, cs.to_theta_set(), meas, priors);
  Vector a(100), b(100);
  for (int i = 0; i < 100; ++i) {
    const double w = -2.0 + 4.0 * i / 99.0;
    a[i] = elik_full.log_prob(vec1(w));
    b[i] = elik_clustered.log_prob(vec1(w));
  }
  CHECK(centered_deviation(a, b) < 1e-10);
}

TEST_CASE("single-draw e-lik and e-log-lik reduce to point") {
  Rng rng(123, 0);
  const TPosterior t = train_conjugate_linear(table2_data(), table2_prior(), 0.5, 1, &rng);
  const ThetaSet single = ThetaSet::from_tposterior(t);
  const SurrogateSpec spec = SurrogateSpec::linear_lm();
  const Measurements meas = table2_measurement();
  const IStepPriors priors = table2_ipriors();

  const TargetDensity point = make_istep_target(UpMethod::point(), spec, single, meas, priors);
  const TargetDensity elik = make_istep_target(UpMethod::elik(), spec, single, meas, priors);
  const TargetDensity ell = make_istep_target(UpMethod::eloglik(), spec, single, meas, priors);
  for (int i = 0; i < 50; ++i) {
    const double w = -3.0 + 6.0 * i / 49.0;
    CHECK(point.log_prob(vec1(w)) == doctest::Approx(elik.log_prob(vec1(w))).epsilon(1e-13));
    CHECK(point.log_prob(vec1(w)) == doctest::Approx(ell.log_prob(vec1(w))).epsilon(1e-13));
  }
}

TEST_CASE("e-log-post equals e-log-lik up to a constant") {
  Rng rng(124, 0);
  const TPosterior t = train_conjugate_linear(table2_data(), table2_prior(), 0.5, 50, &rng);
  const ThetaSet thetas = ThetaSet::from_tposterior(t);
  const SurrogateSpec spec = SurrogateSpec::linear_lm();
  const Measurements meas = table2_measurement();
  const IStepPriors priors = table2_ipriors();

  const auto elogpost = make_elogpost_logdensity(spec, thetas, meas, priors);
  const TargetDensity ell = make_istep_target(UpMethod::eloglik(), spec, thetas, meas, priors);
  Vector a(100), b(100);
  for (int i = 0; i < 100; ++i) {
    const double w = -3.0 + 6.0 * i / 99.0;
    a[i] = elogpost(w);
    b[i] = ell.log_prob(vec1(w));
  }
  CHECK(centered_deviation(a, b) < 1e-9);
}

TEST_CASE("slope-only e-lik density becomes bimodal for wide T-posteriors") {
  // Wide slope posterior straddling zero: both signs of the slope explain
  // the measurement, producing two symmetric explanations of y.
  const LinearIPriors priors{0.0, 1.0, 0.1};
  const GridDensity narrow = quadrature_elik_slope(1.0, 0.05, 1.0, priors);
  CHECK(narrow.count_local_maxima() == 1);
  const GridDensity wide = quadrature_elik_slope(1.0, 2.5, 1.0, priors);
  CHECK(wide.count_local_maxima() == 2);
  const GridDensity wide_epost = quadrature_epost_slope(1.0, 2.5, 1.0, priors);
  CHECK(wide_epost.count_local_maxima() == 2);
}

TEST_CASE("slope-only analytic forms match their linear counterparts") {
  const LinearIPriors priors{0.3, 0.8, 0.2};
  const NormalDensity p = analytic_point_slope(1.7, 0.4, 0.9, priors);
  const NormalDensity e = analytic_eloglik_slope(1.7, 0.4, 0.9, priors);
  // Embed the slope-only model as a linear model with a pinned intercept.
  AnalyticGaussian g;
  g.mean = Vector::Zero(2);
  g.mean[1] = 1.7;
  g.cov = Matrix::Zero(2, 2);
  g.cov(1, 1) = 0.16;
  const NormalDensity p2 = analytic_point_linear(g, 0.9, priors);
  const NormalDensity e2 = analytic_eloglik_linear(g, 0.9, priors);
  CHECK(p.mean == doctest::Approx(p2.mean).epsilon(1e-12));
  CHECK(p.sd == doctest::Approx(p2.sd).epsilon(1e-12));
  CHECK(e.mean == doctest::Approx(e2.mean).epsilon(1e-12));
  CHECK(e.sd == doctest::Approx(e2.sd).epsilon(1e-12));
}

TEST_CASE("discrete counterexample gives exactly 5/12 and 3/7") {
  const DiscreteTables tables = counterexample_tables();
  const auto epost = discrete_posterior(tables, UpMethod::Kind::EPost, 0);
  CHECK(epost[0] == Rational(5, 12));
  CHECK(epost[1] == Rational(7, 12));
  const auto elik = discrete_posterior(tables, UpMethod::Kind::ELik, 0);
  CHECK(elik[0] == Rational(3, 7));
  CHECK(elik[1] == Rational(4, 7));
  CHECK(epost[0] != elik[0]);
  CHECK(epost[0].str() == "5/12");
  CHECK(elik[0].str() == "3/7");

  // Point-mass theta: the two rules coincide exactly.
  DiscreteTables degenerate = tables;
  degenerate.p_theta = {Rational(1, 1), Rational(0, 1)};
  const auto a = discrete_posterior(degenerate, UpMethod::Kind::EPost, 0);
  const auto b = discrete_posterior(degenerate, UpMethod::Kind::ELik, 0);
  CHECK(a[0] == b[0]);
  CHECK(a[1] == b[1]);

  DiscreteTables bad = tables;
  bad.p_omega = {Rational(1, 2), Rational(1, 3)};
  CHECK_THROWS(discrete_posterior(bad, UpMethod::Kind::ELik, 0));
}

TEST_CASE("simulator reference posterior") {
  // Well-specified logistic recovery.
  Rng data_rng(125, 0);
  const Measurements meas = generate_measurements(
      SimulatorSpec::logistic(), vec1(0.3), DistSpec::normal(0.0, 0.01), 5, data_rng);
  IStepPriors priors;
  priors.omega_priors = {DistSpec::truncated_normal(-1.0, 1.0, 0.0, 0.5)};
  priors.sigma_i_prior = DistSpec::uniform(0.0, 0.05);
  const IPosterior ip =
      infer_simulator(SimulatorSpec::logistic(), meas, priors, quick_config(4000), Rng(126, 0));
  CHECK(ip.includes_sigma_i);
  const double mean = ip.draws.col(0).mean();
  const double sd = sample_sd(ip.draws.col(0));
  CHECK(std::abs(mean - 0.3) < 3.0 * sd);
  // sigma_i draws respect the uniform prior support.
  CHECK(ip.draws.col(1).minCoeff() > 0.0);
  CHECK(ip.draws.col(1).maxCoeff() < 0.05);

  // Noiseless linear measurement concentrates at (y - a) / b.
  Measurements exact;
  exact.ys = Vector::Constant(1, 0.3);
  IStepPriors lin_priors;
  lin_priors.omega_priors = {DistSpec::normal(0.0, 1.0)};
  lin_priors.sigma_i_fixed = 1e-4;
  const IPosterior lin = infer_simulator(SimulatorSpec::linear(0.5, 2.0), exact, lin_priors,
                                         quick_config(2000), Rng(127, 0));
  CHECK(lin.draws.col(0).mean() == doctest::Approx((0.3 - 0.5) / 2.0).epsilon(1e-2));
  CHECK(sample_sd(lin.draws.col(0)) < 1e-3);
}

TEST_CASE("epost pooling with unequal weights preserves totals") {
  Rng rng(128, 0);
  const TPosterior t = train_conjugate_linear(table2_data(), table2_prior(), 0.5, 40, &rng);
  Rng crng(129, 0);
  const ClusterSet cs = cluster_draws(t, 5, crng);
  CHECK(cs.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
  IStepConfig config = quick_config(200);
  config.mcmc.n_chains = 2;
  config.mcmc.n_warmup = 300;
  const IPosterior ep = infer_epost(SurrogateSpec::linear_lm(), cs.to_theta_set(),
                                    table2_measurement(), table2_ipriors(), config, Rng(130, 0));
  CHECK(ep.size() == 5 * 400);  // common pool size: components x per-component draws
  CHECK(ep.method.kind == UpMethod::Kind::EPost);
}

TEST_CASE("up method names round trip") {
  for (const char* name : {"point", "e-post", "e-lik", "e-log-lik"})
    CHECK(up_method_from_name(name).name() == name);
  CHECK_THROWS(up_method_from_name("nuts"));
}

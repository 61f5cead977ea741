#include "twostep/simulators.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace twostep {

SimulatorSpec SimulatorSpec::linear(double a, double b) {
  SimulatorSpec s;
  s.kind = SimKind::Linear;
  s.a = a;
  s.b = b;
  return s;
}

SimulatorSpec SimulatorSpec::slope_only(double c) {
  SimulatorSpec s;
  s.kind = SimKind::SlopeOnly;
  s.c = c;
  return s;
}

SimulatorSpec SimulatorSpec::logistic() {
  SimulatorSpec s;
  s.kind = SimKind::Logistic;
  return s;
}

SimulatorSpec SimulatorSpec::sir(SirInit init) {
  if (init.s0 < 0 || init.i0 < 0 || init.r0 < 0 ||
      std::abs(init.s0 + init.i0 + init.r0 - init.n_pop) > 1e-9 * init.n_pop)
    throw std::invalid_argument("SimulatorSpec::sir: populations must be nonnegative and sum to n_pop");
  SimulatorSpec s;
  s.kind = SimKind::Sir;
  s.sir_init = init;
  return s;
}

namespace {

double logistic_response(double omega) { return 2.0 / (1.0 + std::exp(-10.0 * omega)) - 1.0; }

struct SirState {
  double s, i, r;
};

SirState sir_deriv(const SirState& x, double beta, double gamma, double n_pop) {
  const double flow = beta * x.s * x.i / n_pop;
  return {-flow, flow - gamma * x.i, gamma * x.i};
}

SirState rk4_step(const SirState& x, double h, double beta, double gamma, double n_pop) {
  const SirState k1 = sir_deriv(x, beta, gamma, n_pop);
  const SirState x2{x.s + 0.5 * h * k1.s, x.i + 0.5 * h * k1.i, x.r + 0.5 * h * k1.r};
  const SirState k2 = sir_deriv(x2, beta, gamma, n_pop);
  const SirState x3{x.s + 0.5 * h * k2.s, x.i + 0.5 * h * k2.i, x.r + 0.5 * h * k2.r};
  const SirState k3 = sir_deriv(x3, beta, gamma, n_pop);
  const SirState x4{x.s + h * k3.s, x.i + h * k3.i, x.r + h * k3.r};
  const SirState k4 = sir_deriv(x4, beta, gamma, n_pop);
  return {x.s + h / 6.0 * (k1.s + 2.0 * k2.s + 2.0 * k3.s + k4.s),
          x.i + h / 6.0 * (k1.i + 2.0 * k2.i + 2.0 * k3.i + k4.i),
          x.r + h / 6.0 * (k1.r + 2.0 * k2.r + 2.0 * k3.r + k4.r)};
}

}  // namespace

SirTrajectory sir_solve(const SimulatorSpec& spec, double beta, double gamma,
                        const Vector& t_grid, int n_steps) {
  if (spec.kind != SimKind::Sir) throw std::invalid_argument("sir_solve: not an SIR spec");
  if (t_grid.size() == 0 || t_grid[0] < 0.0)
    throw std::invalid_argument("sir_solve: t_grid must start at >= 0");
  for (int i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1]))
      throw std::invalid_argument("sir_solve: t_grid must be strictly increasing");
  if (beta < 0.0 || gamma < 0.0) throw std::invalid_argument("sir_solve: beta, gamma >= 0 required");
  if (n_steps < 1) throw std::invalid_argument("sir_solve: n_steps >= 1 required");

  const double horizon = t_grid[t_grid.size() - 1];
  const double h_max = horizon > 0.0 ? horizon / n_steps : 1.0;

  SirTrajectory out;
  out.t = t_grid;
  out.susceptible.resize(t_grid.size());
  out.infected.resize(t_grid.size());
  out.recovered.resize(t_grid.size());

  SirState x{spec.sir_init.s0, spec.sir_init.i0, spec.sir_init.r0};
  double t = 0.0;
  for (int g = 0; g < t_grid.size(); ++g) {
    const double target = t_grid[g];
    const double span = target - t;
    if (span > 0.0) {
      const int m = std::max(1, static_cast<int>(std::ceil(span / h_max)));
      const double h = span / m;
      for (int k = 0; k < m; ++k) x = rk4_step(x, h, beta, gamma, spec.sir_init.n_pop);
      t = target;
    }
    if (!std::isfinite(x.s) || !std::isfinite(x.i) || !std::isfinite(x.r))
      throw std::runtime_error("sir_solve: state became non-finite at t=" + std::to_string(target));
    out.susceptible[g] = x.s;
    out.infected[g] = x.i;
    out.recovered[g] = x.r;
  }
  return out;
}

bool sir_inputs_in_training_box(double t, double beta, double gamma) {
  return t >= 1.0 && t <= 14.0 && beta >= 1.0 && beta <= 3.0 && gamma >= 0.1 && gamma <= 0.9;
}

double simulate(const SimulatorSpec& spec, const Vector& omega, Rng* rng) {
  if (omega.size() != spec.input_dim())
    throw std::invalid_argument("simulate: input dimension mismatch");
  double y = 0.0;
  switch (spec.kind) {
    case SimKind::Linear:
      y = spec.a + spec.b * omega[0];
      break;
    case SimKind::SlopeOnly:
      y = spec.c * omega[0];
      break;
    case SimKind::Logistic:
      y = logistic_response(omega[0]);
      break;
    case SimKind::Sir: {
      Vector grid(1);
      grid[0] = omega[0];
      y = sir_solve(spec, omega[1], omega[2], grid).infected[0];
      break;
    }
  }
  if (spec.noise && rng) y += draw(*spec.noise, *rng);
  return y;
}

// ---------------------------------------------------------------------------
// Quasi-random designs

namespace {

double van_der_corput_base2(std::uint64_t k) {
  double result = 0.0;
  double f = 0.5;
  while (k > 0) {
    if (k & 1) result += f;
    k >>= 1;
    f *= 0.5;
  }
  return result;
}

}  // namespace

std::vector<double> halton_design_1d(int n) {
  if (n < 1) throw std::invalid_argument("halton_design_1d: n >= 1 required");
  std::vector<double> pts;
  pts.reserve(n);
  const double prefix[3] = {-1.0, 1.0, 0.0};
  for (int i = 0; i < n && i < 3; ++i) pts.push_back(prefix[i]);
  // Continue with van der Corput base 2; k=1 gives 1/2 -> 0, already emitted.
  std::uint64_t k = 2;
  while (static_cast<int>(pts.size()) < n) {
    pts.push_back(2.0 * van_der_corput_base2(k) - 1.0);
    ++k;
  }
  return pts;
}

namespace {

// Joe-Kuo direction numbers for dimensions 2 and 3 (dimension 1 is the plain
// base-2 radical inverse). new-joe-kuo-6 table: d=2: s=1, a=0, m=(1);
// d=3: s=2, a=1, m=(1,3).
constexpr int kSobolBits = 32;

struct SobolDim {
  int s;
  unsigned a;
  std::array<unsigned, 2> m;
};

constexpr std::array<SobolDim, 2> kSobolDims = {{{1, 0, {1, 0}}, {2, 1, {1, 3}}}};

std::array<std::array<std::uint64_t, kSobolBits>, 3> sobol_direction_vectors() {
  std::array<std::array<std::uint64_t, kSobolBits>, 3> v{};
  for (int k = 0; k < kSobolBits; ++k) v[0][k] = 1ULL << (kSobolBits - 1 - k);
  for (int d = 0; d < 2; ++d) {
    const SobolDim& dim = kSobolDims[d];
    std::array<std::uint64_t, kSobolBits> m{};
    for (int k = 0; k < dim.s; ++k) m[k] = dim.m[k];
    for (int k = dim.s; k < kSobolBits; ++k) {
      m[k] = m[k - dim.s] ^ (m[k - dim.s] << dim.s);
      for (int l = 1; l < dim.s; ++l)
        if ((dim.a >> (dim.s - 1 - l)) & 1) m[k] ^= m[k - l] << l;
    }
    for (int k = 0; k < kSobolBits; ++k) v[d + 1][k] = m[k] << (kSobolBits - 1 - k);
  }
  return v;
}

}  // namespace

std::vector<Vector> sobol_design_3d(int n, const std::array<std::pair<double, double>, 3>& bounds) {
  if (n < 1) throw std::invalid_argument("sobol_design_3d: n >= 1 required");
  for (const auto& [lo, hi] : bounds)
    if (!(lo < hi)) throw std::invalid_argument("sobol_design_3d: bounds must be ordered");

  static const auto v = sobol_direction_vectors();
  std::vector<Vector> pts(n, Vector(3));
  std::array<std::uint64_t, 3> x{0, 0, 0};
  const double scale = std::ldexp(1.0, -kSobolBits);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < 3; ++d) {
      const double u = static_cast<double>(x[d]) * scale;
      pts[i][d] = bounds[d].first + u * (bounds[d].second - bounds[d].first);
    }
    // Gray-code update: flip the direction of the lowest zero bit of i.
    std::uint64_t idx = static_cast<std::uint64_t>(i);
    int c = 0;
    while (idx & 1) {
      idx >>= 1;
      ++c;
    }
    for (int d = 0; d < 3; ++d) x[d] ^= v[d][c];
  }
  return pts;
}

// ---------------------------------------------------------------------------
// Data generation

TrainingDataset generate_training_data(const SimulatorSpec& spec,
                                       const std::vector<Vector>& design, double sigma_s,
                                       Rng& rng) {
  if (design.empty()) throw std::invalid_argument("generate_training_data: empty design");
  const int dim = spec.input_dim();
  TrainingDataset data;
  data.inputs.resize(static_cast<long>(design.size()), dim);
  data.noise_hypers = Vector::Constant(static_cast<long>(design.size()), sigma_s);
  data.outputs.resize(static_cast<long>(design.size()));
  for (std::size_t i = 0; i < design.size(); ++i) {
    if (design[i].size() != dim)
      throw std::invalid_argument("generate_training_data: design point dimension mismatch");
    data.inputs.row(static_cast<long>(i)) = design[i].transpose();
    double y = simulate(spec, design[i]);
    if (spec.kind != SimKind::Sir && sigma_s > 0.0)
      y += sigma_s * draw_standard_normal(rng);
    data.outputs[static_cast<long>(i)] = y;
    if (spec.kind == SimKind::Sir &&
        !sir_inputs_in_training_box(design[i][0], design[i][1], design[i][2]))
      ++data.n_out_of_bounds;
  }
  return data;
}

Measurements generate_measurements(const SimulatorSpec& spec, const Vector& omega_star,
                                   const std::optional<DistSpec>& noise, int n_i, Rng& rng) {
  if (n_i < 1) throw std::invalid_argument("generate_measurements: n_i >= 1 required");
  Measurements m;
  m.ys.resize(n_i);
  if (spec.kind == SimKind::Sir) {
    if (omega_star.size() != 2)
      throw std::invalid_argument("generate_measurements: SIR expects omega = (beta, gamma)");
    Vector times(n_i);
    for (int i = 0; i < n_i; ++i)
      times[i] = n_i == 1 ? 7.5 : 1.0 + 13.0 * i / (n_i - 1);
    const SirTrajectory traj = sir_solve(spec, omega_star[0], omega_star[1], times);
    for (int i = 0; i < n_i; ++i) {
      if (!noise) {
        m.ys[i] = traj.infected[i];
      } else if (noise->family() == Family::NegativeBinomial) {
        const double mu = std::max(traj.infected[i], 1e-12);
        m.ys[i] = draw(DistSpec::neg_binomial(mu, noise->scale()), rng);
      } else {
        m.ys[i] = traj.infected[i] + draw(*noise, rng);
      }
    }
    m.times = times;
    m.meta = TruthMeta{omega_star, 0.0};
    return m;
  }
  const double response = simulate(spec, omega_star);
  double sigma_i = 0.0;
  for (int i = 0; i < n_i; ++i) m.ys[i] = noise ? response + draw(*noise, rng) : response;
  if (noise && noise->family() == Family::Normal) sigma_i = noise->scale();
  m.meta = TruthMeta{omega_star, sigma_i};
  return m;
}

}  // namespace twostep

#pragma once

// Forward models ("expensive" simulators), quasi-random designs, and
// synthetic training/measurement data generation.

#include "twostep/prob.hpp"

#include <array>
#include <optional>
#include <utility>
#include <vector>

namespace twostep {

enum class SimKind { Linear, SlopeOnly, Logistic, Sir };

struct SirInit {
  double n_pop = 1000.0;
  double s0 = 990.0;
  double i0 = 10.0;
  double r0 = 0.0;
};

struct SimulatorSpec {
  SimKind kind = SimKind::Logistic;
  double a = 0.0, b = 1.0;  // Linear: a + b*omega
  double c = 1.0;           // SlopeOnly: c*omega
  SirInit sir_init;
  std::optional<DistSpec> noise;  // e_S realization added by simulate()

  static SimulatorSpec linear(double a, double b);
  static SimulatorSpec slope_only(double c);
  static SimulatorSpec logistic();
  static SimulatorSpec sir(SirInit init = {});

  int input_dim() const { return kind == SimKind::Sir ? 3 : 1; }
};

struct TrainingDataset {
  Matrix inputs;        // N_T x input_dim
  Vector noise_hypers;  // per-point sigma_S
  Vector outputs;       // y_T
  int n_out_of_bounds = 0;  // SIR inputs outside the training box

  long size() const { return inputs.rows(); }
};

struct TruthMeta {
  Vector omega_star;
  double sigma_i = 0.0;
};

struct Measurements {
  Vector ys;
  std::optional<Vector> times;  // SIR only: observation times
  std::optional<TruthMeta> meta;

  long size() const { return ys.size(); }
};

struct SirTrajectory {
  Vector t;
  Vector susceptible;
  Vector infected;
  Vector recovered;
};

// Deterministic response at omega, plus a noise realization when the spec
// carries a noise distribution and an rng is supplied.
double simulate(const SimulatorSpec& spec, const Vector& omega, Rng* rng = nullptr);

// Classical RK4 on the SIR system; n_steps subdivisions of [0, t_grid.back()].
SirTrajectory sir_solve(const SimulatorSpec& spec, double beta, double gamma,
                        const Vector& t_grid, int n_steps = 2000);

bool sir_inputs_in_training_box(double t, double beta, double gamma);

// Modified 1-d Halton design on [-1, 1]: boundary points first, then the
// center, then base-2 van der Corput points (skipping the already-emitted 0).
std::vector<double> halton_design_1d(int n);

// Gray-code Sobol points (dims 1-3, Joe-Kuo direction numbers) mapped into
// the given box. The first point is the lower corner (origin in unit cube).
std::vector<Vector> sobol_design_3d(int n, const std::array<std::pair<double, double>, 3>& bounds);

TrainingDataset generate_training_data(const SimulatorSpec& spec,
                                       const std::vector<Vector>& design, double sigma_s,
                                       Rng& rng);

// Synthetic measurements at a fixed true input. Normal noise adds to the
// response; NegativeBinomial noise interprets spec.scale() as the shape phi
// with the simulator response as the count mean (SIR). Absent noise means an
// exact, repeated response. For SIR the observation times are n_i evenly
// spaced points in [1, 14].
Measurements generate_measurements(const SimulatorSpec& spec, const Vector& omega_star,
                                   const std::optional<DistSpec>& noise, int n_i, Rng& rng);

}  // namespace twostep

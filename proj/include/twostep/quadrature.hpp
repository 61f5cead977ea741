#pragma once

#include <Eigen/Dense>

#include <functional>

namespace twostep {

using Vector = Eigen::VectorXd;

struct QuadRule {
  Vector nodes;
  Vector weights;
};

// Gauss-Legendre on [-1, 1] and Gauss-Hermite with weight exp(-x^2)
// (physicists' convention), both via Golub-Welsch on the Jacobi matrix.
QuadRule gauss_legendre(int n);
QuadRule gauss_hermite(int n);

// Adaptive Simpson with a relative tolerance; throws on non-convergence
// once the refinement depth cap is reached.
double integrate_adaptive(const std::function<double(double)>& f, double lo, double hi,
                          double rel_tol = 1e-10, int max_depth = 40);

}  // namespace twostep

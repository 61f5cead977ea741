#include "twostep/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace twostep {

namespace {

QuadRule golub_welsch(const Vector& off_diag, double weight_total) {
  const int n = static_cast<int>(off_diag.size()) + 1;
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    jacobi(i, i + 1) = off_diag[i];
    jacobi(i + 1, i) = off_diag[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  QuadRule rule;
  rule.nodes = es.eigenvalues();
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = weight_total * v0 * v0;
  }
  return rule;
}

}  // namespace

QuadRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n >= 1 required");
  Vector off(n - 1);
  for (int i = 1; i < n; ++i) {
    const double k = static_cast<double>(i);
    off[i - 1] = k / std::sqrt(4.0 * k * k - 1.0);
  }
  return golub_welsch(off, 2.0);
}

QuadRule gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: n >= 1 required");
  Vector off(n - 1);
  for (int i = 1; i < n; ++i) off[i - 1] = std::sqrt(0.5 * i);
  return golub_welsch(off, std::sqrt(M_PI));
}

namespace {

double simpson(double fa, double fm, double fb, double h) { return h / 6.0 * (fa + 4.0 * fm + fb); }

double adaptive_step(const std::function<double(double)>& f, double a, double b, double fa,
                     double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(fa, flm, fm, m - a);
  const double right = simpson(fm, frm, fb, b - m);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  if (depth <= 0)
    throw std::runtime_error("integrate_adaptive: refinement cap reached without convergence");
  return adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double integrate_adaptive(const std::function<double(double)>& f, double lo, double hi,
                          double rel_tol, int max_depth) {
  if (!(lo < hi)) throw std::invalid_argument("integrate_adaptive: bounds must be ordered");
  // Seed the absolute tolerance with a coarse magnitude estimate.
  const int kCoarse = 64;
  double coarse = 0.0;
  for (int i = 0; i < kCoarse; ++i) {
    const double x = lo + (hi - lo) * (i + 0.5) / kCoarse;
    coarse += std::abs(f(x));
  }
  coarse *= (hi - lo) / kCoarse;
  const double tol = rel_tol * std::max(coarse, 1e-300);
  const double m = 0.5 * (lo + hi);
  const double fa = f(lo), fm = f(m), fb = f(hi);
  const double whole = simpson(fa, fm, fb, hi - lo);
  return adaptive_step(f, lo, hi, fa, fm, fb, whole, tol, max_depth);
}

}  // namespace twostep

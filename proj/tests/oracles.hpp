#pragma once

// Test-only reference computations, written independently of the library routines they check.

#include <Eigen/Dense>
#include <cmath>
#include <functional>

namespace oracle {

/// Root of s + eps*f(s) = r by plain bisection in long double; f must be increasing on (lo, hi).
inline double bisect_resolvent(const std::function<long double(long double)>& f, double eps, double r,
                               long double lo, long double hi) {
  for (int i = 0; i < 400; ++i) {
    const long double mid = 0.5L * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (mid + static_cast<long double>(eps) * f(mid) < static_cast<long double>(r)) lo = mid; else hi = mid;
  }
  return static_cast<double>(0.5L * (lo + hi));
}

inline double quartic_resolvent(double c, double eps, double r) {
  const double R = std::abs(r) + 1.0;
  return bisect_resolvent([c](long double s) { return 4.0L * c * s * s * s; }, eps, r, -R, R);
}

inline double log_resolvent(double theta, double eps, double r) {
  return bisect_resolvent([theta](long double s) { return theta * std::atanh(s); }, eps, r,
                          std::nextafter(-1.0L, 0.0L), std::nextafter(1.0L, 0.0L));
}

/// Adaptive Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a, double b, double tol, int depth = 50) {
  std::function<double(double, double, double, double, double, double, double, int)> rec =
      [&](double a, double b, double fa, double fm, double fb, double whole, double tol, int d) -> double {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (d <= 0 || std::abs(left + right - whole) <= 15.0 * tol) return left + right + (left + right - whole) / 15.0;
    return rec(a, m, fa, flm, fm, left, 0.5 * tol, d - 1) + rec(m, b, fm, frm, fb, right, 0.5 * tol, d - 1);
  };
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return rec(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, depth);
}

/// Smallest eigenvalue of A x = lambda M x restricted to the M-orthogonal complement of d (dense).
inline double constrained_min_eigenvalue(const Eigen::MatrixXd& A, const Eigen::MatrixXd& M, const Eigen::VectorXd& d) {
  // Orthonormal basis Q of {x : d^T M x = 0}.
  const Eigen::VectorXd c = M * d;
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(A.rows(), A.rows()) - c * c.transpose() / c.squaredNorm();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(H);
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(A.rows(), A.rows() - 1);
  const Eigen::MatrixXd Ar = Q.transpose() * A * Q;
  const Eigen::MatrixXd Mr = Q.transpose() * M * Q;
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Ar, Mr);
  return es.eigenvalues().minCoeff();
}

}  // namespace oracle

// Test-only reference implementations. Everything here recomputes expected
// values through an independent route (quadrature, circulant spectra,
// pseudo-inverse KKT systems, coordinatewise search) and must stay decoupled
// from the library code paths it checks.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "facetflow/grid.hpp"

namespace oracles {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// deterministic uniform variates in [lo, hi)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 1) {}
  double uniform(double lo = 0.0, double hi = 1.0) {
    state_ = state_ * 6364136223846793005ull + 1442695040888963407ull;
    const double u = double(state_ >> 11) / double(1ull << 53);
    return lo + (hi - lo) * u;
  }
  Vec vector(int n, double lo = -1.0, double hi = 1.0) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = uniform(lo, hi);
    return v;
  }

 private:
  std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// adaptive Simpson quadrature
// ---------------------------------------------------------------------------

inline double simpson(const std::function<double(double)>& f, double a,
                      double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson(const std::function<double(double)>& f,
                               double a, double b, double fa, double fm,
                               double fb, double whole, double tol,
                               int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(f, a, m, fa, flm, fm);
  const double right = simpson(f, m, b, fm, frm, fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double tol = 1e-12) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  return adaptive_simpson(f, a, b, fa, fm, fb, simpson(f, a, b, fa, fm, fb),
                          tol, 40);
}

// ---------------------------------------------------------------------------
// explicit periodic difference matrices
// ---------------------------------------------------------------------------

inline Mat centered_matrix(int n, double dx) {
  Mat d = Mat::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    d(j, (j + 1) % n) += 1.0 / (2.0 * dx);
    d(j, (j + n - 1) % n) += -1.0 / (2.0 * dx);
  }
  return d;
}

/// Eigenvalues of D^tD under the discrete Fourier basis.
inline double dtd_eigenvalue(int k, int n, double dx) {
  const double s = std::sin(k * dx) / dx;
  return s * s;
}

// ---------------------------------------------------------------------------
// kernel basis of the centered stencil: constants (+ checkerboard on even n)
// ---------------------------------------------------------------------------

inline Mat kernel_basis(int n) {
  const bool even = n % 2 == 0;
  Mat k(n, even ? 2 : 1);
  k.col(0).setOnes();
  if (even)
    for (int j = 0; j < n; ++j) k(j, 1) = (j % 2 == 0) ? 1.0 : -1.0;
  return k;
}

/// Orthonormal basis of the complement of the stencil kernel.
inline Mat kernel_complement(int n) {
  const Mat k = kernel_basis(n);
  Eigen::HouseholderQR<Mat> qr(k);
  Mat q = qr.householderQ();
  return q.rightCols(n - k.cols());
}

/// Moore-Penrose pseudo-inverse with a relative spectral cutoff.
inline Mat pinv(const Mat& a, double rcond = 1e-12) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  const Vec& ev = es.eigenvalues();
  const double cutoff = rcond * ev.cwiseAbs().maxCoeff();
  Vec inv = Vec::Zero(ev.size());
  for (int i = 0; i < ev.size(); ++i)
    if (std::abs(ev[i]) > cutoff) inv[i] = 1.0 / ev[i];
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

// ---------------------------------------------------------------------------
// constrained-quadratic oracle for the primal steps
// ---------------------------------------------------------------------------

/// Minimizes
///   (1/(2 tau)) (h - h_n)^t A^+ (h - h_n) + phi^t D h
///     + (1/(2 lambda)) (h - h_m)^t Q (h - h_m)
/// over { h : h - h_n  perpendicular to ker(A) }, where Q = D^tD for the
/// Hdot1 penalization and Q = I for L2. Solved by eliminating the
/// constraints with an orthonormal complement basis and a pseudo-inverse.
inline Vec primal_minimizer(const Vec& h_n, const Vec& h_m, const Vec& phi,
                            const Vec& mobility, double dx, double tau,
                            double lambda, bool h1_penalty) {
  const int n = static_cast<int>(h_n.size());
  const Mat d = centered_matrix(n, dx);
  const Mat a = d.transpose() * mobility.asDiagonal() * d;
  const Mat a_pinv = pinv(a);
  const Mat q = h1_penalty ? Mat(d.transpose() * d) : Mat(Mat::Identity(n, n));
  const Mat v = kernel_complement(n);

  const Mat hess =
      v.transpose() * (a_pinv / tau + q / lambda) * v;
  const Vec grad =
      v.transpose() * (d.transpose() * phi + q * (h_n - h_m) / lambda);
  const Vec y = hess.ldlt().solve(-grad);
  return h_n + v * y;
}

// ---------------------------------------------------------------------------
// coordinatewise dual prox oracle
// ---------------------------------------------------------------------------

/// Maximizes phi_j * u_j - (1/(2 sigma)) (phi_j - phi_m_j)^2 over [-1, 1].
/// The objective is strictly concave, so the maximizer is the unique sign
/// change of the derivative, located by bisection (or a boundary when the
/// derivative is one-signed on the interval).
inline double dual_coordinate_max(double u_j, double phi_m_j, double sigma) {
  auto slope = [&](double p) { return u_j - (p - phi_m_j) / sigma; };
  if (slope(-1.0) <= 0.0) return -1.0;
  if (slope(1.0) >= 0.0) return 1.0;
  double lo = -1.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (slope(mid) > 0.0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace oracles

// Weighted Laplacian assembly and the discrete energies: TV energy, weighted
// H^-1 quadratic form, and the outer objective Phi.
//
// Two TV conventions coexist on purpose:
//   tv_energy        dx-weighted, for physical plots;
//   tv_term_matrix   plain sum |(Dh)_j|, the term inside the matrix-level
//                    saddle problem the inner solver minimizes.
// Mixing them is the most likely implementation bug; keep the call sites
// honest.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

#include "facetflow/grid.hpp"
#include "facetflow/mobility.hpp"

namespace facetflow {

using Mat = Eigen::MatrixXd;

/// A = D^t diag(M) D for the centered stencil. Symmetric PSD; constants are
/// always in the kernel, and for even n_x the alternating vector is too.
struct WeightedLaplacian {
  GridSpec grid;
  Mat matrix;
  Vec mobility;  // the M it was built from

  Vec apply(const Vec& v) const {
    Vec dv = centered_difference(v, grid.dx);
    dv.array() *= mobility.array();
    return centered_difference_adjoint(dv, grid.dx);
  }
};

/// Entries from the stencil: A_jj = (M_{j-1} + M_{j+1}) / (4 dx^2),
/// A_{j,j+-2} = -M_{j+-1} / (4 dx^2). Assembled from these closed forms so
/// symmetry is exact by construction.
inline WeightedLaplacian assemble_weighted_laplacian(const MobilityField& m) {
  const int n = m.grid.n_x;
  const double q = 1.0 / (4.0 * m.grid.dx * m.grid.dx);
  Mat a = Mat::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    const int jm = (j + n - 1) % n;
    const int jp = (j + 1) % n;
    const int jm2 = (j + n - 2) % n;
    const int jp2 = (j + 2) % n;
    a(j, j) += (m.values[jm] + m.values[jp]) * q;
    a(j, jm2) += -m.values[jm] * q;
    a(j, jp2) += -m.values[jp] * q;
  }
  return WeightedLaplacian{m.grid, std::move(a), m.values};
}

/// dx * sum_j |(Dh)_j|
inline double tv_energy(const Field& h) {
  return h.grid.dx * centered_difference(h.values, h.grid.dx).cwiseAbs().sum();
}

/// sum_j |(Dh)_j|, no dx factor (matrix-level objective term).
inline double tv_term_matrix(const Field& h) {
  return centered_difference(h.values, h.grid.dx).cwiseAbs().sum();
}

namespace detail {

/// Basis of the centered stencil's kernel: constants, plus the alternating
/// (checkerboard) vector on even grids.
inline Mat stencil_kernel_basis(const GridSpec& g) {
  const int n = g.n_x;
  const bool even = n % 2 == 0;
  Mat k(n, even ? 2 : 1);
  k.col(0).setOnes();
  if (even) {
    for (int j = 0; j < n; ++j) k(j, 1) = (j % 2 == 0) ? 1.0 : -1.0;
  }
  return k;
}

}  // namespace detail

/// psi^t A^+ psi on the complement of A's kernel. Matrix-level (no dx
/// factor); callers multiply by dx for physical scaling.
///
/// psi must be mean-zero, and on even grids must carry no checkerboard
/// component beyond tolerance: both modes are unresolvable by A. The solve
/// deflates the kernel through a bordered KKT system, Jacobi-equilibrated so
/// that strongly graded mobilities (the exponential mobility spans many
/// orders of magnitude at facets) do not wreck the factorization.
inline double hminus1_sq(const Field& psi, const WeightedLaplacian& a,
                         double kernel_tol = 1e-8) {
  if (psi.grid != a.grid) {
    throw std::invalid_argument("hminus1_sq: grid mismatch");
  }
  const int n = psi.size();
  const double scale = std::max(1.0, linf_norm(psi));
  if (std::abs(mean(psi)) > 1e-10 * scale) {
    throw std::invalid_argument("hminus1_sq: psi has nonzero mean " +
                                std::to_string(mean(psi)));
  }
  const Mat k = detail::stencil_kernel_basis(a.grid);
  const int nk = static_cast<int>(k.cols());
  if (nk > 1) {
    const double alt_comp = std::abs(k.col(1).dot(psi.values)) / n;
    if (alt_comp > kernel_tol * scale) {
      throw std::invalid_argument(
          "hminus1_sq: psi has checkerboard kernel component " +
          std::to_string(alt_comp) + " (unresolvable mode)");
    }
  }
  // project off the kernel (orthonormal columns up to 1/sqrt(n))
  Vec psi_p = psi.values;
  for (int c = 0; c < nk; ++c) {
    psi_p -= k.col(c) * (k.col(c).dot(psi_p) / n);
  }

  // Jacobi equilibration
  Vec s(n);
  for (int j = 0; j < n; ++j) {
    const double d = a.matrix(j, j);
    s[j] = d > 0.0 ? 1.0 / std::sqrt(d) : 1.0;
  }
  Mat big = Mat::Zero(n + nk, n + nk);
  big.topLeftCorner(n, n) = s.asDiagonal() * a.matrix * s.asDiagonal();
  for (int c = 0; c < nk; ++c) {
    big.block(0, n + c, n, 1) = s.asDiagonal() * k.col(c);
    big.block(n + c, 0, 1, n) = (s.asDiagonal() * k.col(c)).transpose();
  }
  Vec rhs = Vec::Zero(n + nk);
  rhs.head(n) = s.asDiagonal() * psi_p;
  Eigen::PartialPivLU<Mat> lu(big);
  Vec sol = lu.solve(rhs);
  if (!sol.allFinite()) {
    throw std::runtime_error("hminus1_sq: singular deflated solve");
  }
  const Vec x = s.asDiagonal() * sol.head(n);
  return psi_p.dot(x);
}

/// Phi(h) = sum_j |(Dh)_j| + (1/(2 tau)) (h - h_prev)^t A^+ (h - h_prev).
/// This is the exact discrete objective minimized by one outer step; the TV
/// term is deliberately unweighted (see header note).
inline double objective_phi(const Field& h, const Field& h_prev,
                            const WeightedLaplacian& a_prev, double tau) {
  require_same_grid(h, h_prev, "objective_phi");
  const double scale =
      std::max({1.0, linf_norm(h), linf_norm(h_prev)});
  if (std::abs(mean(h) - mean(h_prev)) > 1e-10 * scale) {
    throw std::invalid_argument("objective_phi: mean(h) != mean(h_prev)");
  }
  Field diff(h.grid, h.values - h_prev.values);
  double quad = 0.0;
  if (diff.values.cwiseAbs().maxCoeff() > 0.0) {
    quad = hminus1_sq(diff, a_prev) / (2.0 * tau);
  }
  return tv_term_matrix(h) + quad;
}

}  // namespace facetflow

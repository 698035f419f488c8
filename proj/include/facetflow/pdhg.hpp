// Inner saddle-point solver. One outer step of the semi-implicit scheme
// minimizes
//
//   Phi(h) = sum_j |(Dh)_j| + (1/(2 tau)) (h - h^n)^t A^+ (h - h^n)
//
// over profiles sharing the mean of h^n, with A the weighted Laplacian frozen
// at h^n. The primal-dual iteration alternates:
//
//   h^(m+1)   = primal step (Hdot1 or L2 penalization)
//   hbar      = 2 h^(m+1) - h^(m)
//   phi^(m+1) = clamp(phi^(m) + sigma * D hbar, [-1, 1])
//
// initialized at h^(0) = h^n, phi^(0) = 0, stopping when the Euclidean norm
// of the joint update drops below delta. The returned iterate is the
// extrapolated hbar^(m+1).
//
// Linear algebra note. The Hdot1 primal step is the solution of
//
//   ((tau/lambda) A D^tD + I) h = (tau/lambda) A u + h^n,
//   u = D^tD h^(m) - lambda D^t phi^(m),
//
// which we compute in update form through a push-through identity: with
// G = diag(sqrt(M)) D (so A = G^t G) and c = tau/lambda,
//
//   h = h^n + c G^t (I + c G D^tD G^t)^{-1} G r,
//   r = D^tD (h^(m) - h^n) - lambda D^t phi^(m).
//
// The sandwiched matrix is symmetric positive definite, so a Cholesky
// factorization applies, and intermediates stay scaled by sqrt(M) on both
// sides. The exponential mobility spans tens of orders of magnitude across a
// facet; solving for h directly in that regime loses the iterate entirely,
// while the update form keeps the fixed point h^(m) = h^n, phi = 0 exact to
// the last bit. The L2 step uses the same identity with
// (G G^t + (lambda/tau) I).
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>

#include "facetflow/band_solver.hpp"
#include "facetflow/grid.hpp"
#include "facetflow/variational.hpp"

namespace facetflow {

enum class PenaltyNorm { h1_dot, l2 };

struct PdhgConfig {
  double lambda = 500.0;
  double sigma = 5e-4;
  double delta = 5e-6;
  long max_iter = 200000;
  PenaltyNorm penalty = PenaltyNorm::h1_dot;
  bool ergodic_tracking = false;

  void check() const {
    if (!(lambda > 0.0)) throw std::invalid_argument("pdhg.lambda must be > 0");
    if (!(sigma > 0.0)) throw std::invalid_argument("pdhg.sigma must be > 0");
    if (!(delta > 0.0)) throw std::invalid_argument("pdhg.delta must be > 0");
    if (max_iter < 1) throw std::invalid_argument("pdhg.max_iter must be >= 1");
  }
};

struct PdhgState {
  Vec h_m;
  Vec phi_m;
  Vec h_bar;
  long m = 0;
  Vec h_ergodic_sum;    // sum of h^(1..m), when tracked
  Vec phi_ergodic_sum;  // sum of phi^(1..m), when tracked
};

struct PdhgReport {
  long iterations = 0;
  double final_update_norm = 0.0;
  bool converged = false;
  /// TV term of the returned iterate plus the certified H^-1 quadratic
  /// term (see solve_inner); an upper bound on Phi(h^{n+1}), tight at
  /// convergence.
  double final_objective = 0.0;
};

/// Holds the per-outer-step factorization; the system matrix depends only on
/// A(h^n), tau and lambda, so it is factorized once and reused for every
/// inner iteration.
class PrimalStepOperator {
 public:
  PrimalStepOperator(const WeightedLaplacian& a, double tau, double lambda,
                     PenaltyNorm penalty)
      : grid_(a.grid), tau_(tau), lambda_(lambda), penalty_(penalty) {
    if (!(tau > 0.0) || !(lambda > 0.0)) {
      throw std::invalid_argument("PrimalStepOperator: tau, lambda must be > 0");
    }
    const int n = grid_.n_x;
    sqrt_m_ = a.mobility.cwiseSqrt();

    // dense circulant stencils; wrap overlaps on small grids accumulate
    const double q = 1.0 / (4.0 * grid_.dx * grid_.dx);
    Mat t = Mat::Zero(n, n);
    auto add = [&](int j, int off, double v) {
      t(j, grid_.wrap(j + off)) += v;
    };
    int kb;
    if (penalty_ == PenaltyNorm::h1_dot) {
      // (D^tD)^2 stencil: {1, -4, 6, -4, 1} * q^2 at offsets {-4,-2,0,2,4}
      kb = 4;
      for (int j = 0; j < n; ++j) {
        add(j, 0, 6.0 * q * q);
        add(j, 2, -4.0 * q * q);
        add(j, -2, -4.0 * q * q);
        add(j, 4, q * q);
        add(j, -4, q * q);
      }
      const double c = tau_ / lambda_;
      t = c * (sqrt_m_.asDiagonal() * t * sqrt_m_.asDiagonal());
      t.diagonal().array() += 1.0;
    } else {
      // G G^t = diag(sqrt M) D^tD diag(sqrt M): stencil {-1, 2, -1} * q
      kb = 2;
      for (int j = 0; j < n; ++j) {
        add(j, 0, 2.0 * q);
        add(j, 2, -q);
        add(j, -2, -q);
      }
      t = sqrt_m_.asDiagonal() * t * sqrt_m_.asDiagonal();
      t.diagonal().array() += lambda_ / tau_;
    }
    try {
      solver_.compute(t, kb);
    } catch (const std::runtime_error&) {
      throw std::runtime_error(
          "PrimalStepOperator: Cholesky factorization failed (config violation)");
    }
  }

  /// Hot-loop buffers; one instance per solve keeps the iteration
  /// allocation-free.
  struct Workspace {
    Vec a, b, r;
  };

  /// One primal step anchored at h_n, written into h_out. When flux_coef is
  /// given it receives the vector v with h - h_n = D^t (sqrt(M) .* v); then
  /// v^t v bounds the weighted H^-1 quadratic form of the displacement from
  /// above (the displacement's flux is sqrt(M) .* v, and the form minimizes
  /// sum eta^2 / M over all fluxes eta with D^t eta fixed).
  void apply_into(const Vec& h_m, const Vec& phi_m, const Vec& h_n,
                  Workspace& ws, Vec& h_out, Vec* flux_coef = nullptr) const {
    const double dx = grid_.dx;
    centered_difference_adjoint_into(phi_m, dx, ws.a);
    if (penalty_ == PenaltyNorm::h1_dot) {
      ws.b = h_m;
      ws.b -= h_n;
      dtd_apply_into(ws.b, dx, ws.r);
      ws.r -= lambda_ * ws.a;
    } else {
      ws.r = h_m;
      ws.r -= h_n;
      ws.r -= lambda_ * ws.a;
    }
    centered_difference_into(ws.r, dx, ws.a);
    ws.a.array() *= sqrt_m_.array();
    solver_.solve_inplace(ws.a);
    const double c = penalty_ == PenaltyNorm::h1_dot ? tau_ / lambda_ : 1.0;
    if (c != 1.0) ws.a *= c;
    if (flux_coef) *flux_coef = ws.a;
    ws.a.array() *= sqrt_m_.array();
    centered_difference_adjoint_into(ws.a, dx, h_out);
    h_out += h_n;
  }

  Vec apply(const Vec& h_m, const Vec& phi_m, const Vec& h_n,
            Vec* flux_coef = nullptr) const {
    Workspace ws;
    Vec out;
    apply_into(h_m, phi_m, h_n, ws, out, flux_coef);
    return out;
  }

  PenaltyNorm penalty() const { return penalty_; }

 private:
  GridSpec grid_;
  double tau_, lambda_;
  PenaltyNorm penalty_;
  Vec sqrt_m_;
  PeriodicBandCholesky solver_;
};

/// Solution of ((tau/lambda) A D^tD + I) h = (tau/lambda) A u + h^n with
/// u = D^tD h_m - lambda D^t phi_m (one-shot; solve_inner reuses the
/// factorization instead).
inline Field primal_step_h1(const Field& h_m, const Field& phi_m,
                            const Field& h_n, const WeightedLaplacian& a,
                            double tau, double lambda) {
  PrimalStepOperator op(a, tau, lambda, PenaltyNorm::h1_dot);
  return Field(h_n.grid, op.apply(h_m.values, phi_m.values, h_n.values));
}

/// Solution of (A + (lambda/tau) I) h = A (h_m - lambda D^t phi_m)
/// + (lambda/tau) h^n.
inline Field primal_step_l2(const Field& h_m, const Field& phi_m,
                            const Field& h_n, const WeightedLaplacian& a,
                            double tau, double lambda) {
  PrimalStepOperator op(a, tau, lambda, PenaltyNorm::l2);
  return Field(h_n.grid, op.apply(h_m.values, phi_m.values, h_n.values));
}

inline Field extrapolate(const Field& h_new, const Field& h_old) {
  require_same_grid(h_new, h_old, "extrapolate");
  return Field(h_new.grid, 2.0 * h_new.values - h_old.values);
}

/// Resolvent of the sup-norm ball indicator: componentwise clamp of
/// u = phi_m + sigma D hbar to [-1, 1].
inline Field dual_step(const Field& phi_m, const Field& h_bar, double sigma) {
  require_same_grid(phi_m, h_bar, "dual_step");
  Vec u = phi_m.values +
          sigma * centered_difference(h_bar.values, h_bar.grid.dx);
  return Field(phi_m.grid,
               u.cwiseMax(-1.0).cwiseMin(1.0));
}

/// Euclidean projection onto the l2 unit ball, u / max(1, ||u||_2). Used by
/// the Laplacian-energy variant of the dual prox; the plain radial map
/// u/||u||_2 would move interior points outward, so the projection is what
/// gets implemented.
inline Field dual_prox_l2ball(const Field& u) {
  const double norm = u.values.norm();
  if (norm <= 1.0) return u;
  return Field(u.grid, u.values / norm);
}

struct InnerSolveResult {
  Field h_next;
  PdhgReport report;
  std::optional<Field> h_ergodic;
  std::optional<Field> phi_ergodic;
};

/// Observer invoked after every dual step with (m, h^(m), phi^(m)).
using InnerCallback = std::function<void(long, const Vec&, const Vec&)>;

/// Runs the PDHG iteration for one outer step. Computing the final objective
/// needs a deflated solve with A, done once on exit.
inline InnerSolveResult solve_inner(const Field& h_n,
                                    const WeightedLaplacian& a, double tau,
                                    const PdhgConfig& cfg,
                                    const InnerCallback& observer = {}) {
  cfg.check();
  if (h_n.grid != a.grid) throw std::invalid_argument("solve_inner: grid mismatch");
  const int n = h_n.size();
  const double dx = h_n.grid.dx;
  PrimalStepOperator op(a, tau, cfg.lambda, cfg.penalty);

  PdhgState st;
  st.h_m = h_n.values;
  st.phi_m = Vec::Zero(n);
  st.h_bar = h_n.values;
  if (cfg.ergodic_tracking) {
    st.h_ergodic_sum = Vec::Zero(n);
    st.phi_ergodic_sum = Vec::Zero(n);
  }

  PdhgReport rep;
  double upd = 0.0;
  Vec flux_prev = Vec::Zero(n), flux_last = Vec::Zero(n);
  PrimalStepOperator::Workspace ws;
  Vec h_new(n), phi_new(n);
  for (long m = 0; m < cfg.max_iter; ++m) {
    flux_prev.swap(flux_last);
    op.apply_into(st.h_m, st.phi_m, h_n.values, ws, h_new, &flux_last);
    st.h_bar = 2.0 * h_new;
    st.h_bar -= st.h_m;
    centered_difference_into(st.h_bar, dx, phi_new);
    phi_new *= cfg.sigma;
    phi_new += st.phi_m;
    phi_new = phi_new.cwiseMax(-1.0).cwiseMin(1.0);

    upd = std::sqrt((h_new - st.h_m).squaredNorm() +
                    (phi_new - st.phi_m).squaredNorm());
    st.h_m.swap(h_new);
    st.phi_m.swap(phi_new);
    st.m = m + 1;
    if (cfg.ergodic_tracking) {
      st.h_ergodic_sum += st.h_m;
      st.phi_ergodic_sum += st.phi_m;
    }
    if (observer) observer(st.m, st.h_m, st.phi_m);
    if (upd < cfg.delta) {
      rep.converged = true;
      break;
    }
  }
  rep.iterations = st.m;
  rep.final_update_norm = upd;

  InnerSolveResult res{Field(h_n.grid, st.h_bar), rep, std::nullopt,
                       std::nullopt};
  // Phi(h_bar) through the iteration's own flux certificate: the returned
  // displacement is exactly D^t(sqrt(M) .* v) with v = 2 flux_last -
  // flux_prev, so v^t v >= psi^t A^+ psi with equality at the minimizer.
  // Evaluating the quadratic form this way involves no division by the
  // mobility, which spans many decades across a facet and makes the direct
  // deflated solve noise-limited there.
  const double quad_cert = (2.0 * flux_last - flux_prev).squaredNorm();
  res.report.final_objective =
      tv_term_matrix(res.h_next) + quad_cert / (2.0 * tau);
  if (cfg.ergodic_tracking && st.m > 0) {
    res.h_ergodic = Field(h_n.grid, st.h_ergodic_sum / double(st.m));
    res.phi_ergodic = Field(h_n.grid, st.phi_ergodic_sum / double(st.m));
  }
  return res;
}

}  // namespace facetflow

// Outer semi-implicit loop: recompute the mobility and weighted Laplacian
// from h^n, run the inner PDHG solve, record diagnostics, repeat until the
// final time.
#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "facetflow/grid.hpp"
#include "facetflow/initial_data.hpp"
#include "facetflow/mobility.hpp"
#include "facetflow/pdhg.hpp"
#include "facetflow/variational.hpp"

namespace facetflow {

enum class ValidationMode {
  warn,   // record the estimate, continue
  strict  // abort the run when the bound fails
};

struct FlowConfig {
  int n_x = 200;
  double final_time = 1e-2;
  int n_t = 10;
  MobilityConfig mobility;
  PdhgConfig pdhg;
  InitialKind initial = InitialKind::sine;
  int snapshot_stride = 1;
  bool continue_on_nonconvergence = false;
  ValidationMode validation = ValidationMode::warn;
  bool use_fft_convolution = true;

  double tau() const { return final_time / n_t; }
  GridSpec grid() const { return GridSpec::torus(n_x); }

  void check() const {
    GridSpec::torus(n_x);
    if (!(final_time > 0.0)) throw std::invalid_argument("T must be > 0");
    if (n_t < 1) throw std::invalid_argument("nt must be >= 1");
    if (snapshot_stride < 1)
      throw std::invalid_argument("output.snapshot_stride must be >= 1");
    mobility.check();
    pdhg.check();
  }
};

struct ValidationResult {
  double norm_estimate = 0.0;  // power-iteration estimate of ||A D^tD||_2
  double margin = 0.0;         // (lambda/tau) / estimate; > 1 passes
  bool passed = false;
  bool power_iteration_converged = false;
};

/// Estimates ||A D^tD||_2 by power iteration on the normal operator
/// (B^t B with B = A D^tD), 50-iteration cap, relative change < 1e-6.
/// Passes iff (tau/lambda) * estimate < 1; a non-converged estimate with
/// margin below 2x is treated as failure.
///
/// The bound is the paper's sufficient condition for the resolvent identity;
/// the system matrix I + (tau/lambda) A D^tD has real eigenvalues >= 1 and
/// stays invertible regardless, and the exponential mobility violates the
/// bound by many orders of magnitude at faceted states while the solver
/// remains well behaved. That is why the flow treats a failed check as a
/// warning by default (ValidationMode::warn) and only the strict mode
/// aborts.
inline ValidationResult validate_config(double tau, double lambda,
                                        const WeightedLaplacian& a) {
  const int n = a.grid.n_x;
  const double dx = a.grid.dx;
  auto b_apply = [&](const Vec& v) { return a.apply(dtd_apply(v, dx)); };
  auto bt_apply = [&](const Vec& v) { return dtd_apply(a.apply(v), dx); };

  // deterministic full-spectrum start vector (LCG; a Fourier-sparse start
  // could miss the dominant mode entirely)
  Vec v(n);
  std::uint64_t state = 0x243f6a8885a308d3ull;
  for (int j = 0; j < n; ++j) {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    v[j] = double(state >> 11) / double(1ull << 53) - 0.5;
  }
  v.normalize();

  double prev = 0.0, lam2 = 0.0;
  bool pi_converged = false;
  for (int it = 0; it < 50; ++it) {
    Vec w = bt_apply(b_apply(v));
    lam2 = v.dot(w);  // Rayleigh quotient for B^tB
    const double norm = w.norm();
    if (norm == 0.0) {
      lam2 = 0.0;
      pi_converged = true;
      break;
    }
    v = w / norm;
    if (it > 0 && std::abs(lam2 - prev) <= 1e-6 * std::abs(lam2)) {
      pi_converged = true;
      break;
    }
    prev = lam2;
  }
  ValidationResult r;
  r.norm_estimate = std::sqrt(std::max(0.0, lam2));
  r.power_iteration_converged = pi_converged;
  r.margin = r.norm_estimate > 0.0 ? (lambda / tau) / r.norm_estimate
                                   : std::numeric_limits<double>::infinity();
  r.passed = (tau / lambda) * r.norm_estimate < 1.0;
  if (!pi_converged && r.margin < 2.0) r.passed = false;
  return r;
}

inline ValidationResult validate_config(const FlowConfig& cfg,
                                        const WeightedLaplacian& a0) {
  return validate_config(cfg.tau(), cfg.pdhg.lambda, a0);
}

/// One per-outer-step record. Row n describes the state h^n (tv, mobility
/// norms) together with the inner solve that produced it (iterations,
/// converged, objective before/after); row 0 carries the initial state with
/// a zero-iteration solve.
struct StepRecord {
  int n = 0;
  double t = 0.0;
  double tv = 0.0;
  double mob_l1 = 0.0;
  double mob_inv_l1 = 0.0;
  long inner_iters = 0;
  bool converged = true;
  double phi_before = 0.0;
  double phi_after = 0.0;
  double validation_norm = 0.0;
  bool validation_passed = true;
  // checkerboard contamination |alt . h| / n: the centered stencil cannot
  // see this mode, the flow preserves it, and it is recorded rather than
  // filtered
  double checkerboard = 0.0;
  bool has_snapshot = false;
  Vec h;  // empty unless has_snapshot
};

struct FlowTrace {
  GridSpec grid;
  double tau = 0.0;
  std::vector<StepRecord> records;
  bool completed = false;  // false when aborted mid-run
  std::string abort_reason;
};

struct OuterStepResult {
  Field h_next;
  PdhgReport report;
  double mob_l1 = 0.0;
  double mob_inv_l1 = 0.0;
  ValidationResult validation;
};

/// h^n -> h^{n+1}: mobility, weighted Laplacian, validation re-check, inner
/// solve. Throws on mobility overflow; the caller decides the
/// non-convergence policy.
inline OuterStepResult step_outer(const Field& h_n, const FlowConfig& cfg,
                                  const Field& kernel) {
  MobilityField m = [&] {
    const Field s = sign_field(h_n, cfg.mobility);
    const Field g = cfg.use_fft_convolution ? circular_convolution_fft(s, kernel)
                                            : circular_convolution(s, kernel);
    const double gmax = linf_norm(g);
    if (gmax > 700.0) {
      throw std::runtime_error("mobility exponent overflow, max |g| = " +
                               std::to_string(gmax));
    }
    return MobilityField{h_n.grid, (-g.values.array()).exp()};
  }();
  WeightedLaplacian a = assemble_weighted_laplacian(m);

  OuterStepResult out{Field::zero(h_n.grid), {}, l1_norm(m),
                      l1_norm(reciprocal(m)), {}};
  out.validation = validate_config(cfg.tau(), cfg.pdhg.lambda, a);

  InnerSolveResult inner = solve_inner(h_n, a, cfg.tau(), cfg.pdhg);
  out.h_next = std::move(inner.h_next);
  out.report = inner.report;
  return out;
}

inline OuterStepResult step_outer(const Field& h_n, const FlowConfig& cfg) {
  return step_outer(h_n, cfg,
                    sample_mollifier_derivative(cfg.mobility.mollifier,
                                                h_n.grid));
}

using StepCallback = std::function<void(const StepRecord&)>;

/// Runs n_t outer steps from the mean-zero initial profile. The mollifier
/// kernel depends only on the grid and epsilon, so it is sampled once per
/// run. Diagnostics are recorded every step; snapshots follow the stride
/// (step 0 and the final step are always kept).
inline FlowTrace evolve(const FlowConfig& cfg,
                        const StepCallback& on_step = {}) {
  cfg.check();
  const GridSpec grid = cfg.grid();
  const double tau = cfg.tau();
  const Field kernel =
      sample_mollifier_derivative(cfg.mobility.mollifier, grid);

  Field h = initial_profile(cfg.initial, grid);

  FlowTrace trace;
  trace.grid = grid;
  trace.tau = tau;
  trace.records.reserve(cfg.n_t + 1);

  auto snapshot_due = [&](int n) {
    return n % cfg.snapshot_stride == 0 || n == cfg.n_t;
  };
  auto make_record = [&](int n, const Field& state) {
    StepRecord r;
    r.n = n;
    r.t = n * tau;
    r.tv = tv_energy(state);
    if (grid.n_x % 2 == 0) {
      double alt = 0.0;
      for (int j = 0; j < grid.n_x; ++j)
        alt += (j % 2 == 0 ? state.values[j] : -state.values[j]);
      r.checkerboard = std::abs(alt) / grid.n_x;
    }
    if (snapshot_due(n)) {
      r.has_snapshot = true;
      r.h = state.values;
    }
    return r;
  };

  StepRecord r0 = make_record(0, h);
  {
    MobilityField m0 = compute_mobility(h, cfg.mobility, cfg.use_fft_convolution);
    r0.mob_l1 = l1_norm(m0);
    r0.mob_inv_l1 = l1_norm(reciprocal(m0));
  }
  r0.phi_before = r0.phi_after = tv_term_matrix(h);
  trace.records.push_back(std::move(r0));

  for (int n = 0; n < cfg.n_t; ++n) {
    OuterStepResult step = step_outer(h, cfg, kernel);

    // row n carries the mobility of the state it describes
    trace.records[n].mob_l1 = step.mob_l1;
    trace.records[n].mob_inv_l1 = step.mob_inv_l1;
    trace.records[n].validation_norm = step.validation.norm_estimate;
    trace.records[n].validation_passed = step.validation.passed;

    if (cfg.validation == ValidationMode::strict && !step.validation.passed) {
      trace.completed = false;
      trace.abort_reason = "validation failed at step " + std::to_string(n) +
                           ": (tau/lambda) ||A DtD|| = " +
                           std::to_string((tau / cfg.pdhg.lambda) *
                                          step.validation.norm_estimate);
      return trace;
    }

    StepRecord r = make_record(n + 1, step.h_next);
    r.inner_iters = step.report.iterations;
    r.converged = step.report.converged;
    r.phi_before = tv_term_matrix(h);
    r.phi_after = step.report.final_objective;
    trace.records.push_back(std::move(r));
    if (on_step) on_step(trace.records.back());

    if (!step.report.converged && !cfg.continue_on_nonconvergence) {
      trace.completed = false;
      trace.abort_reason =
          "inner solve hit max_iter at step " + std::to_string(n);
      return trace;
    }
    h = std::move(step.h_next);
  }

  // final state's own mobility diagnostics
  {
    MobilityField mf = compute_mobility(h, cfg.mobility, cfg.use_fft_convolution);
    trace.records[cfg.n_t].mob_l1 = l1_norm(mf);
    trace.records[cfg.n_t].mob_inv_l1 = l1_norm(reciprocal(mf));
  }
  trace.completed = true;
  return trace;
}

}  // namespace facetflow

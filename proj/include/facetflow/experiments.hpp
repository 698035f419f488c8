// Study harnesses: spatial refinement, temporal refinement, and the
// Hdot1-vs-L2 penalization comparison, plus the error and slope utilities
// they share.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "facetflow/flow.hpp"
#include "facetflow/grid.hpp"
#include "facetflow/initial_data.hpp"

namespace facetflow {

/// Subsamples fine values at coincident nodes; requires the fine grid to be
/// the exact doubling of the coarse one, so coarse node i sits at fine node
/// 2i.
inline Field restrict_fine_to_coarse(const Field& h_fine,
                                     const GridSpec& coarse) {
  if (h_fine.grid.n_x != 2 * coarse.n_x) {
    throw std::invalid_argument(
        "restrict_fine_to_coarse: fine n_x = " +
        std::to_string(h_fine.grid.n_x) + " is not twice coarse n_x = " +
        std::to_string(coarse.n_x));
  }
  Vec out(coarse.n_x);
  for (int i = 0; i < coarse.n_x; ++i) out[i] = h_fine.values[2 * i];
  return Field(coarse, std::move(out));
}

struct L1Error {
  double absolute = 0.0;
  double relative = 0.0;  // absolute / l1_norm(b); 0 when b vanishes
};

/// dx-weighted L1 difference; the relative variant normalizes by l1_norm(b).
inline L1Error relative_l1_error(const Field& a, const Field& b) {
  require_same_grid(a, b, "relative_l1_error");
  L1Error e;
  e.absolute = a.grid.dx * (a.values - b.values).cwiseAbs().sum();
  const double nb = l1_norm(b);
  e.relative = nb > 0.0 ? e.absolute / nb : 0.0;
  return e;
}

struct LogLogFit {
  double slope = 0.0;
  double residual = 0.0;  // RMS of log-residuals
};

/// Least-squares line through (log x, log y). Requires >= 3 pairs and
/// strictly positive values.
inline LogLogFit fit_loglog_slope(
    const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 3) {
    throw std::invalid_argument("fit_loglog_slope: need at least 3 pairs");
  }
  const int n = static_cast<int>(pairs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto& [x, y] : pairs) {
    if (!(x > 0.0) || !(y > 0.0)) {
      throw std::invalid_argument("fit_loglog_slope: nonpositive value");
    }
    const double lx = std::log(x), ly = std::log(y);
    sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
  }
  LogLogFit fit;
  const double denom = n * sxx - sx * sx;
  fit.slope = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - fit.slope * sx) / n;
  double ss = 0;
  for (auto& [x, y] : pairs) {
    const double r = std::log(y) - (fit.slope * std::log(x) + intercept);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

struct StudyPoint {
  double param = 0.0;
  double value = 0.0;
  std::string variant;  // "abs" / "rel" for refinement, "h1-dot" / "l2" for penalty
  bool censored = false;  // value hit max_iter (penalty study only)
};

struct StudyResult {
  std::vector<StudyPoint> points;
  std::optional<LogLogFit> fit;  // on the "rel" series for refinement studies
  bool complete = true;
  std::string failure;
};

/// Shared setup for the convergence studies (sinusoidal data, smoothed sign,
/// eps = 0.05, T = 1e-4, N_t = 10 unless overridden). Inner solves that hit
/// the iteration cap stop within a hair of the update threshold once facets
/// have developed, so study runs keep stepping instead of aborting; genuine
/// failures (mobility overflow) still abort.
inline FlowConfig refinement_base_config() {
  FlowConfig cfg;
  cfg.final_time = 1e-4;
  cfg.n_t = 10;
  cfg.initial = InitialKind::sine;
  cfg.mobility.mollifier.epsilon = 0.05;
  cfg.mobility.variant = SignVariant::smoothed_sign;
  cfg.mobility.slope = 10.0;
  cfg.continue_on_nonconvergence = true;
  cfg.snapshot_stride = 1 << 20;  // studies only need the final profile
  return cfg;
}

namespace detail {

inline Field final_profile(const FlowTrace& trace) {
  const StepRecord& last = trace.records.back();
  return Field(trace.grid, last.h);
}

}  // namespace detail

/// || h(N_x) - h(2 N_x) ||_L1 for N_x in {16, ..., 512}; each size is run
/// once and compared against its doubling through nodewise restriction.
/// Any failed run aborts the study with the partial results flagged.
inline StudyResult space_refinement_study(
    const FlowConfig& base_cfg,
    const std::vector<int>& sizes = {16, 32, 64, 128, 256, 512}) {
  StudyResult result;
  std::vector<int> all = sizes;
  for (int n : sizes) all.push_back(2 * n);
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  std::vector<std::pair<int, Field>> finals;
  for (int n : all) {
    FlowConfig cfg = base_cfg;
    cfg.n_x = n;
    FlowTrace tr = evolve(cfg);
    if (!tr.completed) {
      result.complete = false;
      result.failure = "run at n_x = " + std::to_string(n) +
                       " failed: " + tr.abort_reason;
      return result;
    }
    finals.emplace_back(n, detail::final_profile(tr));
  }
  auto profile_at = [&](int n) -> const Field& {
    for (auto& [m, f] : finals)
      if (m == n) return f;
    throw std::logic_error("space_refinement_study: missing run");
  };

  std::vector<std::pair<double, double>> rel_pairs;
  for (int n : sizes) {
    const Field& coarse = profile_at(n);
    Field fine = restrict_fine_to_coarse(profile_at(2 * n), coarse.grid);
    L1Error e = relative_l1_error(coarse, fine);
    result.points.push_back({double(n), e.absolute, "abs", false});
    result.points.push_back({double(n), e.relative, "rel", false});
    rel_pairs.emplace_back(double(n), e.relative);
  }
  if (rel_pairs.size() >= 3) result.fit = fit_loglog_slope(rel_pairs);
  return result;
}

/// || h(N_t) - h(2 N_t) ||_L1 at fixed N_x for N_t in {5, 10, 20, 40, 80}.
inline StudyResult time_refinement_study(
    const FlowConfig& base_cfg, int n_x = 256,
    const std::vector<int>& steps = {5, 10, 20, 40, 80}) {
  StudyResult result;
  std::vector<int> all = steps;
  for (int n : steps) all.push_back(2 * n);
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  std::vector<std::pair<int, Field>> finals;
  for (int nt : all) {
    FlowConfig cfg = base_cfg;
    cfg.n_x = n_x;
    cfg.n_t = nt;
    FlowTrace tr = evolve(cfg);
    if (!tr.completed) {
      result.complete = false;
      result.failure = "run at n_t = " + std::to_string(nt) +
                       " failed: " + tr.abort_reason;
      return result;
    }
    finals.emplace_back(nt, detail::final_profile(tr));
  }
  auto profile_at = [&](int nt) -> const Field& {
    for (auto& [m, f] : finals)
      if (m == nt) return f;
    throw std::logic_error("time_refinement_study: missing run");
  };

  std::vector<std::pair<double, double>> rel_pairs;
  for (int nt : steps) {
    L1Error e = relative_l1_error(profile_at(nt), profile_at(2 * nt));
    result.points.push_back({double(nt), e.absolute, "abs", false});
    result.points.push_back({double(nt), e.relative, "rel", false});
    rel_pairs.emplace_back(double(nt), e.relative);
  }
  if (rel_pairs.size() >= 3) result.fit = fit_loglog_slope(rel_pairs);
  return result;
}

/// Inner-iteration counts for one outer step of size tau = 1e-6 under the
/// Hdot1 penalization (sigma = 5e-4, lambda = 500) versus the L2
/// penalization (sigma = 5e-5, lambda = 5e-5, the largest steps that keep
/// it convergent). An L2 run that hits max_iter is recorded as a censored
/// count, not an abort.
inline StudyResult penalty_comparison_study(
    const FlowConfig& base_cfg,
    const std::vector<int>& sizes = {32, 64, 124, 250, 500, 750}) {
  StudyResult result;
  for (int n : sizes) {
    FlowConfig cfg = base_cfg;
    cfg.n_x = n;
    cfg.final_time = 1e-6;
    cfg.n_t = 1;
    cfg.continue_on_nonconvergence = true;

    const GridSpec grid = cfg.grid();
    const Field h0 = initial_profile(cfg.initial, grid);
    const MobilityField m = compute_mobility(h0, cfg.mobility);
    const WeightedLaplacian a = assemble_weighted_laplacian(m);

    PdhgConfig h1 = cfg.pdhg;
    h1.penalty = PenaltyNorm::h1_dot;
    h1.lambda = 500.0;
    h1.sigma = 5e-4;
    InnerSolveResult r1 = solve_inner(h0, a, cfg.tau(), h1);
    result.points.push_back({double(n), double(r1.report.iterations),
                             "h1-dot", !r1.report.converged});

    PdhgConfig l2 = cfg.pdhg;
    l2.penalty = PenaltyNorm::l2;
    l2.lambda = 5e-5;
    l2.sigma = 5e-5;
    InnerSolveResult r2 = solve_inner(h0, a, cfg.tau(), l2);
    result.points.push_back({double(n), double(r2.report.iterations), "l2",
                             !r2.report.converged});
  }
  return result;
}

}  // namespace facetflow

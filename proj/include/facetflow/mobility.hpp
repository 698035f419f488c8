// Regularized exponential mobility M(h) = exp(-phi_eps' * s(f)) with
// f = minmod(D+ h, D- h) and s either the exact sign (sgn(0) = 0) or the
// smoothed sign tanh(slope * f).
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "facetflow/fft.hpp"
#include "facetflow/grid.hpp"

namespace facetflow {

/// Normalization of the standard bump: 1 / integral_{-1}^{1} exp(-1/(1-x^2)).
constexpr double kBumpNormalization = 2.2522836210435808;

/// phi(y) = c * exp(-1/(1-y^2)) on |y| < 1, zero outside.
inline double bump(double y) {
  if (std::abs(y) >= 1.0) return 0.0;
  return kBumpNormalization * std::exp(-1.0 / (1.0 - y * y));
}

/// phi'(y) = phi(y) * (-2y / (1-y^2)^2)
inline double bump_derivative(double y) {
  if (std::abs(y) >= 1.0) return 0.0;
  const double w = 1.0 - y * y;
  return bump(y) * (-2.0 * y / (w * w));
}

struct MollifierSpec {
  double epsilon = 0.04;  // smoothing radius, must satisfy 0 < eps < pi
};

enum class SignVariant { exact_sign, smoothed_sign };

struct MobilityConfig {
  MollifierSpec mollifier;
  SignVariant variant = SignVariant::exact_sign;
  double slope = 10.0;  // tanh slope, smoothed_sign only

  void check() const {
    if (!(mollifier.epsilon > 0.0) || !(mollifier.epsilon < kTwoPi / 2.0)) {
      throw std::invalid_argument(
          "MobilityConfig: epsilon must lie in (0, pi), got " +
          std::to_string(mollifier.epsilon));
    }
    if (variant == SignVariant::smoothed_sign && !(slope > 0.0)) {
      throw std::invalid_argument("MobilityConfig: slope must be > 0");
    }
  }
};

/// Positive per-node mobility values.
struct MobilityField {
  GridSpec grid;
  Vec values;
};

/// Samples phi_eps'(x) = phi'(x/eps)/eps^2 at the nodes, mapped to [-pi, pi)
/// by the periodic wrap, then subtracts the discrete average so that the
/// kernel sums (times dx) to exactly zero. The correction makes constant
/// profiles map to M == 1 exactly.
inline Field sample_mollifier_derivative(const MollifierSpec& spec,
                                         const GridSpec& grid) {
  if (!(spec.epsilon > 0.0) || !(spec.epsilon < kTwoPi / 2.0)) {
    throw std::invalid_argument(
        "sample_mollifier_derivative: epsilon must lie in (0, pi)");
  }
  const int n = grid.n_x;
  Vec k(n);
  const double inv_eps2 = 1.0 / (spec.epsilon * spec.epsilon);
  for (int j = 0; j < n; ++j) {
    double x = grid.x(j);
    if (x >= kTwoPi / 2.0) x -= kTwoPi;  // wrap to [-pi, pi)
    k[j] = bump_derivative(x / spec.epsilon) * inv_eps2;
  }
  k.array() -= k.mean();
  return Field(grid, std::move(k));
}

namespace detail {
inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }
}  // namespace detail

/// minmod-limited gradient sign field; the carrier of the flat-region
/// heuristic (opposite one-sided slopes give f = 0, hence s = 0).
inline Field sign_field(const Field& h, const MobilityConfig& cfg) {
  const int n = h.size();
  const double dx = h.grid.dx;
  Vec s(n);
  for (int j = 0; j < n; ++j) {
    const double dp = (h.values[(j + 1) % n] - h.values[j]) / dx;
    const double dm = (h.values[j] - h.values[(j + n - 1) % n]) / dx;
    const double f = minmod(dp, dm);
    s[j] = cfg.variant == SignVariant::exact_sign ? detail::sign0(f)
                                                  : std::tanh(cfg.slope * f);
  }
  return Field(h.grid, std::move(s));
}

/// M_j = exp(-g_j), g = phi_eps' * s. Aborts if the exponent would overflow
/// (downstream linear algebra cannot recover from Inf entries).
inline MobilityField compute_mobility(const Field& h,
                                      const MobilityConfig& cfg,
                                      bool use_fft = true) {
  cfg.check();
  if (!h.all_finite()) {
    throw std::invalid_argument("compute_mobility: profile has non-finite entries");
  }
  const Field s = sign_field(h, cfg);
  const Field kernel = sample_mollifier_derivative(cfg.mollifier, h.grid);
  const Field g = use_fft ? circular_convolution_fft(s, kernel)
                          : circular_convolution(s, kernel);
  const double gmax = linf_norm(g);
  if (gmax > 700.0) {
    throw std::runtime_error(
        "compute_mobility: exponent overflow, max |g| = " +
        std::to_string(gmax) +
        " (epsilon too small for this grid / mobility blow-up)");
  }
  Vec m = (-g.values.array()).exp();
  return MobilityField{h.grid, std::move(m)};
}

/// Elementwise 1 / M_j.
inline MobilityField reciprocal(const MobilityField& m) {
  return MobilityField{m.grid, m.values.cwiseInverse()};
}

inline double l1_norm(const MobilityField& m) {
  return m.grid.dx * m.values.cwiseAbs().sum();
}

}  // namespace facetflow

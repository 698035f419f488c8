// Periodic 1D grid on [0, 2*pi), finite-difference stencils, minmod limiter,
// circular convolution and discrete norms. Everything here is a pure function
// of its inputs; fields are plain value types and safe to share.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace facetflow {

using Vec = Eigen::VectorXd;

constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Uniform periodic grid: x_j = j*dx for j = 0..n_x-1, dx = 2*pi/n_x.
struct GridSpec {
  int n_x = 0;
  double dx = 0.0;

  static GridSpec torus(int n_x) {
    if (n_x < 4) {
      throw std::invalid_argument("GridSpec: n_x must be >= 4, got " +
                                  std::to_string(n_x));
    }
    return GridSpec{n_x, kTwoPi / n_x};
  }

  double x(int j) const { return j * dx; }
  // wrap node index into [0, n_x)
  int wrap(int j) const {
    int r = j % n_x;
    return r < 0 ? r + n_x : r;
  }
  friend bool operator==(const GridSpec& a, const GridSpec& b) {
    return a.n_x == b.n_x;
  }
  friend bool operator!=(const GridSpec& a, const GridSpec& b) {
    return !(a == b);
  }
};

/// One real value per grid node.
struct Field {
  GridSpec grid;
  Vec values;

  Field() = default;
  Field(GridSpec g, Vec v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.n_x) {
      throw std::invalid_argument("Field: length " +
                                  std::to_string(values.size()) +
                                  " != n_x " + std::to_string(grid.n_x));
    }
  }
  static Field zero(GridSpec g) { return Field(g, Vec::Zero(g.n_x)); }

  int size() const { return grid.n_x; }
  double operator[](int j) const { return values[j]; }

  bool all_finite() const { return values.allFinite(); }
};

inline void require_same_grid(const Field& a, const Field& b,
                              const char* what) {
  if (a.grid != b.grid) {
    throw std::invalid_argument(std::string(what) + ": grid mismatch (" +
                                std::to_string(a.grid.n_x) + " vs " +
                                std::to_string(b.grid.n_x) + ")");
  }
}

// ---------------------------------------------------------------------------
// difference stencils (periodic index arithmetic)
// ---------------------------------------------------------------------------

/// (Df)_j = (f_{j+1} - f_{j-1}) / (2 dx)
inline void centered_difference_into(const Vec& f, double dx, Vec& out) {
  const int n = static_cast<int>(f.size());
  out.resize(n);
  const double s = 1.0 / (2.0 * dx);
  out[0] = (f[1] - f[n - 1]) * s;
  for (int j = 1; j < n - 1; ++j) out[j] = (f[j + 1] - f[j - 1]) * s;
  out[n - 1] = (f[0] - f[n - 2]) * s;
}

inline Vec centered_difference(const Vec& f, double dx) {
  Vec out;
  centered_difference_into(f, dx, out);
  return out;
}

/// Adjoint of the centered stencil: D^t = -D.
inline void centered_difference_adjoint_into(const Vec& f, double dx,
                                             Vec& out) {
  const int n = static_cast<int>(f.size());
  out.resize(n);
  const double s = -1.0 / (2.0 * dx);
  out[0] = (f[1] - f[n - 1]) * s;
  for (int j = 1; j < n - 1; ++j) out[j] = (f[j + 1] - f[j - 1]) * s;
  out[n - 1] = (f[0] - f[n - 2]) * s;
}

inline Vec centered_difference_adjoint(const Vec& f, double dx) {
  Vec out;
  centered_difference_adjoint_into(f, dx, out);
  return out;
}

/// (D^t D f)_j = (2 f_j - f_{j+2} - f_{j-2}) / (4 dx^2)
inline void dtd_apply_into(const Vec& f, double dx, Vec& out) {
  const int n = static_cast<int>(f.size());
  out.resize(n);
  const double s = 1.0 / (4.0 * dx * dx);
  for (int j = 0; j < n; ++j) {
    const int jp = j + 2 < n ? j + 2 : j + 2 - n;
    const int jm = j - 2 >= 0 ? j - 2 : j - 2 + n;
    out[j] = (2.0 * f[j] - f[jp] - f[jm]) * s;
  }
}

inline Vec dtd_apply(const Vec& f, double dx) {
  Vec out;
  dtd_apply_into(f, dx, out);
  return out;
}

inline Field centered_difference(const Field& f) {
  return Field(f.grid, centered_difference(f.values, f.grid.dx));
}

/// (D+ f)_j = (f_{j+1} - f_j) / dx
inline Field forward_difference(const Field& f) {
  const int n = f.size();
  Vec out(n);
  for (int j = 0; j < n; ++j)
    out[j] = (f.values[(j + 1) % n] - f.values[j]) / f.grid.dx;
  return Field(f.grid, std::move(out));
}

/// (D- f)_j = (f_j - f_{j-1}) / dx
inline Field backward_difference(const Field& f) {
  const int n = f.size();
  Vec out(n);
  for (int j = 0; j < n; ++j)
    out[j] = (f.values[j] - f.values[(j + n - 1) % n]) / f.grid.dx;
  return Field(f.grid, std::move(out));
}

// ---------------------------------------------------------------------------
// minmod limiter
// ---------------------------------------------------------------------------

/// 0 when the arguments disagree in sign, else the one of smaller modulus.
inline double minmod(double a, double b) {
  if (a * b <= 0.0) return 0.0;
  return a > 0.0 ? std::min(a, b) : std::max(a, b);
}

// ---------------------------------------------------------------------------
// circular convolution
// ---------------------------------------------------------------------------

/// Riemann-sum periodic convolution: (s * k)_j = dx * sum_i s_i k_{(j-i) mod n}.
/// Direct O(n^2) evaluation; the reference path for every grid size.
inline Field circular_convolution(const Field& s, const Field& k) {
  require_same_grid(s, k, "circular_convolution");
  const int n = s.size();
  Vec out = Vec::Zero(n);
  for (int j = 0; j < n; ++j) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      int d = j - i;
      if (d < 0) d += n;
      acc += s.values[i] * k.values[d];
    }
    out[j] = s.grid.dx * acc;
  }
  return Field(s.grid, std::move(out));
}

// FFT-backed path lives in fft.hpp (optional, must agree with the direct
// path to 1e-12).

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

inline double mean(const Field& f) { return f.values.mean(); }

/// dx-weighted l1 norm; grid-independent scaling for diagnostics.
inline double l1_norm(const Field& f) {
  return f.grid.dx * f.values.cwiseAbs().sum();
}

inline double linf_norm(const Field& f) {
  return f.values.cwiseAbs().maxCoeff();
}

}  // namespace facetflow

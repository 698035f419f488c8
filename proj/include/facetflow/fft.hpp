// FFT-backed circular convolution (FFTW, any transform size). Optional fast
// path; must agree with the direct Riemann sum to 1e-12 absolute.
#pragma once

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <vector>

#include "facetflow/grid.hpp"

namespace facetflow {

namespace detail {
// FFTW planning is not thread-safe; execution of made plans is.
inline std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

inline Field circular_convolution_fft(const Field& s, const Field& k) {
  require_same_grid(s, k, "circular_convolution_fft");
  const int n = s.size();
  const int nc = n / 2 + 1;
  std::vector<double> in(n), out(n);
  std::vector<std::complex<double>> fs(nc), fk(nc);

  fftw_plan fwd, bwd;
  {
    std::lock_guard<std::mutex> lock(detail::fftw_plan_mutex());
    fwd = fftw_plan_dft_r2c_1d(n, in.data(),
                               reinterpret_cast<fftw_complex*>(fs.data()),
                               FFTW_ESTIMATE);
    bwd = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(fs.data()),
                               out.data(), FFTW_ESTIMATE);
  }

  for (int j = 0; j < n; ++j) in[j] = s.values[j];
  fftw_execute_dft_r2c(fwd, in.data(),
                       reinterpret_cast<fftw_complex*>(fs.data()));
  for (int j = 0; j < n; ++j) in[j] = k.values[j];
  fftw_execute_dft_r2c(fwd, in.data(),
                       reinterpret_cast<fftw_complex*>(fk.data()));

  const double scale = s.grid.dx / n;  // dx-weighted sum, fftw is unnormalized
  for (int j = 0; j < nc; ++j) fs[j] *= fk[j] * scale;

  fftw_execute_dft_c2r(bwd, reinterpret_cast<fftw_complex*>(fs.data()),
                       out.data());

  {
    std::lock_guard<std::mutex> lock(detail::fftw_plan_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }

  Vec v(n);
  for (int j = 0; j < n; ++j) v[j] = out[j];
  return Field(s.grid, std::move(v));
}

}  // namespace facetflow

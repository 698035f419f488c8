// Initial-data catalog: the three height profiles used throughout, plus the
// zero profile. All are sampled at the nodes and shifted to discrete mean
// zero afterwards; piecewise formulas use the left-closed convention [a, b).
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "facetflow/grid.hpp"

namespace facetflow {

enum class InitialKind { sine, jump, facet, zero };

inline const char* to_string(InitialKind k) {
  switch (k) {
    case InitialKind::sine: return "sine";
    case InitialKind::jump: return "jump";
    case InitialKind::facet: return "facet";
    case InitialKind::zero: return "zero";
  }
  return "?";
}

inline InitialKind initial_kind_from_string(const std::string& s) {
  if (s == "sine") return InitialKind::sine;
  if (s == "jump") return InitialKind::jump;
  if (s == "facet") return InitialKind::facet;
  if (s == "zero") return InitialKind::zero;
  throw std::invalid_argument("unknown initial kind '" + s + "'");
}

inline double sample_initial(InitialKind kind, double x) {
  constexpr double pi = kTwoPi / 2.0;
  switch (kind) {
    case InitialKind::sine:
      return std::sin(x);
    case InitialKind::jump:
      return (x >= pi / 2 && x < 3 * pi / 2) ? std::sin(2.0 * x) : 0.0;
    case InitialKind::facet:
      if (x >= pi / 2 && x < 3 * pi / 4) return std::sin(2.0 * (x - pi / 2));
      if (x >= 3 * pi / 4 && x < 5 * pi / 4) return 1.0;
      if (x >= 5 * pi / 4 && x < 3 * pi / 2) return std::cos(2.0 * (x - 5 * pi / 4));
      return 0.0;
    case InitialKind::zero:
      return 0.0;
  }
  return 0.0;
}

/// Samples the profile at the nodes, then subtracts the discrete mean (the
/// facet profile has nonzero mean; the normalization keeps every flow
/// mean-zero).
inline Field initial_profile(InitialKind kind, const GridSpec& grid) {
  Vec h(grid.n_x);
  for (int j = 0; j < grid.n_x; ++j) h[j] = sample_initial(kind, grid.x(j));
  h.array() -= h.mean();
  return Field(grid, std::move(h));
}

}  // namespace facetflow

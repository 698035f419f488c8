#include <catch_amalgamated.hpp>

#include "facetflow/mobility.hpp"

#include "oracles.hpp"

using namespace facetflow;

namespace {
Field sine_profile(int n) {
  GridSpec g = GridSpec::torus(n);
  Vec v(n);
  for (int j = 0; j < n; ++j) v[j] = std::sin(g.x(j));
  return Field(g, std::move(v));
}
}  // namespace

TEST_CASE("bump normalization constant against the quadrature oracle") {
  const double integral = oracles::integrate(
      [](double x) {
        const double w = 1.0 - x * x;
        return w > 0.0 ? std::exp(-1.0 / w) : 0.0;
      },
      -1.0, 1.0, 1e-14);
  CHECK(kBumpNormalization == Catch::Approx(1.0 / integral).epsilon(1e-10));
  CHECK(kBumpNormalization == Catch::Approx(2.25228).margin(1e-5));
}

TEST_CASE("sampled kernel sums to zero and is odd up to the mean correction") {
  GridSpec g = GridSpec::torus(128);
  MollifierSpec spec{0.3};
  Field k = sample_mollifier_derivative(spec, g);

  CHECK(std::abs(g.dx * k.values.sum()) < 1e-12 * linf_norm(k));

  // phi' is odd: kernel(x_j) ~ -kernel(-x_j) once the mean shift cancels
  const double shift = k.values.mean();
  for (int j = 1; j < 128; ++j) {
    CHECK(k.values[j] - shift ==
          Catch::Approx(-(k.values[128 - j] - shift)).margin(1e-9));
  }
}

TEST_CASE("epsilon must fit the torus") {
  GridSpec g = GridSpec::torus(16);
  CHECK_THROWS_AS(sample_mollifier_derivative(MollifierSpec{4.0}, g),
                  std::invalid_argument);
  CHECK_THROWS_AS(sample_mollifier_derivative(MollifierSpec{0.0}, g),
                  std::invalid_argument);
  MobilityConfig bad;
  bad.mollifier.epsilon = -1.0;
  CHECK_THROWS_AS(compute_mobility(Field::zero(g), bad),
                  std::invalid_argument);
}

TEST_CASE("constant profiles give unit mobility exactly") {
  GridSpec g = GridSpec::torus(64);
  Field c(g, Vec::Constant(64, 2.5));
  for (SignVariant variant :
       {SignVariant::exact_sign, SignVariant::smoothed_sign}) {
    MobilityConfig cfg;
    cfg.mollifier.epsilon = 0.2;
    cfg.variant = variant;
    MobilityField m = compute_mobility(c, cfg);
    CHECK((m.values.array() - 1.0).abs().maxCoeff() == 0.0);
  }
}

TEST_CASE("odd symmetry: M(-h) M(h) = 1 elementwise") {
  oracles::Rng rng(21);
  GridSpec g = GridSpec::torus(48);
  Field h(g, rng.vector(48, -0.5, 0.5));
  Field neg(g, -h.values);
  for (SignVariant variant :
       {SignVariant::exact_sign, SignVariant::smoothed_sign}) {
    MobilityConfig cfg;
    cfg.mollifier.epsilon = 0.25;
    cfg.variant = variant;
    MobilityField mp = compute_mobility(h, cfg);
    MobilityField mn = compute_mobility(neg, cfg);
    CHECK((mp.values.cwiseProduct(mn.values).array() - 1.0)
              .abs()
              .maxCoeff() < 1e-12);
  }
}

TEST_CASE("mobility positivity and flat-region sign suppression") {
  // a profile with an interior kink: opposite one-sided slopes give s_j = 0
  GridSpec g = GridSpec::torus(32);
  Vec v(32);
  for (int j = 0; j < 32; ++j) v[j] = std::abs(16 - j) * g.dx;
  Field h(g, std::move(v));
  MobilityConfig cfg;
  cfg.mollifier.epsilon = 0.3;
  MobilityField m = compute_mobility(h, cfg);
  CHECK(m.values.minCoeff() > 0.0);
  Field s = sign_field(h, cfg);
  CHECK(s.values[16] == 0.0);  // the valley node
  CHECK(s.values[0] == 0.0);   // the peak node (periodic kink)
}

TEST_CASE("sine mobility l1 norms match an independent reference") {
  // Reference: analytic sign field sgn(cos x_j), kernel sampled from the
  // quadrature-derived normalization, plain-loop convolution.
  const int n = 200;
  Field h = sine_profile(n);
  const GridSpec g = h.grid;
  const double eps = 0.04;

  const double c_ref = 1.0 / oracles::integrate(
                                 [](double x) {
                                   const double w = 1.0 - x * x;
                                   return w > 0.0 ? std::exp(-1.0 / w) : 0.0;
                                 },
                                 -1.0, 1.0, 1e-14);
  Vec kernel(n);
  for (int j = 0; j < n; ++j) {
    double x = g.x(j);
    if (x >= kTwoPi / 2) x -= kTwoPi;
    const double y = x / eps;
    if (std::abs(y) < 1.0) {
      const double w = 1.0 - y * y;
      kernel[j] = c_ref * std::exp(-1.0 / w) * (-2.0 * y / (w * w)) / (eps * eps);
    } else {
      kernel[j] = 0.0;
    }
  }
  kernel.array() -= kernel.mean();

  // sgn(cos x_j); the zeros of cos land on nodes at this grid size, where
  // the sampled sign is 0 (same convention as sgn(0) = 0 in the library:
  // |cos| there is pure rounding noise, not a signed value)
  Vec s(n);
  for (int j = 0; j < n; ++j) {
    const double c = std::cos(g.x(j));
    s[j] = std::abs(c) < 1e-12 ? 0.0 : (c > 0 ? 1.0 : -1.0);
  }
  double ref_l1 = 0.0, ref_inv_l1 = 0.0;
  for (int j = 0; j < n; ++j) {
    double conv = 0.0;
    for (int i = 0; i < n; ++i) conv += s[i] * kernel[(j - i + n) % n];
    const double m = std::exp(-g.dx * conv);
    ref_l1 += g.dx * m;
    ref_inv_l1 += g.dx / m;
  }

  MobilityConfig cfg;
  cfg.mollifier.epsilon = eps;
  cfg.variant = SignVariant::exact_sign;
  MobilityField m = compute_mobility(h, cfg);
  CHECK(l1_norm(m) == Catch::Approx(ref_l1).epsilon(1e-6));
  CHECK(l1_norm(reciprocal(m)) == Catch::Approx(ref_inv_l1).epsilon(1e-6));
}

TEST_CASE("reciprocal is an involution") {
  oracles::Rng rng(13);
  GridSpec g = GridSpec::torus(40);
  Field h(g, rng.vector(40, -1, 1));
  MobilityConfig cfg;
  cfg.mollifier.epsilon = 0.3;
  cfg.variant = SignVariant::smoothed_sign;
  MobilityField m = compute_mobility(h, cfg);
  MobilityField mm = reciprocal(reciprocal(m));
  CHECK((mm.values - m.values).cwiseAbs().maxCoeff() < 1e-15 * m.values.maxCoeff());
  MobilityField one{g, Vec::Ones(40)};
  CHECK((reciprocal(one).values.array() == 1.0).all());
}

TEST_CASE("overflow guard aborts with a diagnostic") {
  // with eps ~ 1.3 dx the sampled kernel scales like 1/eps^2 and a sign jump
  // drives |g| ~ 2/dx, past the 700 guard on a fine grid
  const int n = 4096;
  GridSpec g = GridSpec::torus(n);
  Vec v(n);
  for (int j = 0; j < n; ++j) v[j] = std::sin(g.x(j));
  MobilityConfig cfg;
  cfg.mollifier.epsilon = 0.002;
  try {
    compute_mobility(Field(g, std::move(v)), cfg);
    FAIL("expected mobility overflow");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("max |g|") != std::string::npos);
  }
}

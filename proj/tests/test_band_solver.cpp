#include <catch_amalgamated.hpp>

#include "facetflow/band_solver.hpp"

#include "oracles.hpp"

using namespace facetflow;
using oracles::Rng;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

namespace {

// random SPD matrix with cyclic bandwidth kb: I + c * B diag(w) B^t where B
// couples offsets within kb/2
Mat cyclic_banded_spd(Rng& rng, int n, int kb, double wmax) {
  Mat b = Mat::Zero(n, n);
  const int half = kb / 2;
  for (int j = 0; j < n; ++j) {
    for (int d = -half; d <= half; ++d) {
      b(j, ((j + d) % n + n) % n) += rng.uniform(-1, 1);
    }
  }
  Vec w(n);
  for (int j = 0; j < n; ++j) w[j] = rng.uniform(1e-3, wmax);
  Mat t = b * w.asDiagonal() * b.transpose();
  t = 0.5 * (t + t.transpose());
  t.diagonal().array() += 1.0;
  return t;
}

}  // namespace

TEST_CASE("periodic banded Cholesky matches dense LLT") {
  Rng rng(91);
  for (int n : {12, 33, 128, 200}) {
    for (int kb : {2, 4}) {
      Mat t = cyclic_banded_spd(rng, n, kb, 10.0);
      PeriodicBandCholesky solver(t, kb);
      CHECK(solver.banded() == (n - kb >= 2 * (kb + 1)));
      Eigen::LLT<Mat> ref(t);
      for (int trial = 0; trial < 5; ++trial) {
        Vec b = rng.vector(n, -2, 2);
        Vec x = solver.solve(b);
        Vec y = ref.solve(b);
        CHECK((x - y).norm() <= 1e-11 * std::max(1.0, y.norm()));
        CHECK((t * x - b).norm() <= 1e-10 * b.norm());
      }
    }
  }
}

TEST_CASE("banded solver on strongly graded weights") {
  Rng rng(92);
  const int n = 150;
  Mat t = cyclic_banded_spd(rng, n, 4, 1e25);
  PeriodicBandCholesky solver(t, 4);
  Vec b = rng.vector(n);
  Vec x = solver.solve(b);
  CHECK(x.allFinite());
  // residual small relative to the row scales
  Vec r = t * x - b;
  for (int j = 0; j < n; ++j) {
    const double scale = t.row(j).cwiseAbs().maxCoeff() * x.cwiseAbs().maxCoeff();
    CHECK(std::abs(r[j]) <= 1e-12 * std::max(1.0, scale));
  }
  CHECK(solver.solve(Vec::Zero(n)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("small grids fall back to the dense path") {
  Rng rng(93);
  Mat t = cyclic_banded_spd(rng, 8, 4, 5.0);
  PeriodicBandCholesky solver(t, 4);
  CHECK_FALSE(solver.banded());
  Vec b = rng.vector(8);
  CHECK((t * solver.solve(b) - b).norm() < 1e-11);
}

TEST_CASE("indefinite input is rejected") {
  Mat t = Mat::Identity(40, 40);
  t(7, 7) = -1.0;
  CHECK_THROWS_AS(PeriodicBandCholesky(t, 2), std::runtime_error);
}

// Cholesky solver for symmetric positive definite matrices with cyclic band
// structure (nonzero only for (i - j) mod n in [-kb, kb]). The last kb
// unknowns are split off as a dense border, which absorbs every wraparound
// entry; the leading block is then strictly banded and factors in O(n kb^2),
// with O(n kb) solves. Falls back to a dense factorization on grids too
// small for the split to pay off.
//
// The PDHG system matrices have this shape: the Hdot1 operator
// I + c sqrt(M) (D^tD)^2 sqrt(M) couples offsets {0, +-2, +-4} and the L2
// operator couples {0, +-2}, so the per-iteration solve cost drops from
// O(n^2) dense-triangular to O(n kb).
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace facetflow {

class PeriodicBandCholesky {
 public:
  using Mat = Eigen::MatrixXd;
  using Vec = Eigen::VectorXd;

  PeriodicBandCholesky() = default;

  /// t must be symmetric positive definite with cyclic bandwidth kb.
  PeriodicBandCholesky(const Mat& t, int kb) { compute(t, kb); }

  void compute(const Mat& t, int kb) {
    n_ = static_cast<int>(t.rows());
    kb_ = kb;
    m_ = n_ - kb;
    dense_ = m_ < 2 * (kb + 1);
    if (dense_) {
      dense_llt_.compute(t);
      if (dense_llt_.info() != Eigen::Success) {
        throw std::runtime_error("PeriodicBandCholesky: not positive definite");
      }
      return;
    }

    // banded Cholesky of the leading block, L stored as band_(d, j) = L(j+d, j)
    band_.setZero(kb_ + 1, m_);
    for (int j = 0; j < m_; ++j) {
      for (int d = 0; d <= kb_ && j + d < m_; ++d) band_(d, j) = t(j + d, j);
    }
    for (int j = 0; j < m_; ++j) {
      for (int k = std::max(0, j - kb_); k < j; ++k) {
        const double ljk = band_(j - k, k);
        if (ljk == 0.0) continue;
        for (int d = 0; d <= kb_ && j + d < m_; ++d) {
          const int off = j + d - k;
          if (off <= kb_) band_(d, j) -= band_(off, k) * ljk;
        }
      }
      if (!(band_(0, j) > 0.0)) {
        throw std::runtime_error("PeriodicBandCholesky: not positive definite");
      }
      band_(0, j) = std::sqrt(band_(0, j));
      for (int d = 1; d <= kb_ && j + d < m_; ++d) band_(d, j) /= band_(0, j);
    }

    // dense border: W = T11^{-1} T12, Schur = T22 - T21 W
    t21_ = t.bottomLeftCorner(kb_, m_);
    w_ = t.topRightCorner(m_, kb_);
    for (int c = 0; c < kb_; ++c) {
      banded_solve_inplace(w_.col(c));
    }
    Mat schur = t.bottomRightCorner(kb_, kb_) - t21_ * w_;
    Eigen::LLT<Mat> schur_llt(schur);
    if (schur_llt.info() != Eigen::Success) {
      throw std::runtime_error("PeriodicBandCholesky: not positive definite");
    }
    schur_l_ = schur_llt.matrixL();
  }

  /// Allocation-free solve; kb is at most 8.
  void solve_inplace(Eigen::Ref<Vec> b) const {
    if (dense_) {
      b = dense_llt_.solve(b);
      return;
    }
    banded_solve_inplace(b.head(m_));
    double r2[8];
    for (int c = 0; c < kb_; ++c) {
      r2[c] = b[m_ + c] - t21_.row(c).dot(b.head(m_));
    }
    for (int i = 0; i < kb_; ++i) {
      double a = r2[i];
      for (int k = 0; k < i; ++k) a -= schur_l_(i, k) * r2[k];
      r2[i] = a / schur_l_(i, i);
    }
    for (int i = kb_ - 1; i >= 0; --i) {
      double a = r2[i];
      for (int k = i + 1; k < kb_; ++k) a -= schur_l_(k, i) * r2[k];
      r2[i] = a / schur_l_(i, i);
    }
    for (int c = 0; c < kb_; ++c) b.head(m_) -= w_.col(c) * r2[c];
    for (int c = 0; c < kb_; ++c) b[m_ + c] = r2[c];
  }

  Vec solve(const Vec& b) const {
    Vec x = b;
    solve_inplace(x);
    return x;
  }

  bool banded() const { return !dense_; }

 private:
  template <typename Seg>
  void banded_solve_inplace(Seg&& y) const {
    // forward: L y' = y
    for (int j = 0; j < m_; ++j) {
      double acc = y[j];
      for (int d = 1; d <= kb_ && j - d >= 0; ++d) {
        acc -= band_(d, j - d) * y[j - d];
      }
      y[j] = acc / band_(0, j);
    }
    // backward: L^t y'' = y'
    for (int j = m_ - 1; j >= 0; --j) {
      double acc = y[j];
      for (int d = 1; d <= kb_ && j + d < m_; ++d) {
        acc -= band_(d, j) * y[j + d];
      }
      y[j] = acc / band_(0, j);
    }
  }

  int n_ = 0, kb_ = 0, m_ = 0;
  bool dense_ = true;
  Mat band_;     // (kb+1) x m
  Mat w_;        // m x kb
  Mat t21_;      // kb x m
  Mat schur_l_;  // kb x kb lower Cholesky factor of the border Schur block
  Eigen::LLT<Mat> dense_llt_;
};

}  // namespace facetflow

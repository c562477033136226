#include "specgan/blas.hpp"

#include <Eigen/Core>

namespace specgan::blas {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, const double* b, double beta, double* c) {
  if (m == 0 || n == 0) return;
  const auto em = static_cast<Eigen::Index>(m);
  const auto en = static_cast<Eigen::Index>(n);
  const auto ek = static_cast<Eigen::Index>(k);
  Map out(c, em, en);
  if (beta == 0.0) {
    out.setZero();
  } else if (beta != 1.0) {
    out *= beta;
  }
  if (k == 0) return;
  if (k == 1) {
    // Outer product; Eigen's blocked path is slow for this shape.
    for (std::size_t i = 0; i < m; ++i) {
      const double ai = alpha * a[i];
      double* row = c + i * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += ai * b[j];
    }
    return;
  }
  // Stored shapes: A is [m,k] or [k,m]; B is [k,n] or [n,k].
  const ConstMap am(a, trans_a ? ek : em, trans_a ? em : ek);
  const ConstMap bm(b, trans_b ? en : ek, trans_b ? ek : en);
  if (!trans_a && !trans_b) {
    out.noalias() += alpha * am * bm;
  } else if (trans_a && !trans_b) {
    out.noalias() += alpha * am.transpose() * bm;
  } else if (!trans_a && trans_b) {
    out.noalias() += alpha * am * bm.transpose();
  } else {
    out.noalias() += alpha * am.transpose() * bm.transpose();
  }
}

}  // namespace specgan::blas

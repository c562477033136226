#pragma once

#include <cstddef>

namespace specgan::blas {

// Row-major C[m,n] = alpha * op(A) * op(B) + beta * C, with op(A) of shape
// [m,k] and op(B) of shape [k,n]. Operands are densely packed.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, const double* b, double beta, double* c);

}  // namespace specgan::blas

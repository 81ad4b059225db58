#pragma once

namespace palx::detail {

// Row-major C = alpha * op(A) * op(B) + beta * C.
// op(A) is [m,k] after optional transposition; lda/ldb/ldc are leading
// dimensions of the stored (untransposed) matrices.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
          const double* a, int lda, const double* b, int ldb, double beta,
          double* c, int ldc);

}  // namespace palx::detail

#include "palx/gemm.hpp"

#include <mutex>

#ifdef PALX_USE_OPENBLAS
#include <cblas.h>
extern "C" void openblas_set_num_threads(int);
#endif

namespace palx::detail {

#ifdef PALX_USE_OPENBLAS

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
          const double* a, int lda, const double* b, int ldb, double beta,
          double* c, int ldc) {
  // Pin to one BLAS thread: reduction order (and thus bit-level results)
  // must not depend on the machine's core count.
  static std::once_flag once;
  std::call_once(once, [] { openblas_set_num_threads(1); });
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
              ldb, beta, c, ldc);
}

#else

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
          const double* a, int lda, const double* b, int ldb, double beta,
          double* c, int ldc) {
  auto at = [&](int i, int l) { return trans_a ? a[l * lda + i] : a[i * lda + l]; };
  auto bt = [&](int l, int j) { return trans_b ? b[j * ldb + l] : b[l * ldb + j]; };
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j)
      c[i * ldc + j] = beta == 0.0 ? 0.0 : c[i * ldc + j] * beta;
    for (int l = 0; l < k; ++l) {
      double av = alpha * at(i, l);
      for (int j = 0; j < n; ++j) c[i * ldc + j] += av * bt(l, j);
    }
  }
}

#endif

}  // namespace palx::detail

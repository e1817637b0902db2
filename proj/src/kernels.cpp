#include "sentrec/kernels.hpp"

#include <atomic>
#include <vector>

namespace sentrec::kernels {

namespace {

std::atomic<bool> g_parallel{true};

// ikj order: the inner j loop is contiguous in both B and C, which lets the
// compiler vectorize without reassociating the accumulation over p (the p
// loop stays outside), keeping results bit-identical to the scalar form.
inline void mm_rows(const double* A, const double* B, double* C, int /*m*/, int k, int n,
                    int row_begin, int row_end) {
  for (int i = row_begin; i < row_end; ++i) {
    const double* a = A + static_cast<size_t>(i) * k;
    double* c = C + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double aip = a[p];
      if (aip == 0.0) continue;
      const double* b = B + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) c[j] += aip * b[j];
    }
  }
}

inline void mm_nt_rows(const double* A, const double* B, double* C, int /*m*/, int k, int n,
                       int row_begin, int row_end) {
  for (int i = row_begin; i < row_end; ++i) {
    const double* a = A + static_cast<size_t>(i) * k;
    double* c = C + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* b = B + static_cast<size_t>(j) * k;
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += a[p] * b[p];
      c[j] += s;
    }
  }
}

// Parallelized over columns of A^T (i.e. over k): each output row of C is
// owned by one iteration, so there are no write collisions.
inline void mm_tn_cols(const double* A, const double* B, double* C, int m, int k, int n,
                       int col_begin, int col_end) {
  for (int i = col_begin; i < col_end; ++i) {
    double* c = C + static_cast<size_t>(i) * n;
    for (int p = 0; p < m; ++p) {
      const double api = A[static_cast<size_t>(p) * k + i];
      if (api == 0.0) continue;
      const double* b = B + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) c[j] += api * b[j];
    }
  }
}

}  // namespace

void mm_serial(const double* A, const double* B, double* C, int m, int k, int n) {
  mm_rows(A, B, C, m, k, n, 0, m);
}

void mm_omp(const double* A, const double* B, double* C, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) mm_rows(A, B, C, m, k, n, i, i + 1);
}

void mm_nt_serial(const double* A, const double* B, double* C, int m, int k, int n) {
  mm_nt_rows(A, B, C, m, k, n, 0, m);
}

void mm_nt_omp(const double* A, const double* B, double* C, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) mm_nt_rows(A, B, C, m, k, n, i, i + 1);
}

void mm_tn_serial(const double* A, const double* B, double* C, int m, int k, int n) {
  mm_tn_cols(A, B, C, m, k, n, 0, k);
}

void mm_tn_omp(const double* A, const double* B, double* C, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < k; ++i) mm_tn_cols(A, B, C, m, k, n, i, i + 1);
}

void for_each_index_serial(size_t n, const std::function<void(size_t)>& body) {
  for (size_t i = 0; i < n; ++i) body(i);
}

void for_each_index_omp(size_t n, const std::function<void(size_t)>& body) {
  const long long nn = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 4)
  for (long long i = 0; i < nn; ++i) body(static_cast<size_t>(i));
}

void set_parallel(bool enabled) { g_parallel.store(enabled); }
bool parallel_enabled() {
#ifdef _OPENMP
  return g_parallel.load();
#else
  return false;
#endif
}

void mm(const double* A, const double* B, double* C, int m, int k, int n) {
  if (parallel_enabled() && m >= 64) {
    mm_omp(A, B, C, m, k, n);
  } else {
    mm_serial(A, B, C, m, k, n);
  }
}

void mm_nt(const double* A, const double* B, double* C, int m, int k, int n) {
  if (parallel_enabled() && m >= 64) {
    mm_nt_omp(A, B, C, m, k, n);
  } else {
    mm_nt_serial(A, B, C, m, k, n);
  }
}

void mm_tn(const double* A, const double* B, double* C, int m, int k, int n) {
  if (parallel_enabled() && k >= 64) {
    mm_tn_omp(A, B, C, m, k, n);
  } else {
    mm_tn_serial(A, B, C, m, k, n);
  }
}

void for_each_index(size_t n, const std::function<void(size_t)>& body) {
  if (parallel_enabled() && n > 1) {
    for_each_index_omp(n, body);
  } else {
    for_each_index_serial(n, body);
  }
}

}  // namespace sentrec::kernels

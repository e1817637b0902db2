#pragma once

#include <cstddef>
#include <functional>

namespace sentrec::kernels {

// Dense kernels used by the autodiff tape and the trainers. Every parallel
// entry point has a serial reference implementation with identical
// element-level arithmetic order, so the two variants produce bit-identical
// results for any thread count; tests assert exact equality and the bench
// target compares throughput.
//
// Layout: row-major, C[m x n] += A[. x .] * B[. x .]. Accumulating into C
// lets backward passes reuse the same kernels.

void mm_serial(const double* A, const double* B, double* C, int m, int k, int n);
void mm_omp(const double* A, const double* B, double* C, int m, int k, int n);

// C[m x n] += A[m x k] * B[n x k]^T
void mm_nt_serial(const double* A, const double* B, double* C, int m, int k, int n);
void mm_nt_omp(const double* A, const double* B, double* C, int m, int k, int n);

// C[k x n] += A[m x k]^T * B[m x n]
void mm_tn_serial(const double* A, const double* B, double* C, int m, int k, int n);
void mm_tn_omp(const double* A, const double* B, double* C, int m, int k, int n);

// Run body(i) for i in [0, n). The parallel form writes into caller-owned
// per-index slots; any reduction over the slots is the caller's job and must
// stay serial and index-ordered to keep results exactly reproducible.
void for_each_index_serial(size_t n, const std::function<void(size_t)>& body);
void for_each_index_omp(size_t n, const std::function<void(size_t)>& body);

// Process-wide switch consulted by mm()/mm_nt()/mm_tn()/for_each_index().
// Defaults to parallel when OpenMP is compiled in.
void set_parallel(bool enabled);
bool parallel_enabled();

void mm(const double* A, const double* B, double* C, int m, int k, int n);
void mm_nt(const double* A, const double* B, double* C, int m, int k, int n);
void mm_tn(const double* A, const double* B, double* C, int m, int k, int n);
void for_each_index(size_t n, const std::function<void(size_t)>& body);

}  // namespace sentrec::kernels

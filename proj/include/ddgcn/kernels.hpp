#pragma once

#include <cstddef>

// Dense kernels behind the tensor ops. Each kernel exists twice: the default
// entry point parallelizes large loops with OpenMP, and kern::serial holds the
// plain-loop reference used by the tests and the benchmark. Both variants run
// the identical per-element arithmetic in the identical order, so their
// results are bitwise equal and independent of the thread count.

namespace ddgcn::kern {

// c[m x n] = a[m x k] * b[k x n]; accumulates into c when acc is set.
void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool acc = false);

// c[m x n] = a[m x k] * b[n x k]^T
void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool acc = false);

// c[m x n] = a[k x m]^T * b[k x n]
void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool acc = false);

void add(const double* a, const double* b, double* out, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
void div(const double* a, const double* b, double* out, std::size_t n);
void add_scalar(const double* a, double s, double* out, std::size_t n);
void scale(const double* a, double s, double* out, std::size_t n);
void sigmoid(const double* x, double* y, std::size_t n);
void relu(const double* x, double* y, std::size_t n);
void rsqrt(const double* x, double* y, std::size_t n);

// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

// Fixed left-to-right accumulation; kept serial so the summation order never
// depends on the thread count.
double sum(const double* x, std::size_t n);

namespace serial {

void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool acc = false);
void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool acc = false);
void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool acc = false);
void add(const double* a, const double* b, double* out, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
void div(const double* a, const double* b, double* out, std::size_t n);
void add_scalar(const double* a, double s, double* out, std::size_t n);
void scale(const double* a, double s, double* out, std::size_t n);
void sigmoid(const double* x, double* y, std::size_t n);
void relu(const double* x, double* y, std::size_t n);
void rsqrt(const double* x, double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double sum(const double* x, std::size_t n);

}  // namespace serial

}  // namespace ddgcn::kern

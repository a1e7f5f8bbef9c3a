#include "ddgcn/kernels.hpp"

#include <cmath>

namespace ddgcn::kern {

namespace {

// Work thresholds below which spawning a parallel region costs more than the
// loop itself. Chosen from the benchmark tool; results do not depend on them.
constexpr std::size_t kMatmulParallelFlops = 1u << 16;
constexpr std::size_t kMapParallelSize = 1u << 15;

inline double sigmoid1(double x) {
  // Split on sign so exp never overflows.
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool acc) {
  const bool big = m * k * n >= kMatmulParallelFlops;
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    double* ci = c + i * n;
    if (!acc) {
      for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
    }
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool acc) {
  const bool big = m * k * n >= kMatmulParallelFlops;
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] = acc ? ci[j] + s : s;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool acc) {
  const bool big = m * k * n >= kMatmulParallelFlops;
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    double* ci = c + i * n;
    if (!acc) {
      for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
    }
    for (std::size_t p = 0; p < k; ++p) {
      const double api = a[p * m + i];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

#define DDGCN_MAP_BINARY(name, expr)                                       \
  void name(const double* a, const double* b, double* out, std::size_t n) { \
    const bool big = n >= kMapParallelSize;                                 \
    _Pragma("omp parallel for schedule(static) if (big)")                   \
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {   \
      out[i] = (expr);                                                      \
    }                                                                       \
  }

DDGCN_MAP_BINARY(add, a[i] + b[i])
DDGCN_MAP_BINARY(sub, a[i] - b[i])
DDGCN_MAP_BINARY(mul, a[i] * b[i])
DDGCN_MAP_BINARY(div, a[i] / b[i])
#undef DDGCN_MAP_BINARY

void add_scalar(const double* a, double s, double* out, std::size_t n) {
  const bool big = n >= kMapParallelSize;
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) out[i] = a[i] + s;
}

void scale(const double* a, double s, double* out, std::size_t n) {
  const bool big = n >= kMapParallelSize;
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) out[i] = a[i] * s;
}

void sigmoid(const double* x, double* y, std::size_t n) {
  const bool big = n >= kMapParallelSize;
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) y[i] = sigmoid1(x[i]);
}

void relu(const double* x, double* y, std::size_t n) {
  const bool big = n >= kMapParallelSize;
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void rsqrt(const double* x, double* y, std::size_t n) {
  const bool big = n >= kMapParallelSize;
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    y[i] = 1.0 / std::sqrt(x[i]);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const bool big = n >= kMapParallelSize;
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) y[i] += alpha * x[i];
}

double sum(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

namespace serial {

void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool acc) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    if (!acc) {
      for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
    }
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool acc) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] = acc ? ci[j] + s : s;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool acc) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    if (!acc) {
      for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
    }
    for (std::size_t p = 0; p < k; ++p) {
      const double api = a[p * m + i];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
void sub(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}
void mul(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
void div(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] / b[i];
}
void add_scalar(const double* a, double s, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + s;
}
void scale(const double* a, double s, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}
void sigmoid(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = sigmoid1(x[i]);
}
void relu(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}
void rsqrt(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = 1.0 / std::sqrt(x[i]);
}
void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}
double sum(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

}  // namespace serial

}  // namespace ddgcn::kern

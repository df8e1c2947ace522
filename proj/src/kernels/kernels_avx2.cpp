// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma; nothing here may be called unless the running CPU reports
// both features (see dispatch.cpp).

#include "irregts/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define IRREGTS_HAVE_AVX2_TU 1
#include <immintrin.h>
#else
#define IRREGTS_HAVE_AVX2_TU 0
#endif

namespace irregts::kernels {

#if IRREGTS_HAVE_AVX2_TU

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

void affine_avx2(double* y, const double* W, const double* x, const double* b, size_t m,
                 size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const double* row = W + i * n;
    __m256d acc = _mm256_setzero_pd();
    size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(row + j), _mm256_loadu_pd(x + j), acc);
    }
    double tail = 0.0;
    for (; j < n; ++j) tail += row[j] * x[j];
    const double total = hsum(acc) + tail;
    y[i] = b ? total + b[i] : total;
  }
}

void matvec_t_acc_avx2(double* dx, const double* W, const double* dy, size_t m, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    const double* row = W + i * n;
    const __m256d g = _mm256_set1_pd(dy[i]);
    size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      __m256d v = _mm256_fmadd_pd(g, _mm256_loadu_pd(row + j), _mm256_loadu_pd(dx + j));
      _mm256_storeu_pd(dx + j, v);
    }
    for (; j < n; ++j) dx[j] += dy[i] * row[j];
  }
}

void ger_acc_avx2(double* dW, const double* dy, const double* x, size_t m, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    double* row = dW + i * n;
    const __m256d g = _mm256_set1_pd(dy[i]);
    size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      __m256d v = _mm256_fmadd_pd(g, _mm256_loadu_pd(x + j), _mm256_loadu_pd(row + j));
      _mm256_storeu_pd(row + j, v);
    }
    for (; j < n; ++j) row[j] += dy[i] * x[j];
  }
}

void axpy_avx2(double* y, double a, const double* x, size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, v);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void mul_avx2(double* out, const double* a, const double* b, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void mul_acc_avx2(double* out, const double* a, const double* b, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v =
        _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), _mm256_loadu_pd(out + i));
    _mm256_storeu_pd(out + i, v);
  }
  for (; i < n; ++i) out[i] += a[i] * b[i];
}

double dot_avx2(const double* a, const double* b, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return hsum(acc) + tail;
}

double sum_avx2(const double* x, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double tail = 0.0;
  for (; i < n; ++i) tail += x[i];
  return hsum(acc) + tail;
}

const Ops avx2_table = {affine_avx2, matvec_t_acc_avx2, ger_acc_avx2, axpy_avx2,
                        mul_avx2,    mul_acc_avx2,      dot_avx2,     sum_avx2,
                        "avx2"};

}  // namespace

const Ops* avx2_ops_compiled() { return &avx2_table; }

#else

const Ops* avx2_ops_compiled() { return nullptr; }

#endif  // IRREGTS_HAVE_AVX2_TU

}  // namespace irregts::kernels

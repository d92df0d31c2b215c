// AVX2+FMA kernels, 4 doubles per lane. Built only on x86-64; this TU is
// compiled with -mavx2 -mfma and must not be entered unless the CPU reports
// both features (see dispatch.cpp).

#if defined(__x86_64__) || defined(_M_X64) || defined(__i386__) || defined(_M_IX86)

#include <immintrin.h>

#include <cmath>
#include <cstring>

#include "ednas/kernels.hpp"

namespace ednas::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n,
             bool acc) {
  if (!acc) std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  const int n4 = n & ~3;
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const __m256d aip = _mm256_set1_pd(arow[p]);
      const double* brow = b + static_cast<std::size_t>(p) * n;
      int j = 0;
      for (; j < n4; j += 4) {
        __m256d cj = _mm256_loadu_pd(crow + j);
        cj = _mm256_fmadd_pd(aip, _mm256_loadu_pd(brow + j), cj);
        _mm256_storeu_pd(crow + j, cj);
      }
      for (; j < n; ++j) crow[j] += arow[p] * brow[j];
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n,
             bool acc) {
  const int k4 = k & ~3;
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * k;
      __m256d accv = _mm256_setzero_pd();
      int p = 0;
      for (; p < k4; p += 4)
        accv = _mm256_fmadd_pd(_mm256_loadu_pd(arow + p),
                               _mm256_loadu_pd(brow + p), accv);
      double s = hsum(accv);
      for (; p < k; ++p) s += arow[p] * brow[p];
      crow[j] = acc ? crow[j] + s : s;
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n,
             bool acc) {
  if (!acc) std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  const int n4 = n & ~3;
  for (int p = 0; p < k; ++p) {
    const double* arow = a + static_cast<std::size_t>(p) * m;
    const double* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const __m256d api = _mm256_set1_pd(arow[i]);
      double* crow = c + static_cast<std::size_t>(i) * n;
      int j = 0;
      for (; j < n4; j += 4) {
        __m256d cj = _mm256_loadu_pd(crow + j);
        cj = _mm256_fmadd_pd(api, _mm256_loadu_pd(brow + j), cj);
        _mm256_storeu_pd(crow + j, cj);
      }
      for (; j < n; ++j) crow[j] += arow[i] * brow[j];
    }
  }
}

void add(const double* a, const double* b, double* c, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(c + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                          _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) c[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* c, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(c + i, _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                          _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) c[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* c, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(c + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                          _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) c[i] = a[i] * b[i];
}

void mul_acc(const double* a, const double* b, double* c, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d ci = _mm256_loadu_pd(c + i);
    ci = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), ci);
    _mm256_storeu_pd(c + i, ci);
  }
  for (; i < n; ++i) c[i] += a[i] * b[i];
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yi = _mm256_loadu_pd(y + i);
    yi = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yi);
    _mm256_storeu_pd(y + i, yi);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale(const double* x, double alpha, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = alpha * x[i];
}

void relu(const double* x, double* y, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_max_pd(zero, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* x, const double* dy, double* dx,
                   std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    __m256d g = _mm256_and_pd(mask, _mm256_loadu_pd(dy + i));
    _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), g));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0) dx[i] += dy[i];
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d accv = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    accv = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           accv);
  double s = hsum(accv);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum(const double* x, std::size_t n) {
  __m256d accv = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    accv = _mm256_add_pd(accv, _mm256_loadu_pd(x + i));
  double s = hsum(accv);
  for (; i < n; ++i) s += x[i];
  return s;
}

double vmax(const double* x, std::size_t n) {
  std::size_t i = 0;
  double m = x[0];
  if (n >= 4) {
    __m256d mv = _mm256_loadu_pd(x);
    for (i = 4; i + 4 <= n; i += 4)
      mv = _mm256_max_pd(mv, _mm256_loadu_pd(x + i));
    __m128d lo = _mm256_castpd256_pd128(mv);
    __m128d hi = _mm256_extractf128_pd(mv, 1);
    lo = _mm_max_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    m = _mm_cvtsd_f64(_mm_max_sd(lo, shuf));
  }
  for (; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

void adam_step(double* p, const double* g, double* m, double* v, std::size_t n,
               double lr, double beta1, double beta2, double eps, double bc1,
               double bc2) {
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b1c = _mm256_set1_pd(1.0 - beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d b2c = _mm256_set1_pd(1.0 - beta2);
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d epsv = _mm256_set1_pd(eps);
  const __m256d bc1v = _mm256_set1_pd(bc1);
  const __m256d bc2v = _mm256_set1_pd(bc2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gi = _mm256_loadu_pd(g + i);
    __m256d mi = _mm256_loadu_pd(m + i);
    __m256d vi = _mm256_loadu_pd(v + i);
    mi = _mm256_fmadd_pd(b1, mi, _mm256_mul_pd(b1c, gi));
    vi = _mm256_fmadd_pd(b2, vi, _mm256_mul_pd(b2c, _mm256_mul_pd(gi, gi)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d mhat = _mm256_div_pd(mi, bc1v);
    const __m256d vhat = _mm256_div_pd(vi, bc2v);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lrv, mhat), denom);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

}  // namespace

const Kernels& avx2() {
  static const Kernels k{
      "avx2",  gemm_nn, gemm_nt,  gemm_tn,       add,  sub, mul,
      mul_acc, axpy,    scale,    relu,          relu_backward,
      dot,     sum,     vmax,     adam_step,
  };
  return k;
}

}  // namespace ednas::kernels

#endif  // x86 guard

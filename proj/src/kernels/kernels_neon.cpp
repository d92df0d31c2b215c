// NEON kernels for aarch64, 2 doubles per lane. float64x2_t arithmetic is
// baseline on aarch64 so no extra compile flags are required.

#if defined(__aarch64__) || defined(_M_ARM64)

#include <arm_neon.h>

#include <cmath>
#include <cstring>

#include "ednas/kernels.hpp"

namespace ednas::kernels {
namespace {

void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n,
             bool acc) {
  if (!acc) std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  const int n2 = n & ~1;
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const float64x2_t aip = vdupq_n_f64(arow[p]);
      const double* brow = b + static_cast<std::size_t>(p) * n;
      int j = 0;
      for (; j < n2; j += 2) {
        float64x2_t cj = vld1q_f64(crow + j);
        cj = vfmaq_f64(cj, aip, vld1q_f64(brow + j));
        vst1q_f64(crow + j, cj);
      }
      for (; j < n; ++j) crow[j] += arow[p] * brow[j];
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n,
             bool acc) {
  const int k2 = k & ~1;
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * k;
      float64x2_t accv = vdupq_n_f64(0.0);
      int p = 0;
      for (; p < k2; p += 2)
        accv = vfmaq_f64(accv, vld1q_f64(arow + p), vld1q_f64(brow + p));
      double s = vaddvq_f64(accv);
      for (; p < k; ++p) s += arow[p] * brow[p];
      crow[j] = acc ? crow[j] + s : s;
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n,
             bool acc) {
  if (!acc) std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  const int n2 = n & ~1;
  for (int p = 0; p < k; ++p) {
    const double* arow = a + static_cast<std::size_t>(p) * m;
    const double* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const float64x2_t api = vdupq_n_f64(arow[i]);
      double* crow = c + static_cast<std::size_t>(i) * n;
      int j = 0;
      for (; j < n2; j += 2) {
        float64x2_t cj = vld1q_f64(crow + j);
        cj = vfmaq_f64(cj, api, vld1q_f64(brow + j));
        vst1q_f64(crow + j, cj);
      }
      for (; j < n; ++j) crow[j] += arow[i] * brow[j];
    }
  }
}

void add(const double* a, const double* b, double* c, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(c + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) c[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* c, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(c + i, vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) c[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* c, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(c + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) c[i] = a[i] * b[i];
}

void mul_acc(const double* a, const double* b, double* c, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t ci = vld1q_f64(c + i);
    ci = vfmaq_f64(ci, vld1q_f64(a + i), vld1q_f64(b + i));
    vst1q_f64(c + i, ci);
  }
  for (; i < n; ++i) c[i] += a[i] * b[i];
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t av = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t yi = vld1q_f64(y + i);
    yi = vfmaq_f64(yi, av, vld1q_f64(x + i));
    vst1q_f64(y + i, yi);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale(const double* x, double alpha, double* y, std::size_t n) {
  const float64x2_t av = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(y + i, vmulq_f64(av, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] = alpha * x[i];
}

void relu(const double* x, double* y, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(y + i, vmaxq_f64(zero, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* x, const double* dy, double* dx,
                   std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    uint64x2_t mask = vcgtq_f64(vld1q_f64(x + i), zero);
    float64x2_t g = vreinterpretq_f64_u64(
        vandq_u64(mask, vreinterpretq_u64_f64(vld1q_f64(dy + i))));
    vst1q_f64(dx + i, vaddq_f64(vld1q_f64(dx + i), g));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0) dx[i] += dy[i];
}

double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t accv = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    accv = vfmaq_f64(accv, vld1q_f64(a + i), vld1q_f64(b + i));
  double s = vaddvq_f64(accv);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum(const double* x, std::size_t n) {
  float64x2_t accv = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) accv = vaddq_f64(accv, vld1q_f64(x + i));
  double s = vaddvq_f64(accv);
  for (; i < n; ++i) s += x[i];
  return s;
}

double vmax(const double* x, std::size_t n) {
  std::size_t i = 0;
  double m = x[0];
  if (n >= 2) {
    float64x2_t mv = vld1q_f64(x);
    for (i = 2; i + 2 <= n; i += 2) mv = vmaxq_f64(mv, vld1q_f64(x + i));
    m = vmaxvq_f64(mv);
  }
  for (; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

void adam_step(double* p, const double* g, double* m, double* v, std::size_t n,
               double lr, double beta1, double beta2, double eps, double bc1,
               double bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

}  // namespace

const Kernels& neon() {
  static const Kernels k{
      "neon",  gemm_nn, gemm_nt,  gemm_tn,       add,  sub, mul,
      mul_acc, axpy,    scale,    relu,          relu_backward,
      dot,     sum,     vmax,     adam_step,
  };
  return k;
}

}  // namespace ednas::kernels

#endif  // aarch64 guard

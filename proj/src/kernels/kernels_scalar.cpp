// Reference scalar kernels. Every other backend is tested against these.

#include "ednas/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace ednas::kernels {
namespace {

void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n,
             bool acc) {
  if (!acc) std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double aip = arow[p];
      const double* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n,
             bool acc) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * k;
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
      crow[j] = acc ? crow[j] + s : s;
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n,
             bool acc) {
  // a is [k x m], b is [k x n]
  if (!acc) std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
  for (int p = 0; p < k; ++p) {
    const double* arow = a + static_cast<std::size_t>(p) * m;
    const double* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double api = arow[i];
      double* crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

void add(const double* a, const double* b, double* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) c[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) c[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) c[i] = a[i] * b[i];
}

void mul_acc(const double* a, const double* b, double* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) c[i] += a[i] * b[i];
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(const double* x, double alpha, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = alpha * x[i];
}

void relu(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* x, const double* dy, double* dx,
                   std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > 0.0) dx[i] += dy[i];
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double vmax(const double* x, std::size_t n) {
  double m = x[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

void adam_step(double* p, const double* g, double* m, double* v, std::size_t n,
               double lr, double beta1, double beta2, double eps, double bc1,
               double bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

const Kernels& scalar() {
  static const Kernels k{
      "scalar", gemm_nn, gemm_nt,  gemm_tn,       add,  sub, mul,
      mul_acc,  axpy,    scale,    relu,          relu_backward,
      dot,      sum,     vmax,     adam_step,
  };
  return k;
}

}  // namespace ednas::kernels

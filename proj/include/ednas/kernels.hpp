#pragma once
// Dense double-precision inner-loop kernels with runtime backend selection.
// The scalar table is the reference semantics; vector backends must agree
// with it to floating-point tolerance (see tests/kernels_test.cpp).

#include <cstddef>
#include <string_view>
#include <vector>

namespace ednas::kernels {

struct Kernels {
  const char* name;

  // c[m x n] = a[m x k] * b[k x n], accumulating into c when acc is set
  void (*gemm_nn)(const double* a, const double* b, double* c, int m, int k,
                  int n, bool acc);
  // c[m x n] = a[m x k] * b[n x k]^T
  void (*gemm_nt)(const double* a, const double* b, double* c, int m, int k,
                  int n, bool acc);
  // c[m x n] = a[k x m]^T * b[k x n]
  void (*gemm_tn)(const double* a, const double* b, double* c, int m, int k,
                  int n, bool acc);

  void (*add)(const double* a, const double* b, double* c, std::size_t n);
  void (*sub)(const double* a, const double* b, double* c, std::size_t n);
  void (*mul)(const double* a, const double* b, double* c, std::size_t n);
  // c += a * b   elementwise
  void (*mul_acc)(const double* a, const double* b, double* c, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = alpha * x
  void (*scale)(const double* x, double alpha, double* y, std::size_t n);
  void (*relu)(const double* x, double* y, std::size_t n);
  // dx += dy where x > 0
  void (*relu_backward)(const double* x, const double* dy, double* dx,
                        std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  double (*max)(const double* x, std::size_t n);  // n >= 1, finite inputs

  // Adam update for one parameter buffer. bc1/bc2 are the bias-correction
  // denominators 1-beta1^t and 1-beta2^t for the current step t.
  void (*adam_step)(double* p, const double* g, double* m, double* v,
                    std::size_t n, double lr, double beta1, double beta2,
                    double eps, double bc1, double bc2);
};

const Kernels& scalar();
const Kernels& active();

// Force a backend by name ("scalar", "avx2", "neon"). Returns false when the
// backend is not compiled in or not supported by this CPU. The default pick
// honors the EDNAS_KERNELS environment variable, then the best available.
bool select(std::string_view name);
std::string_view active_name();
std::vector<std::string_view> available();

}  // namespace ednas::kernels

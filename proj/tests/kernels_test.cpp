// Backend equivalence: every available vector backend must match the scalar
// reference within accumulation tolerance on random inputs.

#include <doctest.h>

#include <cmath>
#include <vector>

#include "ednas/kernels.hpp"
#include "ednas/rng.hpp"

using namespace ednas;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -1.0,
                               double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b,
                 double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(std::fabs(a[i] - b[i]) <= tol * (1.0 + std::fabs(a[i])));
}

}  // namespace

TEST_CASE("gemm variants agree with scalar reference on all backends") {
  Rng rng(7);
  const auto& ref = kernels::scalar();
  for (auto name : kernels::available()) {
    if (name == "scalar") continue;
    const auto backup = kernels::active_name();
    REQUIRE(kernels::select(name));
    const auto& k = kernels::active();
    for (int trial = 0; trial < 20; ++trial) {
      const int m = 1 + rng.uniform_int(9);
      const int kk = 1 + rng.uniform_int(33);
      const int n = 1 + rng.uniform_int(17);
      auto a = random_vec(rng, static_cast<std::size_t>(m) * kk);
      auto b = random_vec(rng, static_cast<std::size_t>(kk) * n);
      auto bt = random_vec(rng, static_cast<std::size_t>(n) * kk);
      auto at = random_vec(rng, static_cast<std::size_t>(kk) * m);
      std::vector<double> c0(static_cast<std::size_t>(m) * n),
          c1(static_cast<std::size_t>(m) * n);

      ref.gemm_nn(a.data(), b.data(), c0.data(), m, kk, n, false);
      k.gemm_nn(a.data(), b.data(), c1.data(), m, kk, n, false);
      check_close(c0, c1, 1e-12);

      ref.gemm_nt(a.data(), bt.data(), c0.data(), m, kk, n, false);
      k.gemm_nt(a.data(), bt.data(), c1.data(), m, kk, n, false);
      check_close(c0, c1, 1e-12);

      ref.gemm_tn(at.data(), b.data(), c0.data(), m, kk, n, false);
      k.gemm_tn(at.data(), b.data(), c1.data(), m, kk, n, false);
      check_close(c0, c1, 1e-12);

      // accumulate path
      auto base = random_vec(rng, static_cast<std::size_t>(m) * n);
      c0 = base;
      c1 = base;
      ref.gemm_nn(a.data(), b.data(), c0.data(), m, kk, n, true);
      k.gemm_nn(a.data(), b.data(), c1.data(), m, kk, n, true);
      check_close(c0, c1, 1e-12);
    }
    REQUIRE(kernels::select(backup));
  }
}

TEST_CASE("elementwise and reduction kernels agree across backends") {
  Rng rng(11);
  const auto& ref = kernels::scalar();
  for (auto name : kernels::available()) {
    if (name == "scalar") continue;
    const auto backup = kernels::active_name();
    REQUIRE(kernels::select(name));
    const auto& k = kernels::active();
    for (std::size_t n : {1ul, 2ul, 3ul, 4ul, 7ul, 64ul, 129ul}) {
      auto a = random_vec(rng, n, -2.0, 2.0);
      auto b = random_vec(rng, n, -2.0, 2.0);
      std::vector<double> c0(n), c1(n);

      ref.add(a.data(), b.data(), c0.data(), n);
      k.add(a.data(), b.data(), c1.data(), n);
      check_close(c0, c1, 0.0);
      ref.sub(a.data(), b.data(), c0.data(), n);
      k.sub(a.data(), b.data(), c1.data(), n);
      check_close(c0, c1, 0.0);
      ref.mul(a.data(), b.data(), c0.data(), n);
      k.mul(a.data(), b.data(), c1.data(), n);
      check_close(c0, c1, 0.0);
      ref.relu(a.data(), c0.data(), n);
      k.relu(a.data(), c1.data(), n);
      check_close(c0, c1, 0.0);

      c0 = b;
      c1 = b;
      ref.axpy(0.37, a.data(), c0.data(), n);
      k.axpy(0.37, a.data(), c1.data(), n);
      check_close(c0, c1, 1e-14);

      c0.assign(n, 0.5);
      c1.assign(n, 0.5);
      ref.mul_acc(a.data(), b.data(), c0.data(), n);
      k.mul_acc(a.data(), b.data(), c1.data(), n);
      check_close(c0, c1, 1e-14);

      c0.assign(n, 0.0);
      c1.assign(n, 0.0);
      ref.relu_backward(a.data(), b.data(), c0.data(), n);
      k.relu_backward(a.data(), b.data(), c1.data(), n);
      check_close(c0, c1, 0.0);

      CHECK(std::fabs(ref.dot(a.data(), b.data(), n) -
                      k.dot(a.data(), b.data(), n)) <= 1e-12 * (n + 1));
      CHECK(std::fabs(ref.sum(a.data(), n) - k.sum(a.data(), n)) <=
            1e-12 * (n + 1));
      CHECK(ref.max(a.data(), n) == k.max(a.data(), n));
    }
    REQUIRE(kernels::select(backup));
  }
}

TEST_CASE("adam kernel matches scalar reference") {
  Rng rng(13);
  const auto& ref = kernels::scalar();
  for (auto name : kernels::available()) {
    if (name == "scalar") continue;
    const auto backup = kernels::active_name();
    REQUIRE(kernels::select(name));
    const auto& k = kernels::active();
    const std::size_t n = 37;
    auto p0 = random_vec(rng, n);
    auto g = random_vec(rng, n);
    auto p1 = p0;
    std::vector<double> m0(n, 0.0), v0(n, 0.0), m1(n, 0.0), v1(n, 0.0);
    for (int t = 1; t <= 5; ++t) {
      const double bc1 = 1.0 - std::pow(0.9, t);
      const double bc2 = 1.0 - std::pow(0.999, t);
      ref.adam_step(p0.data(), g.data(), m0.data(), v0.data(), n, 1e-2, 0.9,
                    0.999, 1e-8, bc1, bc2);
      k.adam_step(p1.data(), g.data(), m1.data(), v1.data(), n, 1e-2, 0.9,
                  0.999, 1e-8, bc1, bc2);
    }
    check_close(p0, p1, 1e-13);
    check_close(m0, m1, 1e-13);
    check_close(v0, v1, 1e-13);
    REQUIRE(kernels::select(backup));
  }
}

TEST_CASE("dispatch reports a coherent backend set") {
  auto names = kernels::available();
  REQUIRE(!names.empty());
  CHECK(names[0] == "scalar");
  bool found = false;
  for (auto n : names) found = found || n == kernels::active_name();
  CHECK(found);
  CHECK_FALSE(kernels::select("no-such-backend"));
}

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "notmiwae/kernels.hpp"
#include "support/oracles.hpp"

using namespace notmiwae;

namespace {

std::vector<double> random_vec(std::size_t n, double lo, double hi,
                               std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(g);
  return v;
}

double rel_err(double got, double want) {
  return std::fabs(got - want) / std::max(std::fabs(want), 1e-300);
}

const std::vector<std::size_t> kSizes = {1, 2, 3, 4, 5, 7, 8, 16, 33, 67, 1000};

bool have_avx2() { return kernels::backend_available(kernels::Backend::avx2); }

}  // namespace

TEST_SUITE_BEGIN("kernels");

TEST_CASE("unary kernels agree across lanes") {
  if (!have_avx2()) return;
  const auto& ks = kernels::scalar_ops;
  const auto& kv = kernels::avx2_ops;
  struct Case {
    void (*const kernels::Ops::*fn)(const double*, double*, std::size_t);
    double lo, hi, tol;
  };
  const Case cases[] = {
      {&kernels::Ops::exp, -30.0, 30.0, 1e-13},
      {&kernels::Ops::log, 1e-6, 50.0, 1e-13},
      {&kernels::Ops::tanh, -25.0, 25.0, 1e-13},
      {&kernels::Ops::sigmoid, -40.0, 40.0, 1e-13},
      {&kernels::Ops::softplus, -40.0, 40.0, 1e-13},
      {&kernels::Ops::relu, -5.0, 5.0, 0.0},
      {&kernels::Ops::square, -5.0, 5.0, 0.0},
      {&kernels::Ops::neg, -5.0, 5.0, 0.0},
  };
  std::uint64_t seed = 11;
  for (const auto& cs : cases) {
    for (std::size_t n : kSizes) {
      auto x = random_vec(n, cs.lo, cs.hi, seed++);
      std::vector<double> a(n), b(n);
      (ks.*cs.fn)(x.data(), a.data(), n);
      (kv.*cs.fn)(x.data(), b.data(), n);
      for (std::size_t i = 0; i < n; ++i) {
        if (cs.tol == 0.0)
          CHECK(a[i] == b[i]);
        else
          CHECK(rel_err(b[i], a[i]) < cs.tol);
      }
    }
  }
}

TEST_CASE("binary and fused kernels agree across lanes") {
  if (!have_avx2()) return;
  const auto& ks = kernels::scalar_ops;
  const auto& kv = kernels::avx2_ops;
  for (std::size_t n : kSizes) {
    auto x = random_vec(n, -4.0, 4.0, 101 + n);
    auto y = random_vec(n, 0.5, 4.0, 202 + n);
    std::vector<double> a(n), b(n);
    ks.add(x.data(), y.data(), a.data(), n);
    kv.add(x.data(), y.data(), b.data(), n);
    CHECK(a == b);
    ks.div(x.data(), y.data(), a.data(), n);
    kv.div(x.data(), y.data(), b.data(), n);
    CHECK(a == b);
    ks.scale(x.data(), 1.7, a.data(), n);
    kv.scale(x.data(), 1.7, b.data(), n);
    CHECK(a == b);

    // FMA-backed kernels differ by at most a rounding of the product
    std::vector<double> ya = y, yb = y;
    ks.axpy(0.37, x.data(), ya.data(), n);
    kv.axpy(0.37, x.data(), yb.data(), n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::fabs(yb[i] - ya[i]) < 1e-14 * (1.0 + std::fabs(ya[i])));
    ya = y;
    yb = y;
    ks.madd(x.data(), x.data(), ya.data(), n);
    kv.madd(x.data(), x.data(), yb.data(), n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::fabs(yb[i] - ya[i]) < 1e-14 * (1.0 + std::fabs(ya[i])));
  }
}

TEST_CASE("reductions agree across lanes") {
  if (!have_avx2()) return;
  const auto& ks = kernels::scalar_ops;
  const auto& kv = kernels::avx2_ops;
  for (std::size_t n : kSizes) {
    auto x = random_vec(n, -3.0, 3.0, 303 + n);
    auto y = random_vec(n, -3.0, 3.0, 404 + n);
    CHECK(rel_err(kv.sum(x.data(), n), ks.sum(x.data(), n)) < 1e-13);
    CHECK(kv.max(x.data(), n) == ks.max(x.data(), n));
    CHECK(rel_err(kv.dot(x.data(), y.data(), n), ks.dot(x.data(), y.data(), n)) <
          1e-13);
  }
}

TEST_CASE("matmul variants match the naive triple loop") {
  std::mt19937_64 g(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (auto [m, k, n] : {std::array<std::size_t, 3>{4, 3, 2},
                         {1, 5, 7},
                         {8, 8, 8},
                         {3, 1, 4},
                         {5, 9, 6}}) {
    std::vector<double> a(m * k), b(k * n);
    for (double& v : a) v = u(g);
    for (double& v : b) v = u(g);
    const auto want = oracles::naive_matmul(a, b, m, k, n);
    for (const kernels::Ops* ops :
         {&kernels::scalar_ops, have_avx2() ? &kernels::avx2_ops : nullptr}) {
      if (!ops) continue;
      std::vector<double> c(m * n, -7.0);
      ops->matmul_nn(a.data(), b.data(), c.data(), m, k, n, false);
      for (std::size_t i = 0; i < c.size(); ++i)
        CHECK(std::fabs(c[i] - want[i]) < 1e-12);

      // nt: make bt = b^T (n x k) and ask for a * bt^T
      std::vector<double> bt(n * k);
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < n; ++j) bt[j * k + i] = b[i * n + j];
      std::fill(c.begin(), c.end(), 0.0);
      ops->matmul_nt(a.data(), bt.data(), c.data(), m, k, n, false);
      for (std::size_t i = 0; i < c.size(); ++i)
        CHECK(std::fabs(c[i] - want[i]) < 1e-12);

      // tn: at = a^T (k x m), ask for at^T * b
      std::vector<double> at(k * m);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < k; ++j) at[j * m + i] = a[i * k + j];
      std::fill(c.begin(), c.end(), 0.0);
      ops->matmul_tn(at.data(), b.data(), c.data(), m, k, n, false);
      for (std::size_t i = 0; i < c.size(); ++i)
        CHECK(std::fabs(c[i] - want[i]) < 1e-12);

      // accumulate adds on top
      ops->matmul_nn(a.data(), b.data(), c.data(), m, k, n, true);
      for (std::size_t i = 0; i < c.size(); ++i)
        CHECK(std::fabs(c[i] - 2.0 * want[i]) < 1e-11);
    }
  }
}

TEST_CASE("softplus matches the high-precision oracle on both lanes") {
  for (const kernels::Ops* ops :
       {&kernels::scalar_ops, have_avx2() ? &kernels::avx2_ops : nullptr}) {
    if (!ops) continue;
    const double xs[] = {-10.0, 0.0, 10.0};
    double out[3];
    ops->softplus(xs, out, 3);
    for (int i = 0; i < 3; ++i) {
      const long double want = std::log1p(std::exp(static_cast<long double>(xs[i])));
      CHECK(rel_err(out[i], static_cast<double>(want)) < 1e-12);
    }
  }
}

TEST_CASE("logsumexp: stability and bounds") {
  const double equal[] = {2.5, 2.5, 2.5};
  CHECK(kernels::logsumexp(equal, 3) ==
        doctest::Approx(2.5 + std::log(3.0)).epsilon(1e-12));

  const double dominant[] = {0.0, -1000.0};
  const double lse = kernels::logsumexp(dominant, 2);
  CHECK(std::isfinite(lse));
  CHECK(lse == doctest::Approx(0.0).epsilon(1e-12));

  std::mt19937_64 g(13);
  std::uniform_real_distribution<double> u(-700.0, 700.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + g() % 40;
    std::vector<double> x(n);
    for (double& v : x) v = u(g);
    const double mx = kernels::ops().max(x.data(), n);
    const double l = kernels::logsumexp(x.data(), n);
    CHECK(l >= mx);
    CHECK(l <= mx + std::log(static_cast<double>(n)) + 1e-12);
  }
}

TEST_CASE("backend dispatch is forceable and reports availability") {
  const auto before = kernels::active_backend();
  kernels::force_backend(kernels::Backend::scalar);
  CHECK(kernels::active_backend() == kernels::Backend::scalar);
  if (have_avx2()) {
    kernels::force_backend(kernels::Backend::avx2);
    CHECK(kernels::active_backend() == kernels::Backend::avx2);
  }
  kernels::reset_backend();
  CHECK(kernels::active_backend() == before);
  CHECK(kernels::backend_available(kernels::Backend::scalar));
}

TEST_SUITE_END();

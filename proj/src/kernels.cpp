#include "notmiwae/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <vector>

namespace notmiwae::kernels {
namespace {

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend detect() {
  if (const char* env = std::getenv("NOTMIWAE_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && backend_available(Backend::avx2))
      return Backend::avx2;
  }
  return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

std::atomic<int> g_forced{-1};  // -1 = auto

}  // namespace

bool backend_available(Backend b) {
  switch (b) {
    case Backend::scalar: return true;
    case Backend::avx2: return cpu_has_avx2();
  }
  return false;
}

Backend active_backend() {
  const int forced = g_forced.load(std::memory_order_relaxed);
  if (forced >= 0) return static_cast<Backend>(forced);
  static const Backend auto_detected = detect();
  return auto_detected;
}

void force_backend(Backend b) {
  if (!backend_available(b))
    throw std::runtime_error(std::string("kernel backend not available: ") + backend_name(b));
  g_forced.store(static_cast<int>(b), std::memory_order_relaxed);
}

void reset_backend() { g_forced.store(-1, std::memory_order_relaxed); }

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
  }
  return "?";
}

const Ops& ops() {
#if defined(__x86_64__) || defined(_M_X64)
  if (active_backend() == Backend::avx2) return avx2_ops;
#endif
  return scalar_ops;
}

double logsumexp(const double* x, std::size_t n) {
  const Ops& k = ops();
  const double m = k.max(x, n);
  if (!(m > -std::numeric_limits<double>::infinity())) return m;  // all -inf
  std::vector<double> shifted(n);
  k.shift(x, -m, shifted.data(), n);
  k.exp(shifted.data(), shifted.data(), n);
  return m + std::log(k.sum(shifted.data(), n));
}

}  // namespace notmiwae::kernels

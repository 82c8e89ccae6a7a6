#pragma once

#include <cstddef>
#include <string>

// Dense double-precision kernels used by the tensor engine. Every kernel has
// a scalar reference implementation and, on x86-64, an AVX2+FMA variant. The
// active variant is chosen once at startup from CPUID (override with
// force_backend() or the NOTMIWAE_KERNELS environment variable, values
// "scalar" / "avx2"). Both lanes are equivalence-tested against each other.
namespace notmiwae::kernels {

enum class Backend { scalar, avx2 };

// Function table for one backend. All arrays are contiguous; out may alias
// the first input for elementwise ops.
struct Ops {
  // elementwise binary
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*div)(const double* a, const double* b, double* out, std::size_t n);

  // elementwise unary
  void (*exp)(const double* x, double* out, std::size_t n);
  void (*log)(const double* x, double* out, std::size_t n);
  void (*tanh)(const double* x, double* out, std::size_t n);
  void (*sigmoid)(const double* x, double* out, std::size_t n);
  void (*softplus)(const double* x, double* out, std::size_t n);
  void (*relu)(const double* x, double* out, std::size_t n);
  void (*square)(const double* x, double* out, std::size_t n);
  void (*neg)(const double* x, double* out, std::size_t n);

  // fused scalar forms
  void (*scale)(const double* x, double a, double* out, std::size_t n);  // a*x
  void (*shift)(const double* x, double a, double* out, std::size_t n);  // x+a
  void (*axpy)(double a, const double* x, double* y, std::size_t n);     // y += a*x
  void (*madd)(const double* a, const double* b, double* y, std::size_t n);  // y += a*b

  // reductions
  double (*sum)(const double* x, std::size_t n);
  double (*max)(const double* x, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);

  // matrix products, row-major, result m x n; accumulate adds into c
  // nn: c = a[m x k] * b[k x n]
  // nt: c = a[m x k] * b[n x k]^T
  // tn: c = a[k x m]^T * b[k x n]
  void (*matmul_nn)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool accumulate);
  void (*matmul_nt)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool accumulate);
  void (*matmul_tn)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool accumulate);
};

extern const Ops scalar_ops;
#if defined(__x86_64__) || defined(_M_X64)
extern const Ops avx2_ops;
#endif

bool backend_available(Backend b);
Backend active_backend();
// Pins the dispatch table for the whole process. Throws std::runtime_error
// if the backend is not available on this CPU/build.
void force_backend(Backend b);
// Returns to CPUID/env auto-selection.
void reset_backend();
const char* backend_name(Backend b);

// Active function table.
const Ops& ops();

// log(sum_i exp(x_i)) with max subtraction; n == 0 is the caller's error.
// Shared by both lanes (composed from max/shift/exp/sum of the active lane).
double logsumexp(const double* x, std::size_t n);

}  // namespace notmiwae::kernels

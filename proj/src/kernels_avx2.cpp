// AVX2+FMA kernel lane. Compiled with -mavx2 -mfma; only reachable through
// the dispatch table after a CPUID check, so no illegal-instruction hazard on
// older CPUs. Vector exp/log use Taylor/atanh-series reductions whose
// coefficients are generated constexpr (1/k!, 1/(2k+1)) instead of hard-coded
// minimax tables.
#include "notmiwae/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>

namespace notmiwae::kernels {
namespace {

constexpr int kExpTerms = 16;       // Taylor terms for e^r, |r| <= ln2/2
constexpr int kExpm1Terms = 16;     // Taylor terms for expm1(u), |u| <= 0.5
constexpr int kAtanhTerms = 20;     // odd terms for atanh(t), |t| <= 1/3

constexpr std::array<double, kExpTerms> make_inv_factorials() {
  std::array<double, kExpTerms> a{};
  double f = 1.0;
  for (int k = 0; k < kExpTerms; ++k) {
    if (k > 0) f *= static_cast<double>(k);
    a[static_cast<std::size_t>(k)] = 1.0 / f;
  }
  return a;
}
constexpr std::array<double, kAtanhTerms> make_odd_reciprocals() {
  std::array<double, kAtanhTerms> a{};
  for (int k = 0; k < kAtanhTerms; ++k)
    a[static_cast<std::size_t>(k)] = 1.0 / static_cast<double>(2 * k + 1);
  return a;
}

constexpr auto kInvFact = make_inv_factorials();
constexpr auto kOddRecip = make_odd_reciprocals();

constexpr double kLog2E = 1.4426950408889634074;
constexpr double kLn2Hi = 6.93145751953125e-1;
constexpr double kLn2Lo = 1.42860682030941723212e-6;
constexpr double kExpOverflow = 709.782712893384;
constexpr double kExpUnderflow = -745.133219101941;
constexpr double kSqrt2 = 1.41421356237309504880;

inline __m256d vset(double v) { return _mm256_set1_pd(v); }

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swap = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swap));
}
inline double hmax(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_max_pd(lo, hi);
  __m128d swap = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_max_sd(lo, swap));
}

// 2^n for integer-valued n in [-1074, 1024], split into two factors so the
// exponent field never overflows on either side.
inline void pow2_split(__m256d n, __m256d& f1, __m256d& f2) {
  __m128i ni = _mm256_cvtpd_epi32(n);
  __m128i m1 = _mm_srai_epi32(ni, 1);
  __m128i m2 = _mm_sub_epi32(ni, m1);
  __m256i e1 = _mm256_cvtepi32_epi64(m1);
  __m256i e2 = _mm256_cvtepi32_epi64(m2);
  const __m256i bias = _mm256_set1_epi64x(1023);
  f1 = _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(e1, bias), 52));
  f2 = _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(e2, bias), 52));
}

// e^r as a Taylor polynomial, valid for |r| <= ln2/2.
inline __m256d exp_poly(__m256d r) {
  __m256d p = vset(kInvFact[kExpTerms - 1]);
  for (int k = kExpTerms - 2; k >= 0; --k)
    p = _mm256_fmadd_pd(p, r, vset(kInvFact[static_cast<std::size_t>(k)]));
  return p;
}

inline __m256d v_exp(__m256d x) {
  __m256d n = _mm256_round_pd(_mm256_mul_pd(x, vset(kLog2E)),
                              _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, vset(kLn2Hi), x);
  r = _mm256_fnmadd_pd(n, vset(kLn2Lo), r);
  __m256d f1, f2;
  pow2_split(n, f1, f2);
  __m256d res = _mm256_mul_pd(_mm256_mul_pd(exp_poly(r), f1), f2);
  __m256d inf = vset(std::numeric_limits<double>::infinity());
  res = _mm256_blendv_pd(res, inf, _mm256_cmp_pd(x, vset(kExpOverflow), _CMP_GT_OQ));
  res = _mm256_blendv_pd(res, _mm256_setzero_pd(),
                         _mm256_cmp_pd(x, vset(kExpUnderflow), _CMP_LT_OQ));
  res = _mm256_blendv_pd(res, x, _mm256_cmp_pd(x, x, _CMP_UNORD_Q));
  return res;
}

// expm1(u) without range reduction, valid for |u| <= 0.5.
inline __m256d expm1_poly(__m256d u) {
  __m256d p = vset(kInvFact[kExpm1Terms - 1]);
  for (int k = kExpm1Terms - 2; k >= 1; --k)
    p = _mm256_fmadd_pd(p, u, vset(kInvFact[static_cast<std::size_t>(k)]));
  return _mm256_mul_pd(u, p);
}

// atanh(t)/t as a polynomial in t^2, valid for |t| <= 1/3.
inline __m256d atanh_over_t(__m256d t2) {
  __m256d p = vset(kOddRecip[kAtanhTerms - 1]);
  for (int k = kAtanhTerms - 2; k >= 0; --k)
    p = _mm256_fmadd_pd(p, t2, vset(kOddRecip[static_cast<std::size_t>(k)]));
  return p;
}

// log1p(y) = 2*atanh(y/(2+y)), valid for y in [0, 1]; avoids forming 1+y.
inline __m256d v_log1p_01(__m256d y) {
  __m256d t = _mm256_div_pd(y, _mm256_add_pd(vset(2.0), y));
  __m256d t2 = _mm256_mul_pd(t, t);
  return _mm256_mul_pd(_mm256_mul_pd(vset(2.0), t), atanh_over_t(t2));
}

inline __m256d v_log(__m256d x) {
  const __m256d dbl_min = vset(std::numeric_limits<double>::min());
  __m256d subn = _mm256_cmp_pd(x, dbl_min, _CMP_LT_OQ);  // includes 0/negatives
  __m256d xs = _mm256_blendv_pd(x, _mm256_mul_pd(x, vset(0x1p54)), subn);

  __m256i ix = _mm256_castpd_si256(xs);
  __m256i ebits = _mm256_srli_epi64(ix, 52);
  // exponent as double via the 2^52 offset trick (values are small positives)
  __m256i magic = _mm256_set1_epi64x(0x4330000000000000LL);
  __m256d e = _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(ebits, magic)),
                            vset(0x1p52));
  e = _mm256_sub_pd(e, vset(1023.0));
  e = _mm256_sub_pd(e, _mm256_and_pd(subn, vset(54.0)));

  const __m256i mant_mask = _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL);
  const __m256i one_bits = _mm256_set1_epi64x(0x3FF0000000000000LL);
  __m256d m = _mm256_castsi256_pd(
      _mm256_or_si256(_mm256_and_si256(ix, mant_mask), one_bits));
  __m256d big = _mm256_cmp_pd(m, vset(kSqrt2), _CMP_GT_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, vset(0.5)), big);
  e = _mm256_add_pd(e, _mm256_and_pd(big, vset(1.0)));

  // log m = 2*atanh((m-1)/(m+1)), |t| <= (sqrt2-1)/(sqrt2+1)
  __m256d t = _mm256_div_pd(_mm256_sub_pd(m, vset(1.0)),
                            _mm256_add_pd(m, vset(1.0)));
  __m256d t2 = _mm256_mul_pd(t, t);
  __m256d logm = _mm256_mul_pd(_mm256_mul_pd(vset(2.0), t), atanh_over_t(t2));

  __m256d res = _mm256_fmadd_pd(e, vset(kLn2Hi), logm);
  res = _mm256_fmadd_pd(e, vset(kLn2Lo), res);

  const __m256d inf = vset(std::numeric_limits<double>::infinity());
  const __m256d nan = vset(std::numeric_limits<double>::quiet_NaN());
  res = _mm256_blendv_pd(res, _mm256_sub_pd(_mm256_setzero_pd(), inf),
                         _mm256_cmp_pd(x, _mm256_setzero_pd(), _CMP_EQ_OQ));
  res = _mm256_blendv_pd(res, nan,
                         _mm256_cmp_pd(x, _mm256_setzero_pd(), _CMP_LT_OQ));
  res = _mm256_blendv_pd(res, inf, _mm256_cmp_pd(x, inf, _CMP_EQ_OQ));
  res = _mm256_blendv_pd(res, x, _mm256_cmp_pd(x, x, _CMP_UNORD_Q));
  return res;
}

inline __m256d v_abs(__m256d x) {
  return _mm256_andnot_pd(vset(-0.0), x);
}

inline __m256d v_sigmoid(__m256d x) {
  __m256d e = v_exp(_mm256_sub_pd(_mm256_setzero_pd(), v_abs(x)));
  __m256d denom = _mm256_add_pd(vset(1.0), e);
  __m256d pos = _mm256_div_pd(vset(1.0), denom);
  __m256d neg = _mm256_div_pd(e, denom);
  return _mm256_blendv_pd(neg, pos, _mm256_cmp_pd(x, _mm256_setzero_pd(), _CMP_GE_OQ));
}

inline __m256d v_softplus(__m256d x) {
  __m256d e = v_exp(_mm256_sub_pd(_mm256_setzero_pd(), v_abs(x)));
  __m256d l1p = v_log1p_01(e);
  return _mm256_add_pd(_mm256_max_pd(x, _mm256_setzero_pd()), l1p);
}

inline __m256d v_tanh(__m256d x) {
  __m256d u = _mm256_mul_pd(vset(2.0), x);
  // |u| <= 0.5: t = expm1(u) / (expm1(u) + 2), no cancellation near 0
  __m256d em1 = expm1_poly(u);
  __m256d small_val = _mm256_div_pd(em1, _mm256_add_pd(em1, vset(2.0)));
  // |u| > 0.5: |tanh| = (1 - e) / (1 + e), e = exp(-2|x|)
  __m256d e = v_exp(_mm256_sub_pd(_mm256_setzero_pd(), v_abs(u)));
  __m256d mag = _mm256_div_pd(_mm256_sub_pd(vset(1.0), e),
                              _mm256_add_pd(vset(1.0), e));
  __m256d big_val = _mm256_or_pd(mag, _mm256_and_pd(x, vset(-0.0)));
  __m256d small = _mm256_cmp_pd(v_abs(u), vset(0.5), _CMP_LE_OQ);
  __m256d res = _mm256_blendv_pd(big_val, small_val, small);
  return _mm256_blendv_pd(res, x, _mm256_cmp_pd(x, x, _CMP_UNORD_Q));
}

// Runs `fn` over the full array; the tail goes through the same vector body
// via a padded stack buffer so results do not depend on element position.
template <typename Fn>
inline void map1(const double* x, double* out, std::size_t n, Fn fn) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, fn(_mm256_loadu_pd(x + i)));
  if (i < n) {
    alignas(32) double buf[4] = {0, 0, 0, 0};
    std::memcpy(buf, x + i, (n - i) * sizeof(double));
    __m256d r = fn(_mm256_load_pd(buf));
    _mm256_store_pd(buf, r);
    std::memcpy(out + i, buf, (n - i) * sizeof(double));
  }
}

template <typename Fn>
inline void map2(const double* a, const double* b, double* out, std::size_t n, Fn fn) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, fn(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  if (i < n) {
    alignas(32) double ba[4] = {0, 0, 0, 0};
    alignas(32) double bb[4] = {1, 1, 1, 1};  // avoid 0/0 in the div tail
    std::memcpy(ba, a + i, (n - i) * sizeof(double));
    std::memcpy(bb, b + i, (n - i) * sizeof(double));
    __m256d r = fn(_mm256_load_pd(ba), _mm256_load_pd(bb));
    _mm256_store_pd(ba, r);
    std::memcpy(out + i, ba, (n - i) * sizeof(double));
  }
}

void a_add(const double* a, const double* b, double* out, std::size_t n) {
  map2(a, b, out, n, [](__m256d x, __m256d y) { return _mm256_add_pd(x, y); });
}
void a_sub(const double* a, const double* b, double* out, std::size_t n) {
  map2(a, b, out, n, [](__m256d x, __m256d y) { return _mm256_sub_pd(x, y); });
}
void a_mul(const double* a, const double* b, double* out, std::size_t n) {
  map2(a, b, out, n, [](__m256d x, __m256d y) { return _mm256_mul_pd(x, y); });
}
void a_div(const double* a, const double* b, double* out, std::size_t n) {
  map2(a, b, out, n, [](__m256d x, __m256d y) { return _mm256_div_pd(x, y); });
}

void a_exp(const double* x, double* out, std::size_t n) {
  map1(x, out, n, [](__m256d v) { return v_exp(v); });
}
void a_log(const double* x, double* out, std::size_t n) {
  map1(x, out, n, [](__m256d v) { return v_log(v); });
}
void a_tanh(const double* x, double* out, std::size_t n) {
  map1(x, out, n, [](__m256d v) { return v_tanh(v); });
}
void a_sigmoid(const double* x, double* out, std::size_t n) {
  map1(x, out, n, [](__m256d v) { return v_sigmoid(v); });
}
void a_softplus(const double* x, double* out, std::size_t n) {
  map1(x, out, n, [](__m256d v) { return v_softplus(v); });
}
void a_relu(const double* x, double* out, std::size_t n) {
  map1(x, out, n, [](__m256d v) { return _mm256_max_pd(v, _mm256_setzero_pd()); });
}
void a_square(const double* x, double* out, std::size_t n) {
  map1(x, out, n, [](__m256d v) { return _mm256_mul_pd(v, v); });
}
void a_neg(const double* x, double* out, std::size_t n) {
  map1(x, out, n, [](__m256d v) { return _mm256_sub_pd(_mm256_setzero_pd(), v); });
}

void a_scale(const double* x, double a, double* out, std::size_t n) {
  __m256d va = vset(a);
  map1(x, out, n, [va](__m256d v) { return _mm256_mul_pd(va, v); });
}
void a_shift(const double* x, double a, double* out, std::size_t n) {
  __m256d va = vset(a);
  map1(x, out, n, [va](__m256d v) { return _mm256_add_pd(va, v); });
}
void a_axpy(double a, const double* x, double* y, std::size_t n) {
  __m256d va = vset(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, acc);
  }
  for (; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}
void a_madd(const double* a, const double* b, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                                  _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, acc);
  }
  for (; i < n; ++i) y[i] = std::fma(a[i], b[i], y[i]);
}

double a_sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}
double a_max(const double* x, std::size_t n) {
  __m256d acc = vset(-std::numeric_limits<double>::infinity());
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(x + i));
  double m = hmax(acc);
  for (; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}
double a_dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  double s = hsum(acc);
  for (; i < n; ++i) s = std::fma(a[i], b[i], s);
  return s;
}

void a_matmul_nn(const double* a, const double* b, double* c,
                 std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const __m256d ail = vset(a[i * k + l]);
      const double* brow = b + l * n;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d acc = _mm256_fmadd_pd(ail, _mm256_loadu_pd(brow + j),
                                      _mm256_loadu_pd(crow + j));
        _mm256_storeu_pd(crow + j, acc);
      }
      const double ails = a[i * k + l];
      for (; j < n; ++j) crow[j] = std::fma(ails, brow[j], crow[j]);
    }
  }
}
void a_matmul_nt(const double* a, const double* b, double* c,
                 std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d = a_dot(a + i * k, b + j * k, k);
      c[i * n + j] = accumulate ? c[i * n + j] + d : d;
    }
  }
}
void a_matmul_tn(const double* a, const double* b, double* c,
                 std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t l = 0; l < k; ++l) {
    const double* arow = a + l * m;
    const double* brow = b + l * n;
    for (std::size_t i = 0; i < m; ++i) {
      const __m256d ali = vset(arow[i]);
      double* crow = c + i * n;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d acc = _mm256_fmadd_pd(ali, _mm256_loadu_pd(brow + j),
                                      _mm256_loadu_pd(crow + j));
        _mm256_storeu_pd(crow + j, acc);
      }
      for (; j < n; ++j) crow[j] = std::fma(arow[i], brow[j], crow[j]);
    }
  }
}

}  // namespace

const Ops avx2_ops = {
    a_add,  a_sub,      a_mul,  a_div,    a_exp, a_log,   a_tanh,
    a_sigmoid, a_softplus, a_relu, a_square, a_neg, a_scale, a_shift,
    a_axpy, a_madd, a_sum,      a_max,  a_dot,    a_matmul_nn, a_matmul_nt, a_matmul_tn,
};

}  // namespace notmiwae::kernels

#endif  // x86-64

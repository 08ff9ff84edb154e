#include "hicmd/simd/kernels.hpp"

#include <algorithm>
#include <vector>

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define HICMD_HAVE_X86 1
#else
#define HICMD_HAVE_X86 0
#endif

// Functions carry a target attribute instead of compiling the file with
// -mavx2, so no AVX2 code can leak into inline functions shared with other
// translation units.
#define HICMD_AVX2 __attribute__((target("avx2,fma")))

namespace hicmd::simd::avx2 {

#if HICMD_HAVE_X86
namespace {

template <class T>
struct Vec;

template <>
struct Vec<float> {
  using R = __m256;
  static constexpr std::size_t kWidth = 8;
  HICMD_AVX2 static R zero() { return _mm256_setzero_ps(); }
  HICMD_AVX2 static R load(const float* p) { return _mm256_loadu_ps(p); }
  HICMD_AVX2 static void store(float* p, R v) { _mm256_storeu_ps(p, v); }
  HICMD_AVX2 static R set1(float v) { return _mm256_set1_ps(v); }
  HICMD_AVX2 static R fma(R a, R b, R c) { return _mm256_fmadd_ps(a, b, c); }
  HICMD_AVX2 static R add(R a, R b) { return _mm256_add_ps(a, b); }
  HICMD_AVX2 static float hsum(R v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
  }
};

template <>
struct Vec<double> {
  using R = __m256d;
  static constexpr std::size_t kWidth = 4;
  HICMD_AVX2 static R zero() { return _mm256_setzero_pd(); }
  HICMD_AVX2 static R load(const double* p) { return _mm256_loadu_pd(p); }
  HICMD_AVX2 static void store(double* p, R v) { _mm256_storeu_pd(p, v); }
  HICMD_AVX2 static R set1(double v) { return _mm256_set1_pd(v); }
  HICMD_AVX2 static R fma(R a, R b, R c) { return _mm256_fmadd_pd(a, b, c); }
  HICMD_AVX2 static R add(R a, R b) { return _mm256_add_pd(a, b); }
  HICMD_AVX2 static double hsum(R v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d high64 = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
  }
};

// C(MxN) += A * B where A(i, p) = a[i * rs + p * cs]. Covers both the plain and
// the transposed-A product.
template <class T>
HICMD_AVX2 void gemm_strided_a(std::size_t m, std::size_t n, std::size_t k, const T* a,
                               std::size_t rs, std::size_t cs, const T* b, T* c) {
  using V = Vec<T>;
  using R = typename V::R;
  constexpr std::size_t w = V::kWidth;
  std::size_t j = 0;
  for (; j + 2 * w <= n; j += 2 * w) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
      T* c0 = c + i * n + j;
      T* c1 = c0 + n;
      T* c2 = c1 + n;
      T* c3 = c2 + n;
      R r00 = V::load(c0), r01 = V::load(c0 + w);
      R r10 = V::load(c1), r11 = V::load(c1 + w);
      R r20 = V::load(c2), r21 = V::load(c2 + w);
      R r30 = V::load(c3), r31 = V::load(c3 + w);
      const T* a0 = a + i * rs;
      for (std::size_t p = 0; p < k; ++p) {
        const T* brow = b + p * n + j;
        const R b0 = V::load(brow);
        const R b1 = V::load(brow + w);
        const T* ap = a0 + p * cs;
        R av = V::set1(ap[0]);
        r00 = V::fma(av, b0, r00);
        r01 = V::fma(av, b1, r01);
        av = V::set1(ap[rs]);
        r10 = V::fma(av, b0, r10);
        r11 = V::fma(av, b1, r11);
        av = V::set1(ap[2 * rs]);
        r20 = V::fma(av, b0, r20);
        r21 = V::fma(av, b1, r21);
        av = V::set1(ap[3 * rs]);
        r30 = V::fma(av, b0, r30);
        r31 = V::fma(av, b1, r31);
      }
      V::store(c0, r00);
      V::store(c0 + w, r01);
      V::store(c1, r10);
      V::store(c1 + w, r11);
      V::store(c2, r20);
      V::store(c2 + w, r21);
      V::store(c3, r30);
      V::store(c3 + w, r31);
    }
    for (; i < m; ++i) {
      T* c0 = c + i * n + j;
      R r0 = V::load(c0), r1 = V::load(c0 + w);
      for (std::size_t p = 0; p < k; ++p) {
        const T* brow = b + p * n + j;
        const R av = V::set1(a[i * rs + p * cs]);
        r0 = V::fma(av, V::load(brow), r0);
        r1 = V::fma(av, V::load(brow + w), r1);
      }
      V::store(c0, r0);
      V::store(c0 + w, r1);
    }
  }
  for (; j + w <= n; j += w) {
    for (std::size_t i = 0; i < m; ++i) {
      T* c0 = c + i * n + j;
      R r0 = V::load(c0);
      for (std::size_t p = 0; p < k; ++p) {
        r0 = V::fma(V::set1(a[i * rs + p * cs]), V::load(b + p * n + j), r0);
      }
      V::store(c0, r0);
    }
  }
  if (j < n) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const T av = a[i * rs + p * cs];
        const T* brow = b + p * n;
        for (std::size_t jj = j; jj < n; ++jj) c[i * n + jj] += av * brow[jj];
      }
    }
  }
}

template <class T>
HICMD_AVX2 void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  gemm_strided_a(m, n, k, a, k, 1, b, c);
}

template <class T>
HICMD_AVX2 void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  gemm_strided_a(m, n, k, a, 1, m, b, c);
}

// One output row against rows j..j+3 of b.
template <class T>
HICMD_AVX2 inline void gemm_nt_1x4(std::size_t k, const T* arow, const T* b0, T* crow) {
  using V = Vec<T>;
  using R = typename V::R;
  constexpr std::size_t w = V::kWidth;
  const std::size_t kv = k - k % w;
  const T* b1 = b0 + k;
  const T* b2 = b1 + k;
  const T* b3 = b2 + k;
  R s0 = V::zero(), s1 = V::zero(), s2 = V::zero(), s3 = V::zero();
  for (std::size_t p = 0; p < kv; p += w) {
    const R av = V::load(arow + p);
    s0 = V::fma(av, V::load(b0 + p), s0);
    s1 = V::fma(av, V::load(b1 + p), s1);
    s2 = V::fma(av, V::load(b2 + p), s2);
    s3 = V::fma(av, V::load(b3 + p), s3);
  }
  T t0 = V::hsum(s0), t1 = V::hsum(s1), t2 = V::hsum(s2), t3 = V::hsum(s3);
  for (std::size_t p = kv; p < k; ++p) {
    t0 += arow[p] * b0[p];
    t1 += arow[p] * b1[p];
    t2 += arow[p] * b2[p];
    t3 += arow[p] * b3[p];
  }
  crow[0] += t0;
  crow[1] += t1;
  crow[2] += t2;
  crow[3] += t3;
}

template <class T>
HICMD_AVX2 void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  using V = Vec<T>;
  using R = typename V::R;
  constexpr std::size_t w = V::kWidth;
  if (m >= 32 && n >= 2 * w) {
    // Transposing b once is cheap next to 2mnk flops and lets the row-panel
    // kernel run instead of per-element dot products.
    thread_local std::vector<T> bt;
    bt.resize(k * n);
    constexpr std::size_t blk = 32;
    for (std::size_t j0 = 0; j0 < n; j0 += blk) {
      for (std::size_t p0 = 0; p0 < k; p0 += blk) {
        const std::size_t j1 = std::min(n, j0 + blk), p1 = std::min(k, p0 + blk);
        for (std::size_t p = p0; p < p1; ++p)
          for (std::size_t j = j0; j < j1; ++j) bt[p * n + j] = b[j * k + p];
      }
    }
    gemm_strided_a(m, n, k, a, k, 1, bt.data(), c);
    return;
  }
  const std::size_t kv = k - k % w;
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) gemm_nt_1x4(k, arow, b + j * k, c + i * n + j);
    for (; j < n; ++j) {
      const T* brow = b + j * k;
      R s = V::zero();
      for (std::size_t p = 0; p < kv; p += w) s = V::fma(V::load(arow + p), V::load(brow + p), s);
      T t = V::hsum(s);
      for (std::size_t p = kv; p < k; ++p) t += arow[p] * brow[p];
      c[i * n + j] += t;
    }
  }
}

template <class T>
HICMD_AVX2 void axpy(std::size_t n, T alpha, const T* x, T* y) {
  using V = Vec<T>;
  constexpr std::size_t w = V::kWidth;
  const auto av = V::set1(alpha);
  std::size_t i = 0;
  for (; i + w <= n; i += w) V::store(y + i, V::fma(av, V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
HICMD_AVX2 T dot(std::size_t n, const T* x, const T* y) {
  using V = Vec<T>;
  constexpr std::size_t w = V::kWidth;
  auto s0 = V::zero();
  auto s1 = V::zero();
  std::size_t i = 0;
  for (; i + 2 * w <= n; i += 2 * w) {
    s0 = V::fma(V::load(x + i), V::load(y + i), s0);
    s1 = V::fma(V::load(x + i + w), V::load(y + i + w), s1);
  }
  for (; i + w <= n; i += w) s0 = V::fma(V::load(x + i), V::load(y + i), s0);
  T t = V::hsum(V::add(s0, s1));
  for (; i < n; ++i) t += x[i] * y[i];
  return t;
}

template <class T>
HICMD_AVX2 T sum(std::size_t n, const T* x) {
  using V = Vec<T>;
  constexpr std::size_t w = V::kWidth;
  auto s = V::zero();
  std::size_t i = 0;
  for (; i + w <= n; i += w) s = V::add(s, V::load(x + i));
  T t = V::hsum(s);
  for (; i < n; ++i) t += x[i];
  return t;
}

template <class T>
const KernelTable<T> kTable{&gemm_nn<T>, &gemm_nt<T>, &gemm_tn<T>, &axpy<T>, &dot<T>, &sum<T>};

}  // namespace

template <class T>
const KernelTable<T>& table() {
  return kTable<T>;
}

#else

template <class T>
const KernelTable<T>& table() {
  return scalar::table<T>();
}

#endif

template const KernelTable<float>& table<float>();
template const KernelTable<double>& table<double>();

}  // namespace hicmd::simd::avx2

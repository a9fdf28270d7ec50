// AVX2 variants of the hot per-link kernels. Compiled with -mavx2; callers
// guard with a runtime cpuid check. Elementwise kernels use the same IEEE
// operation per lane as the scalar reference, so results are bit-identical.
// Reductions use a 4-lane accumulator and differ from the scalar reference
// only by rounding of the reassociated sums.

#if defined(__x86_64__)

#include <immintrin.h>

#include <algorithm>
#include <cstddef>

namespace mesosim::kernels::avx2 {

namespace {

inline double hadd(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

}  // namespace

double sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double total = hadd(acc);
  for (; i < n; ++i) total += x[i];
  return total;
}

double sum2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(
        acc, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  double total = hadd(acc);
  for (; i < n; ++i) total += a[i] + b[i];
  return total;
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(
        acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  double total = hadd(acc);
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

void serve_capped(double* q, const double* cap, double* served,
                  std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d qv = _mm256_loadu_pd(q + i);
    const __m256d s = _mm256_min_pd(qv, _mm256_loadu_pd(cap + i));
    _mm256_storeu_pd(served + i, s);
    _mm256_storeu_pd(q + i, _mm256_sub_pd(qv, s));
  }
  for (; i < n; ++i) {
    const double s = std::min(q[i], cap[i]);
    served[i] = s;
    q[i] -= s;
  }
}

void link_speeds(const double* out_sum, const double* x_sum, const double* len,
                 const double* vff, double v_min, double inv_t, double* v,
                 std::size_t n) {
  const __m256d vmin = _mm256_set1_pd(v_min);
  const __m256d invt = _mm256_set1_pd(inv_t);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xs = _mm256_loadu_pd(x_sum + i);
    const __m256d ff = _mm256_loadu_pd(vff + i);
    const __m256d ratio = _mm256_mul_pd(
        _mm256_div_pd(
            _mm256_mul_pd(_mm256_loadu_pd(out_sum + i), _mm256_loadu_pd(len + i)),
            xs),
        invt);
    const __m256d clamped = _mm256_min_pd(ff, _mm256_max_pd(vmin, ratio));
    const __m256d occupied = _mm256_cmp_pd(xs, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(v + i, _mm256_blendv_pd(ff, clamped, occupied));
  }
  for (; i < n; ++i) {
    if (x_sum[i] > 0.0) {
      const double ratio = out_sum[i] * len[i] / x_sum[i] * inv_t;
      v[i] = std::min(vff[i], std::max(v_min, ratio));
    } else {
      v[i] = vff[i];
    }
  }
}

}  // namespace mesosim::kernels::avx2

#endif  // __x86_64__

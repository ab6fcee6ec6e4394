// Compiled with -mavx2 -mfma. Nothing here may run before the runtime
// check in kernels.cpp has confirmed CPU support.
#include "sbrel/kernels.hpp"

#include <immintrin.h>

namespace sbrel::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

double sum(std::span<const double> x) {
  const double* p = x.data();
  const std::size_t n = x.size();
  __m256d a0 = _mm256_setzero_pd();
  __m256d a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    a0 = _mm256_add_pd(a0, _mm256_loadu_pd(p + i));
    a1 = _mm256_add_pd(a1, _mm256_loadu_pd(p + i + 4));
  }
  for (; i + 4 <= n; i += 4) a0 = _mm256_add_pd(a0, _mm256_loadu_pd(p + i));
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) s += p[i];
  return s;
}

double centered_sum_squares(std::span<const double> x, double center) {
  const double* p = x.data();
  const std::size_t n = x.size();
  const __m256d c = _mm256_set1_pd(center);
  __m256d a0 = _mm256_setzero_pd();
  __m256d a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(p + i), c);
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(p + i + 4), c);
    a0 = _mm256_fmadd_pd(d0, d0, a0);
    a1 = _mm256_fmadd_pd(d1, d1, a1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(p + i), c);
    a0 = _mm256_fmadd_pd(d, d, a0);
  }
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) {
    const double d = p[i] - center;
    s += d * d;
  }
  return s;
}

double lagged_cross(std::span<const double> x, std::size_t lag) {
  if (lag >= x.size()) return 0.0;
  const double* p = x.data();
  const double* q = x.data() + lag;
  const std::size_t n = x.size() - lag;
  __m256d a0 = _mm256_setzero_pd();
  __m256d a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(p + i), _mm256_loadu_pd(q + i), a0);
    a1 = _mm256_fmadd_pd(_mm256_loadu_pd(p + i + 4), _mm256_loadu_pd(q + i + 4), a1);
  }
  for (; i + 4 <= n; i += 4)
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(p + i), _mm256_loadu_pd(q + i), a0);
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) s += p[i] * q[i];
  return s;
}

std::size_t count_below(std::span<const double> x, double threshold) {
  const double* p = x.data();
  const std::size_t n = x.size();
  const __m256d t = _mm256_set1_pd(threshold);
  std::size_t c = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d m = _mm256_cmp_pd(_mm256_loadu_pd(p + i), t, _CMP_LT_OQ);
    c += static_cast<std::size_t>(__builtin_popcount(_mm256_movemask_pd(m)));
  }
  for (; i < n; ++i) c += (p[i] < threshold) ? 1 : 0;
  return c;
}

}  // namespace sbrel::kernels::avx2

#include "freespace/kernels.hpp"

#if defined(FREESPACE_HAVE_AVX2)

#include <immintrin.h>

namespace freespace::kernels::avx2 {

// Per-lane Kahan step; mul/add kept separate (no FMA) so every element is
// bit-identical to the scalar reference.
void axpy_kahan(double* y, double* c, const double* x, double a,
                std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    const __m256d term = _mm256_mul_pd(av, xv);
    const __m256d comp = _mm256_loadu_pd(c + i);
    const __m256d corrected = _mm256_sub_pd(term, comp);
    const __m256d old = _mm256_loadu_pd(y + i);
    const __m256d t = _mm256_add_pd(old, corrected);
    _mm256_storeu_pd(c + i, _mm256_sub_pd(_mm256_sub_pd(t, old), corrected));
    _mm256_storeu_pd(y + i, t);
  }
  if (i < n) scalar::axpy_kahan(y + i, c + i, x + i, a, n - i);
}

std::uint32_t sad_u8(const std::uint8_t* a, const std::uint8_t* b,
                     std::size_t n) {
  __m256i acc = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    const __m256i va =
        _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
    const __m256i vb =
        _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
    acc = _mm256_add_epi64(acc, _mm256_sad_epu8(va, vb));
  }
  alignas(32) std::uint64_t parts[4];
  _mm256_store_si256(reinterpret_cast<__m256i*>(parts), acc);
  std::uint32_t total = static_cast<std::uint32_t>(parts[0] + parts[1] +
                                                   parts[2] + parts[3]);
  if (i < n) total += scalar::sad_u8(a + i, b + i, n - i);
  return total;
}

void mul_f32(float* out, const float* a, const float* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i),
                                            _mm256_loadu_ps(b + i)));
  }
  if (i < n) scalar::mul_f32(out + i, a + i, b + i, n - i);
}

namespace {

// Fixed pairwise lane order keeps the reduction deterministic.
inline float hsum(__m256 v) {
  const __m128 lo = _mm256_castps256_ps128(v);
  const __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 1));
  return _mm_cvtss_f32(s);
}

}  // namespace

float dot_f32(const float* a, const float* b, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_loadu_ps(a + i),
                                           _mm256_loadu_ps(b + i)));
  }
  float total = hsum(acc);
  if (i < n) total += scalar::dot_f32(a + i, b + i, n - i);
  return total;
}

float sum_f32(const float* a, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc = _mm256_add_ps(acc, _mm256_loadu_ps(a + i));
  }
  float total = hsum(acc);
  if (i < n) total += scalar::sum_f32(a + i, n - i);
  return total;
}

}  // namespace freespace::kernels::avx2

#endif  // FREESPACE_HAVE_AVX2

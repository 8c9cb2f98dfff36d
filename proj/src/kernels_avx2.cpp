#include <immintrin.h>

#include "mmvdn/kernels.hpp"

namespace mmvdn::kernels {
namespace {

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

float dot(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  }
  float acc = hsum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Four rows of C at a time so each B row is loaded once per block.
void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c) {
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    const float* a0 = a + static_cast<std::size_t>(i) * k;
    const float* a1 = a0 + k;
    const float* a2 = a1 + k;
    const float* a3 = a2 + k;
    float* c0 = c + static_cast<std::size_t>(i) * n;
    float* c1 = c0 + n;
    float* c2 = c1 + n;
    float* c3 = c2 + n;
    int j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256 s0 = _mm256_loadu_ps(c0 + j);
      __m256 s1 = _mm256_loadu_ps(c1 + j);
      __m256 s2 = _mm256_loadu_ps(c2 + j);
      __m256 s3 = _mm256_loadu_ps(c3 + j);
      for (int p = 0; p < k; ++p) {
        const __m256 bv = _mm256_loadu_ps(b + static_cast<std::size_t>(p) * n + j);
        s0 = _mm256_fmadd_ps(_mm256_set1_ps(a0[p]), bv, s0);
        s1 = _mm256_fmadd_ps(_mm256_set1_ps(a1[p]), bv, s1);
        s2 = _mm256_fmadd_ps(_mm256_set1_ps(a2[p]), bv, s2);
        s3 = _mm256_fmadd_ps(_mm256_set1_ps(a3[p]), bv, s3);
      }
      _mm256_storeu_ps(c0 + j, s0);
      _mm256_storeu_ps(c1 + j, s1);
      _mm256_storeu_ps(c2 + j, s2);
      _mm256_storeu_ps(c3 + j, s3);
    }
    for (; j < n; ++j) {
      float s0 = 0.f, s1 = 0.f, s2 = 0.f, s3 = 0.f;
      for (int p = 0; p < k; ++p) {
        const float bv = b[static_cast<std::size_t>(p) * n + j];
        s0 += a0[p] * bv;
        s1 += a1[p] * bv;
        s2 += a2[p] * bv;
        s3 += a3[p] * bv;
      }
      c0[j] += s0;
      c1[j] += s1;
      c2[j] += s2;
      c3[j] += s3;
    }
  }
  for (; i < m; ++i) {
    float* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      axpy(a[static_cast<std::size_t>(i) * k + p], b + static_cast<std::size_t>(p) * n, crow, n);
    }
  }
}

void gemm_nt(int m, int n, int k, const float* a, const float* b, float* c) {
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      c[static_cast<std::size_t>(i) * n + j] += dot(arow, b + static_cast<std::size_t>(j) * k, k);
    }
  }
}

void gemm_tn(int m, int n, int k, const float* a, const float* b, float* c) {
  for (int p = 0; p < k; ++p) {
    const float* arow = a + static_cast<std::size_t>(p) * m;
    const float* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      if (arow[i] == 0.f) continue;
      axpy(arow[i], brow, c + static_cast<std::size_t>(i) * n, n);
    }
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{"avx2", dot, axpy, gemm_nn, gemm_nt, gemm_tn};
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &table : nullptr;
}

}  // namespace mmvdn::kernels

#include <arm_neon.h>

#include "mmvdn/kernels.hpp"

namespace mmvdn::kernels {
namespace {

float dot(const float* a, const float* b, std::size_t n) {
  float32x4_t acc0 = vdupq_n_f32(0.f);
  float32x4_t acc1 = vdupq_n_f32(0.f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
    acc1 = vfmaq_f32(acc1, vld1q_f32(a + i + 4), vld1q_f32(b + i + 4));
  }
  for (; i + 4 <= n; i += 4) acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
  float acc = vaddvq_f32(vaddq_f32(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
  const float32x4_t va = vdupq_n_f32(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vfmaq_f32(vld1q_f32(y + i), va, vld1q_f32(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c) {
  for (int i = 0; i < m; ++i) {
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
    for (int i = 0; i < m; ++i) axpy(arow[i], brow, c + static_cast<std::size_t>(i) * n, n);
  }
}

}  // namespace

// NEON is mandatory on AArch64, so no runtime probe is needed.
const KernelTable* neon_table() {
  static const KernelTable table{"neon", dot, axpy, gemm_nn, gemm_nt, gemm_tn};
  return &table;
}

}  // namespace mmvdn::kernels

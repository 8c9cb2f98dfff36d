#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace mmvdn::kernels {

// Dense float inner loops. Every table implements the same contracts; the
// scalar table is the reference the vector tables are tested against.
//
// Matrices are row-major. The gemm entry points accumulate into C.
struct KernelTable {
  const char* name;

  float (*dot)(const float* a, const float* b, std::size_t n);

  // y += alpha * x
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);

  // C[M x N] += A[M x K] * B[K x N]
  void (*gemm_nn)(int m, int n, int k, const float* a, const float* b, float* c);

  // C[M x N] += A[M x K] * B[N x K]^T
  void (*gemm_nt)(int m, int n, int k, const float* a, const float* b, float* c);

  // C[M x N] += A[K x M]^T * B[K x N]
  void (*gemm_tn)(int m, int n, int k, const float* a, const float* b, float* c);
};

const KernelTable& scalar_table();

// nullptr when the variant is not compiled in or the CPU lacks the feature.
const KernelTable* avx2_table();
const KernelTable* neon_table();

// Tables usable on this machine, scalar first.
std::vector<const KernelTable*> available_tables();

// The table used by the tensor ops. Chosen once at startup: the widest
// supported variant, or the one named by MMVDN_KERNELS (scalar|avx2|neon).
const KernelTable& active();

// Override the active table by name. Throws std::invalid_argument when the
// variant is unknown or unsupported here.
void select(std::string_view name);

}  // namespace mmvdn::kernels

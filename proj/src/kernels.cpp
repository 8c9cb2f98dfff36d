#include "mmvdn/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace mmvdn::kernels {

#ifndef MMVDN_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif
#ifndef MMVDN_HAVE_NEON
const KernelTable* neon_table() { return nullptr; }
#endif

namespace {

const KernelTable* by_name(std::string_view name) {
  if (name == "scalar") return &scalar_table();
  if (name == "avx2") return avx2_table();
  if (name == "neon") return neon_table();
  return nullptr;
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("MMVDN_KERNELS"); env != nullptr && *env != '\0') {
    if (const KernelTable* t = by_name(env)) return t;
    throw std::invalid_argument(std::string("MMVDN_KERNELS: unsupported kernel variant '") + env + "'");
  }
  if (const KernelTable* t = avx2_table()) return t;
  if (const KernelTable* t = neon_table()) return t;
  return &scalar_table();
}

const KernelTable*& current() {
  static const KernelTable* table = initial_table();
  return table;
}

}  // namespace

std::vector<const KernelTable*> available_tables() {
  std::vector<const KernelTable*> out{&scalar_table()};
  if (const KernelTable* t = avx2_table()) out.push_back(t);
  if (const KernelTable* t = neon_table()) out.push_back(t);
  return out;
}

const KernelTable& active() { return *current(); }

void select(std::string_view name) {
  const KernelTable* t = by_name(name);
  if (t == nullptr) {
    throw std::invalid_argument("kernel variant '" + std::string(name) + "' is not available on this machine");
  }
  current() = t;
}

}  // namespace mmvdn::kernels

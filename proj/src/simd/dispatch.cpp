#include <cstdlib>
#include <string_view>

#include "namea/errors.hpp"
#include "namea/simd/kernels.hpp"

namespace namea::simd {

#if defined(NAMEA_HAVE_AVX2)
const KernelTable& avx2_kernels();
#endif

const KernelTable* avx2_table() {
#if defined(NAMEA_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2_kernels() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* startup_choice() {
  const char* env = std::getenv("NAMEA_SIMD");
  if (env != nullptr && std::string_view(env) == "scalar") return &scalar_table();
  if (const KernelTable* t = avx2_table()) return t;
  return &scalar_table();
}

const KernelTable*& current() {
  static const KernelTable* table = startup_choice();
  return table;
}

}  // namespace

const KernelTable& active() { return *current(); }

void select(Backend backend) {
  if (backend == Backend::Scalar) {
    current() = &scalar_table();
    return;
  }
  const KernelTable* t = avx2_table();
  if (t == nullptr) throw UsageError("AVX2 kernels unavailable on this build or CPU");
  current() = t;
}

}  // namespace namea::simd

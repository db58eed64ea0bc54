#include <cstdlib>
#include <string>

#include "kkt/simd.hpp"

namespace kkt::simd {

#ifndef KKT_HAVE_AVX2
const KernelTable* avx2_kernels() { return nullptr; }
#endif

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
  }
  return "unknown";
}

bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {

const KernelTable& select() {
  if (const char* forced = std::getenv("KKT_SIMD"); forced && std::string(forced) == "scalar") {
    return scalar_kernels();
  }
  if (const KernelTable* avx2 = avx2_kernels(); avx2 && cpu_has_avx2()) return *avx2;
  return scalar_kernels();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace kkt::simd

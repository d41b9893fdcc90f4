#include <cstdlib>
#include <string_view>

#include "nag/simd/kernels.hpp"

namespace nag::simd {
namespace {

bool cpu_has_avx2() {
#if defined(NAG_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const Kernels& select() {
  const char* forced = std::getenv("NAG_SIMD");
  if (forced != nullptr) {
    const std::string_view want(forced);
    if (want == "scalar") return detail::scalar_kernels();
    if (want == "avx2" && backend(Backend::avx2) != nullptr) return *backend(Backend::avx2);
    if (want == "neon" && backend(Backend::neon) != nullptr) return *backend(Backend::neon);
  }
  if (const Kernels* k = backend(Backend::avx2)) return *k;
  if (const Kernels* k = backend(Backend::neon)) return *k;
  return detail::scalar_kernels();
}

}  // namespace

const Kernels* backend(Backend which) {
  switch (which) {
    case Backend::scalar:
      return &detail::scalar_kernels();
    case Backend::avx2:
#if defined(NAG_HAVE_AVX2)
      if (cpu_has_avx2()) return &detail::avx2_kernels();
#endif
      return nullptr;
    case Backend::neon:
#if defined(NAG_HAVE_NEON)
      return &detail::neon_kernels();
#else
      return nullptr;
#endif
  }
  return nullptr;
}

const Kernels& active() {
  static const Kernels& k = select();
  return k;
}

}  // namespace nag::simd

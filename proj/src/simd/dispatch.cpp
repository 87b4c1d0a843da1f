#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels_internal.hpp"
#include "tailrep/error.hpp"

namespace tailrep::simd {
namespace {

bool cpu_has(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(TAILREP_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::kNeon:
#if defined(TAILREP_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& best_available() {
  if (const char* env = std::getenv("TAILREP_ISA")) {
    const std::string want(env);
    if (want == "scalar") return scalar_kernels();
    if (want == "avx2" && cpu_has(Isa::kAvx2)) return kernels_for(Isa::kAvx2);
    if (want == "neon" && cpu_has(Isa::kNeon)) return kernels_for(Isa::kNeon);
  }
  if (cpu_has(Isa::kAvx2)) return kernels_for(Isa::kAvx2);
  if (cpu_has(Isa::kNeon)) return kernels_for(Isa::kNeon);
  return scalar_kernels();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{&best_available()};
  return current;
}

}  // namespace

bool isa_supported(Isa isa) { return cpu_has(isa); }

const KernelTable& kernels_for(Isa isa) {
  if (!cpu_has(isa)) throw DomainError("instruction set not available: " + std::string(isa_name(isa)));
  switch (isa) {
#if defined(TAILREP_HAVE_AVX2)
    case Isa::kAvx2:
      return detail::avx2_table();
#endif
#if defined(TAILREP_HAVE_NEON)
    case Isa::kNeon:
      return detail::neon_table();
#endif
    default:
      return scalar_kernels();
  }
}

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

void set_active(Isa isa) { slot().store(&kernels_for(isa), std::memory_order_release); }

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
    case Isa::kNeon:
      return "neon";
  }
  return "unknown";
}

}  // namespace tailrep::simd

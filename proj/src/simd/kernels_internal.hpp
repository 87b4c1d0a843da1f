#pragma once

#include "tailrep/simd/kernels.hpp"

namespace tailrep::simd::detail {

#if defined(TAILREP_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(TAILREP_HAVE_NEON)
const KernelTable& neon_table();
#endif

}  // namespace tailrep::simd::detail

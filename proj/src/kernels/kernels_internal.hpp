#pragma once

#include "mpkm/kernels.hpp"

namespace mpkm::kernels::detail {

extern const KernelTable scalar_table;

#if defined(MPKM_HAVE_AVX2)
extern const KernelTable avx2_table;
#endif

}  // namespace mpkm::kernels::detail

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernels_internal.hpp"

namespace mpkm::kernels {
namespace {

bool cpu_supports(Isa isa) {
    switch (isa) {
        case Isa::scalar: return true;
        case Isa::avx2:
#if defined(MPKM_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
            return __builtin_cpu_supports("avx2");
#else
            return false;
#endif
    }
    return false;
}

const KernelTable* initial_choice() {
    if (const char* env = std::getenv("MPKM_KERNELS"); env != nullptr && *env != '\0') {
        const std::string want(env);
        if (want == "scalar") return &detail::scalar_table;
        if (want == "avx2" && table(Isa::avx2) != nullptr) return table(Isa::avx2);
    }
    if (const KernelTable* t = table(Isa::avx2)) return t;
    return &detail::scalar_table;
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> chosen{initial_choice()};
    return chosen;
}

}  // namespace

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
    }
    return "unknown";
}

const KernelTable* table(Isa isa) {
    if (!cpu_supports(isa)) return nullptr;
    switch (isa) {
        case Isa::scalar: return &detail::scalar_table;
        case Isa::avx2:
#if defined(MPKM_HAVE_AVX2)
            return &detail::avx2_table;
#else
            return nullptr;
#endif
    }
    return nullptr;
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select(Isa isa) {
    const KernelTable* t = table(isa);
    if (t == nullptr) {
        throw std::runtime_error("kernel variant '" + std::string(isa_name(isa)) +
                                 "' is not available on this machine");
    }
    current().store(t, std::memory_order_release);
}

}  // namespace mpkm::kernels

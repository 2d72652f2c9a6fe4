#include <atomic>
#include <cstdlib>
#include <string_view>

#include "mks/simd/kernels.hpp"

namespace mks::simd {

namespace {

bool cpu_has_avx2() noexcept {
#if defined(MKS_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const KernelTable* table_for(Backend b) noexcept {
    switch (b) {
    case Backend::Scalar: return &scalar_kernels();
    case Backend::Avx2:
#if defined(MKS_HAVE_AVX2)
        if (cpu_has_avx2()) return &avx2_kernels();
#endif
        return nullptr;
    }
    return nullptr;
}

const KernelTable* initial_table() noexcept {
    if (const char* env = std::getenv("MKS_SIMD")) {
        const std::string_view v(env);
        if (v == "scalar") return &scalar_kernels();
        if (v == "avx2")
            if (const auto* t = table_for(Backend::Avx2)) return t;
    }
    if (const auto* t = table_for(Backend::Avx2)) return t;
    return &scalar_kernels();
}

std::atomic<const KernelTable*>& active() noexcept {
    static std::atomic<const KernelTable*> table{initial_table()};
    return table;
}

} // namespace

bool backend_available(Backend b) noexcept { return table_for(b) != nullptr; }

std::string_view to_string(Backend b) noexcept {
    switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
    }
    return "?";
}

const KernelTable& kernels() noexcept { return *active().load(std::memory_order_acquire); }

Backend active_backend() noexcept { return kernels().backend; }

bool set_backend(Backend b) noexcept {
    const auto* t = table_for(b);
    if (!t) return false;
    active().store(t, std::memory_order_release);
    return true;
}

} // namespace mks::simd

#include "kernels_internal.hpp"

#include "sneuron/error.hpp"

#include <atomic>
#include <string>

namespace sneuron::kernels {

namespace {

constexpr KernelTable kScalar{Backend::Scalar, detail::dot_scalar, detail::matvec_scalar,
                              detail::axpy_scalar, detail::rmsnorm_scalar};

#if defined(SNEURON_HAVE_AVX2)
constexpr KernelTable kAvx2{Backend::Avx2, detail::dot_avx2, detail::matvec_avx2,
                            detail::axpy_avx2, detail::rmsnorm_avx2};
#endif

#if defined(SNEURON_HAVE_NEON)
constexpr KernelTable kNeon{Backend::Neon, detail::dot_neon, detail::matvec_neon,
                            detail::axpy_neon, detail::rmsnorm_neon};
#endif

bool cpu_has_avx2() {
#if defined(SNEURON_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* table_for(Backend b) {
    switch (b) {
    case Backend::Scalar:
        return &kScalar;
    case Backend::Avx2:
#if defined(SNEURON_HAVE_AVX2)
        return cpu_has_avx2() ? &kAvx2 : nullptr;
#else
        return nullptr;
#endif
    case Backend::Neon:
#if defined(SNEURON_HAVE_NEON)
        return &kNeon; // NEON is mandatory on AArch64
#else
        return nullptr;
#endif
    }
    return nullptr;
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> table{table_for(best_available())};
    return table;
}

} // namespace

const KernelTable& scalar_table() { return kScalar; }

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

bool is_available(Backend b) { return table_for(b) != nullptr; }

Backend best_available() {
    if (is_available(Backend::Avx2)) return Backend::Avx2;
    if (is_available(Backend::Neon)) return Backend::Neon;
    return Backend::Scalar;
}

void select(Backend b) {
    const KernelTable* t = table_for(b);
    if (t == nullptr) {
        fail(ErrorKind::Config, "kernel backend '" + std::string(name(b)) + "' is not available on this CPU");
    }
    current().store(t, std::memory_order_release);
}

std::string_view name(Backend b) {
    switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
    case Backend::Neon: return "neon";
    }
    return "unknown";
}

ScopedBackend::ScopedBackend(Backend b) : previous_(active().backend) { select(b); }

ScopedBackend::~ScopedBackend() { select(previous_); }

} // namespace sneuron::kernels

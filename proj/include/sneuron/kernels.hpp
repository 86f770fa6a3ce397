#pragma once

// Float32 inner-loop kernels used by the transformer forward pass.
//
// Every kernel has a scalar reference implementation. Vectorised variants
// (AVX2+FMA on x86-64, NEON on AArch64) are compiled into separate
// translation units and picked once at startup from the CPU's feature bits.
// Variants agree with the reference to float rounding, not bit-for-bit, so
// bit-identity guarantees of the runtime hold per selected backend.

#include <cstddef>
#include <span>
#include <string_view>

namespace sneuron::kernels {

enum class Backend { Scalar, Avx2, Neon };

struct KernelTable {
    Backend backend;
    // sum_i a[i] * b[i]
    float (*dot)(const float* a, const float* b, std::size_t n);
    // y[r] = sum_c w[r * cols + c] * x[c]
    void (*matvec)(const float* w, const float* x, float* y, std::size_t rows, std::size_t cols);
    // y[i] += alpha * x[i]
    void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
    // y[i] = x[i] * gain[i] / sqrt(mean(x^2) + eps)
    void (*rmsnorm)(const float* x, const float* gain, float* y, std::size_t n, float eps);
};

const KernelTable& scalar_table();

// Currently active kernels. Defaults to the best backend the CPU supports.
const KernelTable& active();

// Best backend compiled in and supported by this CPU.
Backend best_available();
bool is_available(Backend b);

// Switch backends; throws Config error if unavailable. Not safe to call while
// forward passes are running on other threads.
void select(Backend b);

std::string_view name(Backend b);

// RAII override used by tests and the equivalence harness.
class ScopedBackend {
public:
    explicit ScopedBackend(Backend b);
    ~ScopedBackend();
    ScopedBackend(const ScopedBackend&) = delete;
    ScopedBackend& operator=(const ScopedBackend&) = delete;

private:
    Backend previous_;
};

// Convenience wrappers over active().
inline float dot(std::span<const float> a, std::span<const float> b) {
    return active().dot(a.data(), b.data(), a.size());
}

} // namespace sneuron::kernels

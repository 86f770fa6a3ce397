#include "kernels_internal.hpp"

#include <cmath>

namespace sneuron::kernels::detail {

float dot_scalar(const float* a, const float* b, std::size_t n) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

void matvec_scalar(const float* w, const float* x, float* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        y[r] = dot_scalar(w + r * cols, x, cols);
    }
}

void axpy_scalar(float alpha, const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

void rmsnorm_scalar(const float* x, const float* gain, float* y, std::size_t n, float eps) {
    const float ss = dot_scalar(x, x, n);
    const float scale = 1.0f / std::sqrt(ss / static_cast<float>(n) + eps);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = (x[i] * scale) * gain[i];
    }
}

} // namespace sneuron::kernels::detail

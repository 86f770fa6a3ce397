#pragma once

#include "sneuron/kernels.hpp"

namespace sneuron::kernels::detail {

float dot_scalar(const float* a, const float* b, std::size_t n);
void matvec_scalar(const float* w, const float* x, float* y, std::size_t rows, std::size_t cols);
void axpy_scalar(float alpha, const float* x, float* y, std::size_t n);
void rmsnorm_scalar(const float* x, const float* gain, float* y, std::size_t n, float eps);

#if defined(SNEURON_HAVE_AVX2)
float dot_avx2(const float* a, const float* b, std::size_t n);
void matvec_avx2(const float* w, const float* x, float* y, std::size_t rows, std::size_t cols);
void axpy_avx2(float alpha, const float* x, float* y, std::size_t n);
void rmsnorm_avx2(const float* x, const float* gain, float* y, std::size_t n, float eps);
#endif

#if defined(SNEURON_HAVE_NEON)
float dot_neon(const float* a, const float* b, std::size_t n);
void matvec_neon(const float* w, const float* x, float* y, std::size_t rows, std::size_t cols);
void axpy_neon(float alpha, const float* x, float* y, std::size_t n);
void rmsnorm_neon(const float* x, const float* gain, float* y, std::size_t n, float eps);
#endif

} // namespace sneuron::kernels::detail

#pragma once

#include <cstddef>

#include "trajlm/tensor.hpp"

namespace trajlm::kern {

/// Serial reference kernels. Kept as the ground truth the OpenMP kernels are
/// tested against; also the dispatch target when parallelism is off.
namespace ref {
void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
/// C[m,n] = A[m,k] * B[n,k]^T
void matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
/// C[m,n] = A[k,m]^T * B[k,n]
void matmul_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);

/// Stride-2-friendly conv with replicate border padding: out-of-range input
/// reads clamp to the nearest edge cell, so a constant input stays constant
/// across the whole output field.
void conv2d_forward(const double* x, std::size_t ci, std::size_t h, std::size_t w,
                    const double* kern, const double* bias, std::size_t co, std::size_t kh,
                    std::size_t kw, std::size_t stride, std::size_t pad, double* out);
void conv2d_grad_w(const double* gout, const double* x, std::size_t ci, std::size_t h,
                   std::size_t w, std::size_t co, std::size_t kh, std::size_t kw,
                   std::size_t stride, std::size_t pad, double* gw, double* gb);
void conv2d_grad_x(const double* gout, const double* kern, std::size_t ci, std::size_t h,
                   std::size_t w, std::size_t co, std::size_t kh, std::size_t kw,
                   std::size_t stride, std::size_t pad, double* gx);

/// Row-wise softmax with optional additive mask (same shape as x).
void softmax_rows(const double* x, const double* mask, double* out, std::size_t m, std::size_t n);
}  // namespace ref

/// OpenMP kernels. Work is partitioned by output element (or output row), and
/// every element keeps the reference accumulation order, so results are
/// bit-identical to ref:: for any thread count.
namespace omp {
void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void matmul_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void conv2d_forward(const double* x, std::size_t ci, std::size_t h, std::size_t w,
                    const double* kern, const double* bias, std::size_t co, std::size_t kh,
                    std::size_t kw, std::size_t stride, std::size_t pad, double* out);
void conv2d_grad_w(const double* gout, const double* x, std::size_t ci, std::size_t h,
                   std::size_t w, std::size_t co, std::size_t kh, std::size_t kw,
                   std::size_t stride, std::size_t pad, double* gw, double* gb);
void conv2d_grad_x(const double* gout, const double* kern, std::size_t ci, std::size_t h,
                   std::size_t w, std::size_t co, std::size_t kh, std::size_t kw,
                   std::size_t stride, std::size_t pad, double* gx);
void softmax_rows(const double* x, const double* mask, double* out, std::size_t m, std::size_t n);
}  // namespace omp

/// Process-wide kernel selection. Defaults to parallel; tests and the
/// benchmark flip it to compare implementations.
void set_parallel(bool enabled);
bool parallel_enabled();
int max_threads();

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void matmul_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
void conv2d_forward(const double* x, std::size_t ci, std::size_t h, std::size_t w,
                    const double* kern, const double* bias, std::size_t co, std::size_t kh,
                    std::size_t kw, std::size_t stride, std::size_t pad, double* out);
void conv2d_grad_w(const double* gout, const double* x, std::size_t ci, std::size_t h,
                   std::size_t w, std::size_t co, std::size_t kh, std::size_t kw,
                   std::size_t stride, std::size_t pad, double* gw, double* gb);
void conv2d_grad_x(const double* gout, const double* kern, std::size_t ci, std::size_t h,
                   std::size_t w, std::size_t co, std::size_t kh, std::size_t kw,
                   std::size_t stride, std::size_t pad, double* gx);
void softmax_rows(const double* x, const double* mask, double* out, std::size_t m, std::size_t n);

/// Output spatial size for the conv above.
inline std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

}  // namespace trajlm::kern

#include "trajlm/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>

namespace trajlm::kern {

namespace {

std::atomic<bool> g_parallel{true};

inline std::size_t clamp_idx(std::int64_t i, std::size_t n) {
  if (i < 0) return 0;
  if (i >= static_cast<std::int64_t>(n)) return n - 1;
  return static_cast<std::size_t>(i);
}

inline void matmul_row(const double* a, const double* b, double* c, std::size_t i, std::size_t k,
                       std::size_t n) {
  double* ci = c + i * n;
  for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    const double aip = a[i * k + p];
    const double* bp = b + p * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
  }
}

inline void matmul_nt_row(const double* a, const double* b, double* c, std::size_t i,
                          std::size_t k, std::size_t n) {
  const double* ai = a + i * k;
  double* ci = c + i * n;
  for (std::size_t j = 0; j < n; ++j) {
    const double* bj = b + j * k;
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
    ci[j] = acc;
  }
}

inline void matmul_tn_row(const double* a, const double* b, double* c, std::size_t i,
                          std::size_t k, std::size_t m, std::size_t n) {
  double* ci = c + i * n;
  for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    const double api = a[p * m + i];
    const double* bp = b + p * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
  }
}

inline void conv_cell(const double* x, std::size_t ci, std::size_t h, std::size_t w,
                      const double* kern, const double* bias, std::size_t kh, std::size_t kw,
                      std::size_t stride, std::size_t pad, std::size_t o, std::size_t oy,
                      std::size_t ox, std::size_t wo, double* out) {
  const std::size_t ho = conv_out_dim(h, kh, stride, pad);
  (void)ho;
  double acc = bias ? bias[o] : 0.0;
  for (std::size_t c = 0; c < ci; ++c) {
    for (std::size_t ky = 0; ky < kh; ++ky) {
      const std::size_t iy = clamp_idx(static_cast<std::int64_t>(oy * stride + ky) -
                                           static_cast<std::int64_t>(pad), h);
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const std::size_t ix = clamp_idx(static_cast<std::int64_t>(ox * stride + kx) -
                                             static_cast<std::int64_t>(pad), w);
        acc += x[(c * h + iy) * w + ix] * kern[((o * ci + c) * kh + ky) * kw + kx];
      }
    }
  }
  out[(o * conv_out_dim(h, kh, stride, pad) + oy) * wo + ox] = acc;
}

inline double conv_wgrad_one(const double* gout, const double* x, std::size_t h, std::size_t w,
                             std::size_t ho, std::size_t wo, std::size_t stride, std::size_t pad,
                             std::size_t o, std::size_t c, std::size_t ky, std::size_t kx) {
  double acc = 0.0;
  for (std::size_t oy = 0; oy < ho; ++oy) {
    const std::size_t iy = clamp_idx(static_cast<std::int64_t>(oy * stride + ky) -
                                         static_cast<std::int64_t>(pad), h);
    for (std::size_t ox = 0; ox < wo; ++ox) {
      const std::size_t ix = clamp_idx(static_cast<std::int64_t>(ox * stride + kx) -
                                           static_cast<std::int64_t>(pad), w);
      acc += gout[(o * ho + oy) * wo + ox] * x[(c * h + iy) * w + ix];
    }
  }
  return acc;
}

inline void softmax_row(const double* x, const double* mask, double* out, std::size_t i,
                        std::size_t n) {
  const double* xi = x + i * n;
  double* oi = out + i * n;
  double mx = -HUGE_VAL;
  for (std::size_t j = 0; j < n; ++j) {
    const double v = xi[j] + (mask ? mask[i * n + j] : 0.0);
    oi[j] = v;
    mx = std::max(mx, v);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    oi[j] = std::exp(oi[j] - mx);
    sum += oi[j];
  }
  const double inv = 1.0 / sum;
  for (std::size_t j = 0; j < n; ++j) oi[j] *= inv;
}

// Below this many output elements the parallel dispatch is not worth the fork.
constexpr std::size_t kParallelCutoff = 4096;

}  // namespace

namespace ref {

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) matmul_row(a, b, c, i, k, n);
}

void matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) matmul_nt_row(a, b, c, i, k, n);
}

void matmul_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) matmul_tn_row(a, b, c, i, k, m, n);
}

void conv2d_forward(const double* x, std::size_t ci, std::size_t h, std::size_t w,
                    const double* kern, const double* bias, std::size_t co, std::size_t kh,
                    std::size_t kw, std::size_t stride, std::size_t pad, double* out) {
  const std::size_t ho = conv_out_dim(h, kh, stride, pad);
  const std::size_t wo = conv_out_dim(w, kw, stride, pad);
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox)
        conv_cell(x, ci, h, w, kern, bias, kh, kw, stride, pad, o, oy, ox, wo, out);
}

void conv2d_grad_w(const double* gout, const double* x, std::size_t ci, std::size_t h,
                   std::size_t w, std::size_t co, std::size_t kh, std::size_t kw,
                   std::size_t stride, std::size_t pad, double* gw, double* gb) {
  const std::size_t ho = conv_out_dim(h, kh, stride, pad);
  const std::size_t wo = conv_out_dim(w, kw, stride, pad);
  for (std::size_t o = 0; o < co; ++o) {
    double bacc = 0.0;
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) bacc += gout[(o * ho + oy) * wo + ox];
    gb[o] += bacc;
    for (std::size_t c = 0; c < ci; ++c)
      for (std::size_t ky = 0; ky < kh; ++ky)
        for (std::size_t kx = 0; kx < kw; ++kx)
          gw[((o * ci + c) * kh + ky) * kw + kx] +=
              conv_wgrad_one(gout, x, h, w, ho, wo, stride, pad, o, c, ky, kx);
  }
}

void conv2d_grad_x(const double* gout, const double* kern, std::size_t ci, std::size_t h,
                   std::size_t w, std::size_t co, std::size_t kh, std::size_t kw,
                   std::size_t stride, std::size_t pad, double* gx) {
  const std::size_t ho = conv_out_dim(h, kh, stride, pad);
  const std::size_t wo = conv_out_dim(w, kw, stride, pad);
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const double g = gout[(o * ho + oy) * wo + ox];
        for (std::size_t c = 0; c < ci; ++c)
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const std::size_t iy = clamp_idx(static_cast<std::int64_t>(oy * stride + ky) -
                                                 static_cast<std::int64_t>(pad), h);
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const std::size_t ix = clamp_idx(static_cast<std::int64_t>(ox * stride + kx) -
                                                   static_cast<std::int64_t>(pad), w);
              gx[(c * h + iy) * w + ix] += g * kern[((o * ci + c) * kh + ky) * kw + kx];
            }
          }
      }
}

void softmax_rows(const double* x, const double* mask, double* out, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) softmax_row(x, mask, out, i, n);
}

}  // namespace ref

namespace omp {

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n) {
#pragma omp parallel for schedule(static) if (m * n >= kParallelCutoff)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i)
    matmul_row(a, b, c, static_cast<std::size_t>(i), k, n);
}

void matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
#pragma omp parallel for schedule(static) if (m * n >= kParallelCutoff)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i)
    matmul_nt_row(a, b, c, static_cast<std::size_t>(i), k, n);
}

void matmul_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
#pragma omp parallel for schedule(static) if (m * n >= kParallelCutoff)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i)
    matmul_tn_row(a, b, c, static_cast<std::size_t>(i), k, m, n);
}

void conv2d_forward(const double* x, std::size_t ci, std::size_t h, std::size_t w,
                    const double* kern, const double* bias, std::size_t co, std::size_t kh,
                    std::size_t kw, std::size_t stride, std::size_t pad, double* out) {
  const std::size_t ho = conv_out_dim(h, kh, stride, pad);
  const std::size_t wo = conv_out_dim(w, kw, stride, pad);
#pragma omp parallel for collapse(2) schedule(static) if (co * ho * wo >= kParallelCutoff)
  for (std::int64_t o = 0; o < static_cast<std::int64_t>(co); ++o)
    for (std::int64_t oy = 0; oy < static_cast<std::int64_t>(ho); ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox)
        conv_cell(x, ci, h, w, kern, bias, kh, kw, stride, pad, static_cast<std::size_t>(o),
                  static_cast<std::size_t>(oy), ox, wo, out);
}

void conv2d_grad_w(const double* gout, const double* x, std::size_t ci, std::size_t h,
                   std::size_t w, std::size_t co, std::size_t kh, std::size_t kw,
                   std::size_t stride, std::size_t pad, double* gw, double* gb) {
  const std::size_t ho = conv_out_dim(h, kh, stride, pad);
  const std::size_t wo = conv_out_dim(w, kw, stride, pad);
#pragma omp parallel for schedule(static) if (co * ci * kh * kw >= 64)
  for (std::int64_t o = 0; o < static_cast<std::int64_t>(co); ++o) {
    double bacc = 0.0;
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) bacc += gout[(o * ho + oy) * wo + ox];
    gb[o] += bacc;
    for (std::size_t c = 0; c < ci; ++c)
      for (std::size_t ky = 0; ky < kh; ++ky)
        for (std::size_t kx = 0; kx < kw; ++kx)
          gw[((o * ci + c) * kh + ky) * kw + kx] +=
              conv_wgrad_one(gout, x, h, w, ho, wo, stride, pad, static_cast<std::size_t>(o), c,
                             ky, kx);
  }
}

void conv2d_grad_x(const double* gout, const double* kern, std::size_t ci, std::size_t h,
                   std::size_t w, std::size_t co, std::size_t kh, std::size_t kw,
                   std::size_t stride, std::size_t pad, double* gx) {
  // Scatter into overlapping input cells; the serial order is the reference
  // order, so reuse it rather than race on the accumulation.
  ref::conv2d_grad_x(gout, kern, ci, h, w, co, kh, kw, stride, pad, gx);
}

void softmax_rows(const double* x, const double* mask, double* out, std::size_t m, std::size_t n) {
#pragma omp parallel for schedule(static) if (m * n >= kParallelCutoff)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i)
    softmax_row(x, mask, out, static_cast<std::size_t>(i), n);
}

}  // namespace omp

void set_parallel(bool enabled) { g_parallel.store(enabled); }
bool parallel_enabled() { return g_parallel.load(); }
int max_threads() { return omp_get_max_threads(); }

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n) {
  parallel_enabled() ? omp::matmul(a, b, c, m, k, n) : ref::matmul(a, b, c, m, k, n);
}
void matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
  parallel_enabled() ? omp::matmul_nt(a, b, c, m, k, n) : ref::matmul_nt(a, b, c, m, k, n);
}
void matmul_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
  parallel_enabled() ? omp::matmul_tn(a, b, c, m, k, n) : ref::matmul_tn(a, b, c, m, k, n);
}
void conv2d_forward(const double* x, std::size_t ci, std::size_t h, std::size_t w,
                    const double* kern, const double* bias, std::size_t co, std::size_t kh,
                    std::size_t kw, std::size_t stride, std::size_t pad, double* out) {
  parallel_enabled() ? omp::conv2d_forward(x, ci, h, w, kern, bias, co, kh, kw, stride, pad, out)
                     : ref::conv2d_forward(x, ci, h, w, kern, bias, co, kh, kw, stride, pad, out);
}
void conv2d_grad_w(const double* gout, const double* x, std::size_t ci, std::size_t h,
                   std::size_t w, std::size_t co, std::size_t kh, std::size_t kw,
                   std::size_t stride, std::size_t pad, double* gw, double* gb) {
  parallel_enabled() ? omp::conv2d_grad_w(gout, x, ci, h, w, co, kh, kw, stride, pad, gw, gb)
                     : ref::conv2d_grad_w(gout, x, ci, h, w, co, kh, kw, stride, pad, gw, gb);
}
void conv2d_grad_x(const double* gout, const double* kern, std::size_t ci, std::size_t h,
                   std::size_t w, std::size_t co, std::size_t kh, std::size_t kw,
                   std::size_t stride, std::size_t pad, double* gx) {
  parallel_enabled() ? omp::conv2d_grad_x(gout, kern, ci, h, w, co, kh, kw, stride, pad, gx)
                     : ref::conv2d_grad_x(gout, kern, ci, h, w, co, kh, kw, stride, pad, gx);
}
void softmax_rows(const double* x, const double* mask, double* out, std::size_t m, std::size_t n) {
  parallel_enabled() ? omp::softmax_rows(x, mask, out, m, n)
                     : ref::softmax_rows(x, mask, out, m, n);
}

}  // namespace trajlm::kern

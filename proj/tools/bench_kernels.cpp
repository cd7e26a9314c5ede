// Timing comparison between the serial reference kernels and their OpenMP
// counterparts, with a bit-identity check on every output buffer.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "trajlm/kernels.hpp"
#include "trajlm/rng.hpp"

using trajlm::Rng;
namespace kern = trajlm::kern;

namespace {

std::vector<double> random_buffer(std::size_t n, Rng& rng) {
  std::vector<double> buf(n);
  for (double& v : buf) v = rng.uniform(-1.0, 1.0);
  return buf;
}

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const std::string& name, double ref_ms, double omp_ms, bool identical) {
  std::printf("%-28s  ref %8.3f ms   omp %8.3f ms   speedup %5.2fx   bit-identical %s\n",
              name.c_str(), ref_ms, omp_ms, ref_ms / omp_ms, identical ? "yes" : "NO");
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

int main(int argc, char** argv) {
  int reps = 5;
  if (argc > 1) reps = std::atoi(argv[1]);
  std::printf("threads available: %d, reps per measurement: %d\n\n", kern::max_threads(), reps);
  Rng rng(20240817);

  {
    const std::size_t m = 256, k = 256, n = 256;
    const std::vector<double> a = random_buffer(m * k, rng), b = random_buffer(k * n, rng);
    std::vector<double> c_ref(m * n), c_omp(m * n);
    const double t_ref = time_ms([&] { kern::ref::matmul(a.data(), b.data(), c_ref.data(), m, k, n); }, reps);
    const double t_omp = time_ms([&] { kern::omp::matmul(a.data(), b.data(), c_omp.data(), m, k, n); }, reps);
    report("matmul 256x256x256", t_ref, t_omp, same_bits(c_ref, c_omp));
  }
  {
    const std::size_t m = 192, k = 192, n = 192;
    const std::vector<double> a = random_buffer(m * k, rng), b = random_buffer(n * k, rng);
    std::vector<double> c_ref(m * n), c_omp(m * n);
    const double t_ref = time_ms([&] { kern::ref::matmul_nt(a.data(), b.data(), c_ref.data(), m, k, n); }, reps);
    const double t_omp = time_ms([&] { kern::omp::matmul_nt(a.data(), b.data(), c_omp.data(), m, k, n); }, reps);
    report("matmul_nt 192x192x192", t_ref, t_omp, same_bits(c_ref, c_omp));
  }
  {
    const std::size_t m = 192, k = 192, n = 192;
    const std::vector<double> a = random_buffer(k * m, rng), b = random_buffer(k * n, rng);
    std::vector<double> c_ref(m * n), c_omp(m * n);
    const double t_ref = time_ms([&] { kern::ref::matmul_tn(a.data(), b.data(), c_ref.data(), m, k, n); }, reps);
    const double t_omp = time_ms([&] { kern::omp::matmul_tn(a.data(), b.data(), c_omp.data(), m, k, n); }, reps);
    report("matmul_tn 192x192x192", t_ref, t_omp, same_bits(c_ref, c_omp));
  }
  {
    const std::size_t ci = 3, h = 100, w = 100, co = 16, kk = 3, stride = 2, pad = 1;
    const std::size_t oh = kern::conv_out_dim(h, kk, stride, pad), ow = kern::conv_out_dim(w, kk, stride, pad);
    const std::vector<double> x = random_buffer(ci * h * w, rng);
    const std::vector<double> kweights = random_buffer(co * ci * kk * kk, rng);
    const std::vector<double> bias = random_buffer(co, rng);
    std::vector<double> out_ref(co * oh * ow), out_omp(co * oh * ow);
    const double t_ref = time_ms(
        [&] { kern::ref::conv2d_forward(x.data(), ci, h, w, kweights.data(), bias.data(), co, kk, kk, stride, pad, out_ref.data()); }, reps);
    const double t_omp = time_ms(
        [&] { kern::omp::conv2d_forward(x.data(), ci, h, w, kweights.data(), bias.data(), co, kk, kk, stride, pad, out_omp.data()); }, reps);
    report("conv2d 3->16 100x100", t_ref, t_omp, same_bits(out_ref, out_omp));

    const std::vector<double> gout = random_buffer(co * oh * ow, rng);
    std::vector<double> gw_ref(co * ci * kk * kk), gb_ref(co), gw_omp(co * ci * kk * kk), gb_omp(co);
    const double gw_t_ref = time_ms(
        [&] { kern::ref::conv2d_grad_w(gout.data(), x.data(), ci, h, w, co, kk, kk, stride, pad, gw_ref.data(), gb_ref.data()); }, reps);
    const double gw_t_omp = time_ms(
        [&] { kern::omp::conv2d_grad_w(gout.data(), x.data(), ci, h, w, co, kk, kk, stride, pad, gw_omp.data(), gb_omp.data()); }, reps);
    report("conv2d_grad_w 3->16", gw_t_ref, gw_t_omp, same_bits(gw_ref, gw_omp) && same_bits(gb_ref, gb_omp));

    std::vector<double> gx_ref(ci * h * w), gx_omp(ci * h * w);
    const double gx_t_ref = time_ms(
        [&] { kern::ref::conv2d_grad_x(gout.data(), kweights.data(), ci, h, w, co, kk, kk, stride, pad, gx_ref.data()); }, reps);
    const double gx_t_omp = time_ms(
        [&] { kern::omp::conv2d_grad_x(gout.data(), kweights.data(), ci, h, w, co, kk, kk, stride, pad, gx_omp.data()); }, reps);
    report("conv2d_grad_x 3->16", gx_t_ref, gx_t_omp, same_bits(gx_ref, gx_omp));
  }
  {
    const std::size_t m = 512, n = 512;
    const std::vector<double> x = random_buffer(m * n, rng);
    std::vector<double> out_ref(m * n), out_omp(m * n);
    const double t_ref = time_ms([&] { kern::ref::softmax_rows(x.data(), nullptr, out_ref.data(), m, n); }, reps);
    const double t_omp = time_ms([&] { kern::omp::softmax_rows(x.data(), nullptr, out_omp.data(), m, n); }, reps);
    report("softmax_rows 512x512", t_ref, t_omp, same_bits(out_ref, out_omp));
  }
  return 0;
}

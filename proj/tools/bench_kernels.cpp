// Benchmarks the parallel kernels against the serial reference
// implementations and verifies the thread-count determinism contract
// (bit-identical outputs for --threads 1 vs N).

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "srft/degradation.hpp"
#include "srft/kernels.hpp"
#include "srft/reference.hpp"
#include "srft/rng.hpp"
#include "srft/tensor.hpp"

namespace {

using srft::Tensor;

Tensor random_tensor(srft::Shape s, srft::Rng& rng) {
  Tensor t(s);
  for (size_t i = 0; i < t.size(); ++i) t.data()[i] = float(rng.uniform(-1.0, 1.0));
  return t;
}

double time_best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

struct Case {
  std::string name;
  std::function<Tensor()> parallel;
  std::function<Tensor()> serial;
};

int run_cases(const std::vector<Case>& cases, int threads) {
  int failures = 0;
  std::printf("%-24s %12s %12s %8s %12s %s\n", "kernel", "parallel_ms", "serial_ms",
              "speedup", "max_abs_diff", "bitwise_1_vs_N");
  for (const Case& c : cases) {
    srft::kernels::set_threads(threads);
    Tensor par;
    const double tp = time_best_of(3, [&] { par = c.parallel(); });
    srft::kernels::set_threads(1);
    Tensor par1 = c.parallel();
    srft::kernels::set_threads(threads);
    const double ts = time_best_of(3, [&] { c.serial(); });
    const Tensor ser = c.serial();

    const bool bitwise = Tensor::bit_equal(par, par1);
    const double diff = Tensor::max_abs_diff(par, ser);
    if (!bitwise || diff > 2e-6) ++failures;
    std::printf("%-24s %12.3f %12.3f %7.2fx %12.3g %s\n", c.name.c_str(), tp * 1e3,
                ts * 1e3, ts / tp, diff, bitwise ? "ok" : "MISMATCH");
  }
  return failures;
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::atoi(argv[1]) : srft::kernels::max_threads();
  srft::Rng rng(42);

  const srft::Shape in_s{2, 16, 64, 64};
  const srft::Shape w_s{16, 16, 3, 3};
  const Tensor in = random_tensor(in_s, rng);
  const Tensor w = random_tensor(w_s, rng);
  const Tensor bias = random_tensor({1, 16, 1, 1}, rng);

  const srft::Shape out_s = srft::kernels::conv2d_out_shape(in_s, w_s, 1, 1);
  const Tensor gout = random_tensor(out_s, rng);

  const Tensor img = random_tensor({1, 3, 96, 96}, rng);
  Tensor blur_k(1, 1, 5, 5);
  double ksum = 0.0;
  for (size_t i = 0; i < blur_k.size(); ++i) {
    blur_k.data()[i] = float(rng.uniform(0.0, 1.0));
    ksum += blur_k.data()[i];
  }
  for (size_t i = 0; i < blur_k.size(); ++i) blur_k.data()[i] = float(blur_k.data()[i] / ksum);

  std::vector<Case> cases;
  cases.push_back({"conv2d_forward",
                   [&] {
                     Tensor out(out_s);
                     srft::kernels::conv2d_forward(in, w, bias, 1, 1, out);
                     return out;
                   },
                   [&] { return srft::ref::conv2d(in, w, bias, 1, 1); }});
  cases.push_back({"conv2d_backward_input",
                   [&] {
                     Tensor gin(in_s);
                     gin.fill(0.f);
                     srft::kernels::conv2d_backward_input(gout, w, 1, 1, gin);
                     return gin;
                   },
                   [&] {
                     // Adjoint via the definition: gin[p] = sum_q w-contrib, computed
                     // as a direct correlation with the flipped kernel would be; keep
                     // it honest with a scalar quadruple loop.
                     Tensor gin(in_s);
                     for (int n = 0; n < in_s.n; ++n)
                       for (int ic = 0; ic < in_s.c; ++ic)
                         for (int y = 0; y < in_s.h; ++y)
                           for (int x = 0; x < in_s.w; ++x) {
                             double acc = 0.0;
                             for (int oc = 0; oc < w_s.n; ++oc)
                               for (int ky = 0; ky < w_s.h; ++ky)
                                 for (int kx = 0; kx < w_s.w; ++kx) {
                                   const int oy = y + 1 - ky, ox = x + 1 - kx;
                                   if (oy < 0 || oy >= out_s.h || ox < 0 || ox >= out_s.w)
                                     continue;
                                   acc += double(gout.at(n, oc, oy, ox)) *
                                          double(w.at(oc, ic, ky, kx));
                                 }
                             gin.at(n, ic, y, x) = float(acc);
                           }
                     return gin;
                   }});
  cases.push_back({"conv2d_backward_weight",
                   [&] {
                     Tensor gw(w_s);
                     gw.fill(0.f);
                     srft::kernels::conv2d_backward_weight(gout, in, 1, 1, gw);
                     return gw;
                   },
                   [&] {
                     Tensor gw(w_s);
                     for (int oc = 0; oc < w_s.n; ++oc)
                       for (int ic = 0; ic < w_s.c; ++ic)
                         for (int ky = 0; ky < w_s.h; ++ky)
                           for (int kx = 0; kx < w_s.w; ++kx) {
                             double acc = 0.0;
                             for (int n = 0; n < in_s.n; ++n)
                               for (int oy = 0; oy < out_s.h; ++oy)
                                 for (int ox = 0; ox < out_s.w; ++ox) {
                                   const int y = oy - 1 + ky, x = ox - 1 + kx;
                                   if (y < 0 || y >= in_s.h || x < 0 || x >= in_s.w) continue;
                                   acc += double(gout.at(n, oc, oy, ox)) *
                                          double(in.at(n, ic, y, x));
                                 }
                             gw.at(oc, ic, ky, kx) = float(acc);
                           }
                     return gw;
                   }});
  cases.push_back({"bicubic_down_x4_aa",
                   [&] { return srft::bicubic_resize(img, 4, true, true); },
                   [&] { return srft::ref::bicubic_resize(img, 4, true, true); }});
  cases.push_back({"bicubic_up_x4",
                   [&] { return srft::bicubic_resize(img, 4, false, true); },
                   [&] { return srft::ref::bicubic_resize(img, 4, false, true); }});
  cases.push_back({"blur_5x5",
                   [&] { return srft::blur_apply(img, blur_k); },
                   [&] { return srft::ref::blur(img, blur_k); }});

  std::printf("threads: %d (max %d)\n", threads, srft::kernels::max_threads());
  const int failures = run_cases(cases, threads);
  if (failures) {
    std::printf("%d kernel(s) disagreed with the reference\n", failures);
    return 1;
  }
  std::printf("all kernels match the serial reference\n");
  return 0;
}

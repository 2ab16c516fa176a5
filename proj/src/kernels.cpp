#include "srft/kernels.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace srft::kernels {

void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

void check_conv_args(const Shape& in, const Shape& w, const Shape& b,
                     int stride, int pad) {
  if (w.h % 2 == 0 || w.w % 2 == 0) {
    throw std::invalid_argument("conv2d: kernel dims must be odd, got " + w.str());
  }
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (pad < 0) throw std::invalid_argument("conv2d: pad must be >= 0");
  if (in.c != w.c) {
    throw std::invalid_argument("conv2d: input channels " + in.str() +
                                " do not match kernel " + w.str());
  }
  if (!(b == Shape{1, w.n, 1, 1})) {
    throw std::invalid_argument("conv2d: bias must be (1," + std::to_string(w.n) +
                                ",1,1), got " + b.str());
  }
}

}  // namespace

Shape conv2d_out_shape(const Shape& in, const Shape& w, int stride, int pad) {
  int oh = (in.h + 2 * pad - w.h) / stride + 1;
  int ow = (in.w + 2 * pad - w.w) / stride + 1;
  if (in.h + 2 * pad < w.h || in.w + 2 * pad < w.w) {
    throw std::invalid_argument("conv2d: kernel " + w.str() +
                                " larger than padded input " + in.str());
  }
  return Shape{in.n, w.n, oh, ow};
}

void conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& b,
                    int stride, int pad, Tensor& out) {
  check_conv_args(in.shape(), w.shape(), b.shape(), stride, pad);
  Shape os = conv2d_out_shape(in.shape(), w.shape(), stride, pad);
  if (!(out.shape() == os)) out = Tensor(os);

  const int N = in.n(), IC = in.c(), H = in.h(), W = in.w();
  const int OC = w.n(), KH = w.h(), KW = w.w();
  const int OH = os.h, OW = os.w;
  const float* ind = in.data();
  const float* wd = w.data();
  const float* bd = b.data();
  float* od = out.data();

  if (stride == 1) {
    // Row accumulator: acc[ox] gathers terms in fixed (ic,ky,kx) order.
    const int64_t rows = int64_t(N) * OC * OH;
#pragma omp parallel
    {
      std::vector<double> acc(OW);
#pragma omp for schedule(static)
      for (int64_t r = 0; r < rows; ++r) {
        const int oy = int(r % OH);
        const int oc = int((r / OH) % OC);
        const int n = int(r / (int64_t(OH) * OC));
        std::fill(acc.begin(), acc.end(), double(bd[oc]));
        for (int ic = 0; ic < IC; ++ic) {
          for (int ky = 0; ky < KH; ++ky) {
            const int iy = oy - pad + ky;
            if (iy < 0 || iy >= H) continue;
            const float* irow = ind + ((size_t(n) * IC + ic) * H + iy) * W;
            const float* wrow = wd + ((size_t(oc) * IC + ic) * KH + ky) * KW;
            for (int kx = 0; kx < KW; ++kx) {
              const double wv = wrow[kx];
              const int d = kx - pad;
              const int x0 = std::max(0, -d);
              const int x1 = std::min(OW - 1, W - 1 - d);
              for (int ox = x0; ox <= x1; ++ox) acc[ox] += wv * irow[ox + d];
            }
          }
        }
        float* orow = od + ((size_t(n) * OC + oc) * OH + oy) * OW;
        for (int ox = 0; ox < OW; ++ox) orow[ox] = float(acc[ox]);
      }
    }
    return;
  }

  // General stride: plain per-element gather.
  const int64_t total = os.numel();
#pragma omp parallel for schedule(static)
  for (int64_t e = 0; e < total; ++e) {
    const int ox = int(e % OW);
    const int oy = int((e / OW) % OH);
    const int oc = int((e / (int64_t(OW) * OH)) % OC);
    const int n = int(e / (int64_t(OW) * OH * OC));
    double acc = bd[oc];
    for (int ic = 0; ic < IC; ++ic) {
      for (int ky = 0; ky < KH; ++ky) {
        const int iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= H) continue;
        for (int kx = 0; kx < KW; ++kx) {
          const int ix = ox * stride - pad + kx;
          if (ix < 0 || ix >= W) continue;
          acc += double(wd[((size_t(oc) * IC + ic) * KH + ky) * KW + kx]) *
                 double(ind[((size_t(n) * IC + ic) * H + iy) * W + ix]);
        }
      }
    }
    od[e] = float(acc);
  }
}

void conv2d_backward_input(const Tensor& gout, const Tensor& w,
                           int stride, int pad, Tensor& gin) {
  const int N = gin.n(), IC = gin.c(), H = gin.h(), W = gin.w();
  const int OC = w.n(), KH = w.h(), KW = w.w();
  const int OH = gout.h(), OW = gout.w();
  if (gout.n() != N || gout.c() != OC || w.c() != IC) {
    throw std::invalid_argument("conv2d_backward_input: inconsistent shapes " +
                                gout.shape().str() + " / " + w.shape().str() +
                                " / " + gin.shape().str());
  }
  const float* gd = gout.data();
  const float* wd = w.data();
  float* gi = gin.data();

  if (stride == 1) {
    const int64_t rows = int64_t(N) * IC * H;
#pragma omp parallel
    {
      std::vector<double> acc(W);
#pragma omp for schedule(static)
      for (int64_t r = 0; r < rows; ++r) {
        const int iy = int(r % H);
        const int ic = int((r / H) % IC);
        const int n = int(r / (int64_t(H) * IC));
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int oc = 0; oc < OC; ++oc) {
          for (int ky = 0; ky < KH; ++ky) {
            const int oy = iy + pad - ky;
            if (oy < 0 || oy >= OH) continue;
            const float* grow = gd + ((size_t(n) * OC + oc) * OH + oy) * OW;
            const float* wrow = wd + ((size_t(oc) * IC + ic) * KH + ky) * KW;
            for (int kx = 0; kx < KW; ++kx) {
              const double wv = wrow[kx];
              const int d = pad - kx;
              const int x0 = std::max(0, -d);
              const int x1 = std::min(W - 1, OW - 1 - d);
              for (int ix = x0; ix <= x1; ++ix) acc[ix] += wv * grow[ix + d];
            }
          }
        }
        float* girow = gi + ((size_t(n) * IC + ic) * H + iy) * W;
        for (int ix = 0; ix < W; ++ix) girow[ix] += float(acc[ix]);
      }
    }
    return;
  }

  const int64_t total = gin.shape().numel();
#pragma omp parallel for schedule(static)
  for (int64_t e = 0; e < total; ++e) {
    const int ix = int(e % W);
    const int iy = int((e / W) % H);
    const int ic = int((e / (int64_t(W) * H)) % IC);
    const int n = int(e / (int64_t(W) * H * IC));
    double acc = 0.0;
    for (int oc = 0; oc < OC; ++oc) {
      for (int ky = 0; ky < KH; ++ky) {
        const int ty = iy + pad - ky;
        if (ty < 0 || ty % stride != 0) continue;
        const int oy = ty / stride;
        if (oy >= OH) continue;
        for (int kx = 0; kx < KW; ++kx) {
          const int tx = ix + pad - kx;
          if (tx < 0 || tx % stride != 0) continue;
          const int ox = tx / stride;
          if (ox >= OW) continue;
          acc += double(wd[((size_t(oc) * IC + ic) * KH + ky) * KW + kx]) *
                 double(gd[((size_t(n) * OC + oc) * OH + oy) * OW + ox]);
        }
      }
    }
    gi[e] += float(acc);
  }
}

void conv2d_backward_weight(const Tensor& gout, const Tensor& in,
                            int stride, int pad, Tensor& gw) {
  const int N = in.n(), IC = in.c(), H = in.h(), W = in.w();
  const int OC = gw.n(), KH = gw.h(), KW = gw.w();
  const int OH = gout.h(), OW = gout.w();
  if (gout.n() != N || gout.c() != OC || gw.c() != IC) {
    throw std::invalid_argument("conv2d_backward_weight: inconsistent shapes " +
                                gout.shape().str() + " / " + in.shape().str() +
                                " / " + gw.shape().str());
  }
  const float* gd = gout.data();
  const float* ind = in.data();
  float* gwd = gw.data();
  const int64_t nweights = gw.shape().numel();

  if (stride == 1) {
#pragma omp parallel for schedule(static)
    for (int64_t e = 0; e < nweights; ++e) {
      const int kx = int(e % KW);
      const int ky = int((e / KW) % KH);
      const int ic = int((e / (int64_t(KW) * KH)) % IC);
      const int oc = int(e / (int64_t(KW) * KH * IC));
      const int d = kx - pad;
      const int x0 = std::max(0, -d);
      const int x1 = std::min(OW - 1, W - 1 - d);
      // Four fixed partial-sum lanes keyed by (ox - x0) & 3 break the
      // float add latency chain without changing the term-to-lane map.
      double p0 = 0, p1 = 0, p2 = 0, p3 = 0;
      for (int n = 0; n < N; ++n) {
        for (int oy = 0; oy < OH; ++oy) {
          const int iy = oy - pad + ky;
          if (iy < 0 || iy >= H) continue;
          const float* grow = gd + ((size_t(n) * OC + oc) * OH + oy) * OW;
          const float* irow = ind + ((size_t(n) * IC + ic) * H + iy) * W + d;
          int ox = x0;
          for (; ox + 3 <= x1; ox += 4) {
            p0 += double(grow[ox]) * double(irow[ox]);
            p1 += double(grow[ox + 1]) * double(irow[ox + 1]);
            p2 += double(grow[ox + 2]) * double(irow[ox + 2]);
            p3 += double(grow[ox + 3]) * double(irow[ox + 3]);
          }
          for (; ox <= x1; ++ox) {
            const double t = double(grow[ox]) * double(irow[ox]);
            switch ((ox - x0) & 3) {
              case 0: p0 += t; break;
              case 1: p1 += t; break;
              case 2: p2 += t; break;
              default: p3 += t; break;
            }
          }
        }
      }
      gwd[e] += float(((p0 + p1) + p2) + p3);
    }
    return;
  }

#pragma omp parallel for schedule(static)
  for (int64_t e = 0; e < nweights; ++e) {
    const int kx = int(e % KW);
    const int ky = int((e / KW) % KH);
    const int ic = int((e / (int64_t(KW) * KH)) % IC);
    const int oc = int(e / (int64_t(KW) * KH * IC));
    double acc = 0.0;
    for (int n = 0; n < N; ++n) {
      for (int oy = 0; oy < OH; ++oy) {
        const int iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= H) continue;
        for (int ox = 0; ox < OW; ++ox) {
          const int ix = ox * stride - pad + kx;
          if (ix < 0 || ix >= W) continue;
          acc += double(gd[((size_t(n) * OC + oc) * OH + oy) * OW + ox]) *
                 double(ind[((size_t(n) * IC + ic) * H + iy) * W + ix]);
        }
      }
    }
    gwd[e] += float(acc);
  }
}

void conv2d_backward_bias(const Tensor& gout, Tensor& gb) {
  const int N = gout.n(), OC = gout.c();
  const int64_t plane = int64_t(gout.h()) * gout.w();
  if (!(gb.shape() == Shape{1, OC, 1, 1})) {
    throw std::invalid_argument("conv2d_backward_bias: gb must be (1," +
                                std::to_string(OC) + ",1,1), got " +
                                gb.shape().str());
  }
  const float* gd = gout.data();
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < OC; ++oc) {
    double acc = 0.0;
    for (int n = 0; n < N; ++n) {
      const float* p = gd + (size_t(n) * OC + oc) * plane;
      for (int64_t i = 0; i < plane; ++i) acc += p[i];
    }
    gb.data()[oc] += float(acc);
  }
}

void pixel_shuffle(const Tensor& in, int s, Tensor& out) {
  if (s < 1) throw std::invalid_argument("pixel_shuffle: factor must be >= 1");
  if (in.c() % (s * s) != 0) {
    throw std::invalid_argument("pixel_shuffle: channels " + std::to_string(in.c()) +
                                " not divisible by " + std::to_string(s * s));
  }
  Shape os{in.n(), in.c() / (s * s), in.h() * s, in.w() * s};
  if (!(out.shape() == os)) out = Tensor(os);
  const int N = in.n(), C = os.c, H = in.h(), W = in.w();
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < int64_t(N) * C * H; ++r) {
    const int y = int(r % H);
    const int c = int((r / H) % C);
    const int n = int(r / (int64_t(H) * C));
    for (int i = 0; i < s; ++i) {
      for (int j = 0; j < s; ++j) {
        const float* irow = in.data() + in.index(n, c * s * s + i * s + j, y, 0);
        float* orow = out.data() + out.index(n, c, y * s + i, j);
        for (int x = 0; x < W; ++x) orow[size_t(x) * s] = irow[x];
      }
    }
  }
}

void pixel_unshuffle(const Tensor& in, int s, Tensor& out) {
  if (s < 1) throw std::invalid_argument("pixel_unshuffle: factor must be >= 1");
  if (in.h() % s != 0 || in.w() % s != 0) {
    throw std::invalid_argument("pixel_unshuffle: spatial dims of " +
                                in.shape().str() + " not divisible by " +
                                std::to_string(s));
  }
  Shape os{in.n(), in.c() * s * s, in.h() / s, in.w() / s};
  if (!(out.shape() == os)) out = Tensor(os);
  const int N = in.n(), C = in.c(), H = os.h, W = os.w;
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < int64_t(N) * C * H; ++r) {
    const int y = int(r % H);
    const int c = int((r / H) % C);
    const int n = int(r / (int64_t(H) * C));
    for (int i = 0; i < s; ++i) {
      for (int j = 0; j < s; ++j) {
        const float* irow = in.data() + in.index(n, c, y * s + i, j);
        float* orow = out.data() + out.index(n, c * s * s + i * s + j, y, 0);
        for (int x = 0; x < W; ++x) orow[x] = irow[size_t(x) * s];
      }
    }
  }
}

void sgd_step(Tensor& p, const Tensor& g, Tensor& v, float lr, float momentum) {
  require_same_shape(p, g, "sgd_step(p,g)");
  require_same_shape(p, v, "sgd_step(p,v)");
  float* pd = p.data();
  const float* gd = g.data();
  float* vd = v.data();
  const int64_t n = int64_t(p.size());
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    const float vn = float(double(momentum) * double(vd[i]) + double(gd[i]));
    vd[i] = vn;
    pd[i] = float(double(pd[i]) - double(lr) * double(vn));
  }
}

}  // namespace srft::kernels

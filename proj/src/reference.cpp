#include "srft/reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace srft::ref {

Tensor conv2d(const Tensor& in, const Tensor& w, const Tensor& b,
              int stride, int pad) {
  const int N = in.n(), IC = in.c(), H = in.h(), W = in.w();
  const int OC = w.n(), KH = w.h(), KW = w.w();
  const int OH = (H + 2 * pad - KH) / stride + 1;
  const int OW = (W + 2 * pad - KW) / stride + 1;
  Tensor out(N, OC, OH, OW);
  for (int n = 0; n < N; ++n)
    for (int oc = 0; oc < OC; ++oc)
      for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox) {
          double acc = b.at(0, oc, 0, 0);
          for (int ic = 0; ic < IC; ++ic)
            for (int ky = 0; ky < KH; ++ky)
              for (int kx = 0; kx < KW; ++kx) {
                const int iy = oy * stride - pad + ky;
                const int ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += double(w.at(oc, ic, ky, kx)) * double(in.at(n, ic, iy, ix));
              }
          out.at(n, oc, oy, ox) = float(acc);
        }
  return out;
}

double keys_weight(double x) {
  const double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
  return 0.0;
}

Tensor bicubic_resize(const Tensor& in, int scale, bool down, bool antialias) {
  if (scale == 1) return in;
  const int H = in.h(), W = in.w();
  const int OH = down ? H / scale : H * scale;
  const int OW = down ? W / scale : W * scale;
  if (down && (H % scale != 0 || W % scale != 0)) {
    throw std::invalid_argument("ref::bicubic_resize: dims not divisible");
  }
  Tensor out(in.n(), in.c(), OH, OW);
  const double s = double(scale);
  const double ks = (down && antialias) ? s : 1.0;
  for (int n = 0; n < in.n(); ++n)
    for (int c = 0; c < in.c(); ++c)
      for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox) {
          const double uy = down ? (oy + 0.5) * s - 0.5 : (oy + 0.5) / s - 0.5;
          const double ux = down ? (ox + 0.5) * s - 0.5 : (ox + 0.5) / s - 0.5;
          int jy0, jy1, jx0, jx1;
          if (down && antialias) {
            jy0 = int(std::ceil(uy - 2.0 * s));
            jy1 = int(std::floor(uy + 2.0 * s));
            jx0 = int(std::ceil(ux - 2.0 * s));
            jx1 = int(std::floor(ux + 2.0 * s));
          } else {
            jy0 = int(std::floor(uy)) - 1;
            jy1 = jy0 + 3;
            jx0 = int(std::floor(ux)) - 1;
            jx1 = jx0 + 3;
          }
          long double num = 0.0L, den = 0.0L;
          for (int jy = jy0; jy <= jy1; ++jy)
            for (int jx = jx0; jx <= jx1; ++jx) {
              const double wv = keys_weight((uy - jy) / ks) * keys_weight((ux - jx) / ks);
              const int cy = std::clamp(jy, 0, H - 1);
              const int cx = std::clamp(jx, 0, W - 1);
              num += (long double)(wv) * (long double)(in.at(n, c, cy, cx));
              den += (long double)(wv);
            }
          out.at(n, c, oy, ox) = float(double(num / den));
        }
  return out;
}

Tensor blur(const Tensor& in, const Tensor& k) {
  if (k.n() != 1 || k.c() != 1 || k.h() % 2 == 0 || k.w() % 2 == 0) {
    throw std::invalid_argument("ref::blur: kernel must be (1,1,odd,odd)");
  }
  const int H = in.h(), W = in.w();
  const int my = k.h() / 2, mx = k.w() / 2;
  Tensor out(in.shape());
  for (int n = 0; n < in.n(); ++n)
    for (int c = 0; c < in.c(); ++c)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          double acc = 0.0;
          for (int u = 0; u < k.h(); ++u)
            for (int v = 0; v < k.w(); ++v) {
              const int sy = std::clamp(y - my + u, 0, H - 1);
              const int sx = std::clamp(x - mx + v, 0, W - 1);
              acc += double(k.at(0, 0, u, v)) * double(in.at(n, c, sy, sx));
            }
          out.at(n, c, y, x) = float(acc);
        }
  return out;
}

}  // namespace srft::ref

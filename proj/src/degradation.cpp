#include "srft/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace srft {

namespace {

constexpr double kPi = 3.14159265358979323846;

double keys(double x) {
  const double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
  return 0.0;
}

void check_scale(int scale) {
  if (scale < 1 || scale > 4) {
    throw std::invalid_argument("resize: scale must be in {1,2,3,4}, got " +
                                std::to_string(scale));
  }
}

/// Per-output tap table along one axis. Indices are pre-clamped (replicate
/// borders) and weights normalized to sum 1 per output index.
struct Taps1D {
  int in_len = 0, out_len = 0;
  std::vector<int> start;      // out_len + 1 offsets
  std::vector<int> idx;
  std::vector<double> wgt;
};

Taps1D make_taps(int in_len, int scale, bool down, bool antialias) {
  Taps1D t;
  t.in_len = in_len;
  t.out_len = down ? in_len / scale : in_len * scale;
  t.start.reserve(t.out_len + 1);
  t.start.push_back(0);
  const double s = double(scale);
  const double ks = (down && antialias) ? s : 1.0;
  for (int i = 0; i < t.out_len; ++i) {
    const double u = down ? (i + 0.5) * s - 0.5 : (i + 0.5) / s - 0.5;
    int j0, j1;
    if (down && antialias) {
      j0 = int(std::ceil(u - 2.0 * s));
      j1 = int(std::floor(u + 2.0 * s));
    } else {
      j0 = int(std::floor(u)) - 1;
      j1 = j0 + 3;
    }
    double sum = 0.0;
    for (int j = j0; j <= j1; ++j) sum += keys((u - j) / ks);
    for (int j = j0; j <= j1; ++j) {
      t.idx.push_back(std::clamp(j, 0, in_len - 1));
      t.wgt.push_back(keys((u - j) / ks) / sum);
    }
    t.start.push_back(int(t.idx.size()));
  }
  return t;
}

/// Transpose of a Taps1D: per input index, the (out index, weight) pairs that
/// read it, in ascending out order. Gathering over these lists is the exact
/// adjoint of the forward pass.
struct TapsT {
  int in_len = 0, out_len = 0;
  std::vector<int> start;
  std::vector<int> out_idx;
  std::vector<double> wgt;
};

TapsT transpose(const Taps1D& t) {
  TapsT tt;
  tt.in_len = t.in_len;
  tt.out_len = t.out_len;
  std::vector<int> count(t.in_len, 0);
  for (int v : t.idx) count[v]++;
  tt.start.assign(t.in_len + 1, 0);
  for (int i = 0; i < t.in_len; ++i) tt.start[i + 1] = tt.start[i] + count[i];
  tt.out_idx.assign(t.idx.size(), 0);
  tt.wgt.assign(t.idx.size(), 0.0);
  std::vector<int> cursor(tt.start.begin(), tt.start.end() - 1);
  for (int o = 0; o < t.out_len; ++o) {
    for (int k = t.start[o]; k < t.start[o + 1]; ++k) {
      const int pos = cursor[t.idx[k]]++;
      tt.out_idx[pos] = o;
      tt.wgt[pos] = t.wgt[k];
    }
  }
  return tt;
}

Tensor pass_w(const Tensor& in, const Taps1D& t) {
  Tensor out(in.n(), in.c(), in.h(), t.out_len);
  const int64_t rows = int64_t(in.n()) * in.c() * in.h();
  const int W = in.w(), OW = t.out_len;
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < rows; ++r) {
    const float* irow = in.data() + r * W;
    float* orow = out.data() + r * OW;
    for (int o = 0; o < OW; ++o) {
      double acc = 0.0;
      for (int k = t.start[o]; k < t.start[o + 1]; ++k) {
        acc += t.wgt[k] * double(irow[t.idx[k]]);
      }
      orow[o] = float(acc);
    }
  }
  return out;
}

Tensor pass_h(const Tensor& in, const Taps1D& t) {
  Tensor out(in.n(), in.c(), t.out_len, in.w());
  const int64_t rows = int64_t(in.n()) * in.c() * t.out_len;
  const int W = in.w(), H = in.h(), OH = t.out_len;
#pragma omp parallel
  {
    std::vector<double> acc(W);
#pragma omp for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
      const int oy = int(r % OH);
      const int64_t plane = r / OH;
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int k = t.start[oy]; k < t.start[oy + 1]; ++k) {
        const double wv = t.wgt[k];
        const float* irow = in.data() + (plane * H + t.idx[k]) * W;
        for (int x = 0; x < W; ++x) acc[x] += wv * double(irow[x]);
      }
      float* orow = out.data() + r * W;
      for (int x = 0; x < W; ++x) orow[x] = float(acc[x]);
    }
  }
  return out;
}

Tensor pass_w_adj(const Tensor& g, const TapsT& tt) {
  Tensor out(g.n(), g.c(), g.h(), tt.in_len);
  const int64_t rows = int64_t(g.n()) * g.c() * g.h();
  const int OW = tt.out_len, W = tt.in_len;
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < rows; ++r) {
    const float* grow = g.data() + r * OW;
    float* orow = out.data() + r * W;
    for (int i = 0; i < W; ++i) {
      double acc = 0.0;
      for (int k = tt.start[i]; k < tt.start[i + 1]; ++k) {
        acc += tt.wgt[k] * double(grow[tt.out_idx[k]]);
      }
      orow[i] = float(acc);
    }
  }
  return out;
}

Tensor pass_h_adj(const Tensor& g, const TapsT& tt) {
  Tensor out(g.n(), g.c(), tt.in_len, g.w());
  const int64_t rows = int64_t(g.n()) * g.c() * tt.in_len;
  const int W = g.w(), OH = tt.out_len, H = tt.in_len;
#pragma omp parallel
  {
    std::vector<double> acc(W);
#pragma omp for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
      const int iy = int(r % H);
      const int64_t plane = r / H;
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int k = tt.start[iy]; k < tt.start[iy + 1]; ++k) {
        const double wv = tt.wgt[k];
        const float* grow = g.data() + (plane * OH + tt.out_idx[k]) * W;
        for (int x = 0; x < W; ++x) acc[x] += wv * double(grow[x]);
      }
      float* orow = out.data() + r * W;
      for (int x = 0; x < W; ++x) orow[x] = float(acc[x]);
    }
  }
  return out;
}

}  // namespace

Tensor bicubic_resize(const Tensor& in, int scale, bool down, bool antialias) {
  check_scale(scale);
  if (scale == 1) return in;
  if (down && (in.h() % scale != 0 || in.w() % scale != 0)) {
    throw std::invalid_argument("bicubic_resize: input " + in.shape().str() +
                                " not divisible by scale " + std::to_string(scale));
  }
  const Taps1D tw = make_taps(in.w(), scale, down, antialias);
  const Taps1D th = make_taps(in.h(), scale, down, antialias);
  return pass_h(pass_w(in, tw), th);
}

Tensor bicubic_resize_adjoint(const Tensor& g, int scale, bool down, bool antialias) {
  check_scale(scale);
  if (scale == 1) return g;
  // Recover the forward input dims from the output gradient dims.
  const int ih = down ? g.h() * scale : g.h() / scale;
  const int iw = down ? g.w() * scale : g.w() / scale;
  if (!down && (g.h() % scale != 0 || g.w() % scale != 0)) {
    throw std::invalid_argument("bicubic_resize_adjoint: gradient " + g.shape().str() +
                                " not divisible by scale " + std::to_string(scale));
  }
  const TapsT tw = transpose(make_taps(iw, scale, down, antialias));
  const TapsT th = transpose(make_taps(ih, scale, down, antialias));
  return pass_w_adj(pass_h_adj(g, th), tw);
}

Tensor blur_apply(const Tensor& in, const Tensor& kernel) {
  if (kernel.n() != 1 || kernel.c() != 1 || kernel.h() % 2 == 0 || kernel.w() % 2 == 0) {
    throw std::invalid_argument("blur: kernel must be (1,1,odd,odd), got " +
                                kernel.shape().str());
  }
  const int H = in.h(), W = in.w();
  const int KH = kernel.h(), KW = kernel.w();
  const int my = KH / 2, mx = KW / 2;
  Tensor out(in.shape());
  const int64_t rows = int64_t(in.n()) * in.c() * H;
  const float* kd = kernel.data();
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < rows; ++r) {
    const int y = int(r % H);
    const int64_t plane = r / H;
    const float* iplane = in.data() + plane * int64_t(H) * W;
    float* orow = out.data() + r * W;
    for (int x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int u = 0; u < KH; ++u) {
        const int sy = std::clamp(y - my + u, 0, H - 1);
        const float* irow = iplane + int64_t(sy) * W;
        const float* krow = kd + int64_t(u) * KW;
        for (int v = 0; v < KW; ++v) {
          const int sx = std::clamp(x - mx + v, 0, W - 1);
          acc += double(krow[v]) * double(irow[sx]);
        }
      }
      orow[x] = float(acc);
    }
  }
  return out;
}

Tensor blur_adjoint(const Tensor& g, const Tensor& kernel) {
  if (kernel.n() != 1 || kernel.c() != 1 || kernel.h() % 2 == 0 || kernel.w() % 2 == 0) {
    throw std::invalid_argument("blur_adjoint: kernel must be (1,1,odd,odd), got " +
                                kernel.shape().str());
  }
  const int H = g.h(), W = g.w();
  const int KH = kernel.h(), KW = kernel.w();
  const int my = KH / 2, mx = KW / 2;
  Tensor out(g.shape());
  const int64_t rows = int64_t(g.n()) * g.c() * H;
  const float* kd = kernel.data();
  // For source pixel iy and kernel row u, the output rows y whose clamped
  // sample index equals iy form one contiguous interval (unbounded at the
  // image edges where the clamp saturates).
  auto out_range = [](int i, int len, int m, int k, int& lo, int& hi) {
    lo = (i == 0) ? 0 : i + m - k;
    hi = (i == len - 1) ? len - 1 : i + m - k;
    lo = std::max(lo, 0);
    hi = std::min(hi, len - 1);
  };
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < rows; ++r) {
    const int iy = int(r % H);
    const int64_t plane = r / H;
    const float* gplane = g.data() + plane * int64_t(H) * W;
    float* orow = out.data() + r * W;
    for (int ix = 0; ix < W; ++ix) {
      double acc = 0.0;
      for (int u = 0; u < KH; ++u) {
        int ylo, yhi;
        out_range(iy, H, my, u, ylo, yhi);
        if (ylo > yhi) continue;
        const float* krow = kd + int64_t(u) * KW;
        for (int v = 0; v < KW; ++v) {
          int xlo, xhi;
          out_range(ix, W, mx, v, xlo, xhi);
          if (xlo > xhi) continue;
          double gsum = 0.0;
          for (int y = ylo; y <= yhi; ++y) {
            const float* grow = gplane + int64_t(y) * W;
            for (int x = xlo; x <= xhi; ++x) gsum += double(grow[x]);
          }
          acc += double(krow[v]) * gsum;
        }
      }
      orow[ix] = float(acc);
    }
  }
  return out;
}

KernelSpec KernelSpec::gaussian(double sigma_x, double sigma_y, double theta, int support) {
  if (sigma_x <= 0.0 || sigma_y <= 0.0) {
    throw std::invalid_argument("gaussian kernel: sigmas must be positive");
  }
  if (support < 1 || support % 2 == 0) {
    throw std::invalid_argument("kernel support must be odd and positive, got " +
                                std::to_string(support));
  }
  KernelSpec k;
  k.kind = KernelKind::gaussian;
  k.sigma_x = sigma_x;
  k.sigma_y = sigma_y;
  k.theta = theta;
  k.support = support;
  return k;
}

KernelSpec KernelSpec::isotropic_gaussian(double sigma, int support) {
  return gaussian(sigma, sigma, 0.0, support);
}

KernelSpec KernelSpec::disk(double radius) {
  return disk(radius, 2 * int(std::ceil(radius)) + 1);
}

KernelSpec KernelSpec::disk(double radius, int support) {
  if (radius <= 0.0) throw std::invalid_argument("disk kernel: radius must be positive");
  if (support < 1 || support % 2 == 0) {
    throw std::invalid_argument("kernel support must be odd and positive, got " +
                                std::to_string(support));
  }
  KernelSpec k;
  k.kind = KernelKind::disk;
  k.radius = radius;
  k.support = support;
  return k;
}

KernelSpec KernelSpec::explicit_kernel(int support, std::vector<float> values) {
  if (support < 1 || support % 2 == 0) {
    throw std::invalid_argument("kernel support must be odd and positive, got " +
                                std::to_string(support));
  }
  if (values.size() != size_t(support) * support) {
    throw std::invalid_argument("explicit kernel: expected " +
                                std::to_string(support * support) + " values, got " +
                                std::to_string(values.size()));
  }
  KernelSpec k;
  k.kind = KernelKind::explicit_values;
  k.support = support;
  k.values = std::move(values);
  return k;
}

Tensor KernelSpec::realize() const {
  const int k = support;
  const int m = k / 2;
  std::vector<double> vals(size_t(k) * k, 0.0);
  switch (kind) {
    case KernelKind::gaussian: {
      const double c = std::cos(theta), s = std::sin(theta);
      for (int u = 0; u < k; ++u) {
        for (int v = 0; v < k; ++v) {
          const double dy = u - m, dx = v - m;
          const double xp = (c * dx + s * dy) / sigma_x;
          const double yp = (-s * dx + c * dy) / sigma_y;
          vals[size_t(u) * k + v] = std::exp(-0.5 * (xp * xp + yp * yp));
        }
      }
      break;
    }
    case KernelKind::disk: {
      // Pixel-area coverage via a symmetric 64x64 subsample grid.
      const int S = 64;
      const double r2 = radius * radius;
      for (int u = 0; u < k; ++u) {
        for (int v = 0; v < k; ++v) {
          const double dy = u - m, dx = v - m;
          int hit = 0;
          for (int a = 0; a < S; ++a) {
            const double py = dy - 0.5 + (a + 0.5) / S;
            for (int b = 0; b < S; ++b) {
              const double px = dx - 0.5 + (b + 0.5) / S;
              if (px * px + py * py <= r2) ++hit;
            }
          }
          vals[size_t(u) * k + v] = double(hit) / (double(S) * S);
        }
      }
      break;
    }
    case KernelKind::explicit_values: {
      for (size_t i = 0; i < vals.size(); ++i) vals[i] = values[i];
      break;
    }
  }
  double sum = 0.0;
  for (double v : vals) sum += v;
  if (!(sum > 0.0)) {
    throw std::invalid_argument("kernel realization: values sum to " +
                                std::to_string(sum) + ", must be positive");
  }
  Tensor t(1, 1, k, k);
  for (size_t i = 0; i < vals.size(); ++i) t.data()[i] = float(vals[i] / sum);
  return t;
}

KernelSpec random_gaussian_spec(Rng& rng, int scale) {
  check_scale(scale);
  const double s = double(scale);
  const double sx = rng.uniform(0.35 * s, 1.25 * s);
  const double sy = rng.uniform(0.35 * s, 1.25 * s);
  const double th = rng.uniform(0.0, kPi);
  const int support = 2 * int(std::ceil(3.0 * std::max(sx, sy))) + 1;
  return KernelSpec::gaussian(sx, sy, th, support);
}

KernelSpec perturb_kernel(const KernelSpec& spec, double rel, Rng& rng) {
  if (rel < 0.0) throw std::invalid_argument("perturb_kernel: rel must be >= 0");
  KernelSpec out = spec;
  switch (spec.kind) {
    case KernelKind::gaussian: {
      out.sigma_x = spec.sigma_x * rng.uniform(1.0 - rel, 1.0 + rel);
      out.sigma_y = spec.sigma_y * rng.uniform(1.0 - rel, 1.0 + rel);
      out.theta = spec.theta + rng.uniform(-rel * kPi / 8.0, rel * kPi / 8.0);
      out.support = 2 * int(std::ceil(3.0 * std::max(out.sigma_x, out.sigma_y))) + 1;
      break;
    }
    case KernelKind::disk: {
      out.radius = spec.radius * rng.uniform(1.0 - rel, 1.0 + rel);
      out.support = 2 * int(std::ceil(out.radius)) + 1;
      break;
    }
    case KernelKind::explicit_values:
      break;
  }
  return out;
}

DegradationSpec DegradationSpec::identity() {
  DegradationSpec d;
  d.add_identity();
  return d;
}

DegradationSpec DegradationSpec::bicubic_down(int scale, bool antialias) {
  DegradationSpec d;
  d.add_bicubic_down(scale, antialias);
  return d;
}

DegradationSpec DegradationSpec::blur_then_down(const KernelSpec& k, int scale,
                                                bool antialias) {
  DegradationSpec d;
  d.add_blur(k);
  d.add_bicubic_down(scale, antialias);
  return d;
}

DegradationSpec& DegradationSpec::add_blur(const KernelSpec& k) {
  DegradationStage st;
  st.kind = DegradationStage::Kind::blur;
  st.kernel = k;
  st.realized = k.realize();
  stages_.push_back(std::move(st));
  return *this;
}

DegradationSpec& DegradationSpec::add_bicubic_down(int scale, bool antialias) {
  if (scale < 2 || scale > 4) {
    throw std::invalid_argument("degradation: downsampling scale must be in {2,3,4}, got " +
                                std::to_string(scale));
  }
  DegradationStage st;
  st.kind = DegradationStage::Kind::bicubic_down;
  st.scale = scale;
  st.antialias = antialias;
  stages_.push_back(std::move(st));
  return *this;
}

DegradationSpec& DegradationSpec::add_identity() {
  stages_.push_back(DegradationStage{});
  return *this;
}

int DegradationSpec::total_scale() const {
  int s = 1;
  for (const auto& st : stages_) {
    if (st.kind == DegradationStage::Kind::bicubic_down) s *= st.scale;
  }
  return s;
}

Shape DegradationSpec::out_shape(const Shape& in) const {
  Shape s = in;
  for (const auto& st : stages_) {
    if (st.kind == DegradationStage::Kind::bicubic_down) {
      if (s.h % st.scale != 0 || s.w % st.scale != 0) {
        throw std::invalid_argument("degradation: shape " + s.str() +
                                    " not divisible by downsampling scale " +
                                    std::to_string(st.scale));
      }
      s.h /= st.scale;
      s.w /= st.scale;
    }
  }
  return s;
}

Tensor DegradationSpec::apply(const Tensor& x) const {
  out_shape(x.shape());  // validate the whole chain up front
  Tensor cur = x;
  for (const auto& st : stages_) {
    switch (st.kind) {
      case DegradationStage::Kind::blur:
        cur = blur_apply(cur, st.realized);
        break;
      case DegradationStage::Kind::bicubic_down:
        cur = bicubic_resize(cur, st.scale, /*down=*/true, st.antialias);
        break;
      case DegradationStage::Kind::identity:
        break;
    }
  }
  return cur;
}

Tensor DegradationSpec::adjoint(const Tensor& g) const {
  Tensor cur = g;
  for (auto it = stages_.rbegin(); it != stages_.rend(); ++it) {
    switch (it->kind) {
      case DegradationStage::Kind::blur:
        cur = blur_adjoint(cur, it->realized);
        break;
      case DegradationStage::Kind::bicubic_down:
        cur = bicubic_resize_adjoint(cur, it->scale, /*down=*/true, it->antialias);
        break;
      case DegradationStage::Kind::identity:
        break;
    }
  }
  return cur;
}

std::string DegradationSpec::name() const {
  if (stages_.empty()) return "identity";
  std::string s;
  for (const auto& st : stages_) {
    if (!s.empty()) s += "+";
    switch (st.kind) {
      case DegradationStage::Kind::blur:
        switch (st.kernel.kind) {
          case KernelKind::gaussian: s += "blur(gaussian)"; break;
          case KernelKind::disk: s += "blur(disk)"; break;
          case KernelKind::explicit_values: s += "blur(explicit)"; break;
        }
        break;
      case DegradationStage::Kind::bicubic_down:
        s += "down" + std::to_string(st.scale) + (st.antialias ? "aa" : "");
        break;
      case DegradationStage::Kind::identity:
        s += "identity";
        break;
    }
  }
  return s;
}

Shape ResizeOp::out_shape(const Shape& in) const {
  if (down_) {
    if (in.h % scale_ != 0 || in.w % scale_ != 0) {
      throw std::invalid_argument("resize: shape " + in.str() +
                                  " not divisible by scale " + std::to_string(scale_));
    }
    return Shape{in.n, in.c, in.h / scale_, in.w / scale_};
  }
  return Shape{in.n, in.c, in.h * scale_, in.w * scale_};
}

std::string ResizeOp::name() const {
  return std::string(down_ ? "down" : "up") + std::to_string(scale_) +
         (down_ && antialias_ ? "aa" : "");
}

}  // namespace srft

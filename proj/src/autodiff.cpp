#include "srft/autodiff.hpp"

#include <cmath>
#include <stdexcept>

#include "srft/kernels.hpp"

namespace srft {

const Tape::Node& Tape::node(int id) const {
  if (id < 0 || size_t(id) >= nodes_.size()) {
    throw std::invalid_argument("tape: node id " + std::to_string(id) +
                                " out of range (size " + std::to_string(nodes_.size()) + ")");
  }
  return nodes_[id];
}

Tape::Node& Tape::node(int id) {
  return const_cast<Node&>(const_cast<const Tape*>(this)->node(id));
}

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return int(nodes_.size()) - 1;
}

int Tape::leaf(Tensor v, bool requires_grad) {
  Node n;
  n.op = Op::leaf;
  n.value = std::move(v);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

int Tape::conv2d(int x, int w, int b, int stride, int pad) {
  Node n;
  n.op = Op::conv2d;
  n.in0 = x;
  n.in1 = w;
  n.in2 = b;
  n.stride = stride;
  n.pad = pad;
  kernels::conv2d_forward(value(x), value(w), value(b), stride, pad, n.value);
  n.requires_grad = requires_grad(x) || requires_grad(w) || requires_grad(b);
  return push(std::move(n));
}

int Tape::pixel_shuffle(int x, int s) {
  Node n;
  n.op = Op::pixel_shuffle;
  n.in0 = x;
  n.factor = s;
  kernels::pixel_shuffle(value(x), s, n.value);
  n.requires_grad = requires_grad(x);
  return push(std::move(n));
}

int Tape::add(int a, int b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  require_same_shape(va, vb, "add");
  Node n;
  n.op = Op::add;
  n.in0 = a;
  n.in1 = b;
  n.value = Tensor(va.shape());
  const int64_t sz = int64_t(va.size());
  float* o = n.value.data();
  const float* pa = va.data();
  const float* pb = vb.data();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < sz; ++i) o[i] = pa[i] + pb[i];
  n.requires_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

int Tape::relu(int x) {
  const Tensor& v = value(x);
  Node n;
  n.op = Op::relu;
  n.in0 = x;
  n.value = Tensor(v.shape());
  const int64_t sz = int64_t(v.size());
  float* o = n.value.data();
  const float* p = v.data();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < sz; ++i) o[i] = p[i] > 0.f ? p[i] : 0.f;
  n.requires_grad = requires_grad(x);
  return push(std::move(n));
}

int Tape::leaky_relu(int x, float slope) {
  const Tensor& v = value(x);
  Node n;
  n.op = Op::leaky_relu;
  n.in0 = x;
  n.fscalar = slope;
  n.value = Tensor(v.shape());
  const int64_t sz = int64_t(v.size());
  float* o = n.value.data();
  const float* p = v.data();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < sz; ++i) o[i] = p[i] > 0.f ? p[i] : slope * p[i];
  n.requires_grad = requires_grad(x);
  return push(std::move(n));
}

int Tape::mul_scalar(int x, float s) {
  const Tensor& v = value(x);
  Node n;
  n.op = Op::mul_scalar;
  n.in0 = x;
  n.fscalar = s;
  n.value = Tensor(v.shape());
  const int64_t sz = int64_t(v.size());
  float* o = n.value.data();
  const float* p = v.data();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < sz; ++i) o[i] = p[i] * s;
  n.requires_grad = requires_grad(x);
  return push(std::move(n));
}

int Tape::dropout(int x, float p, Rng& rng) {
  if (p < 0.f || p >= 1.f) {
    throw std::invalid_argument("dropout: p must be in [0,1), got " + std::to_string(p));
  }
  const Tensor& v = value(x);
  Node n;
  n.op = Op::dropout;
  n.in0 = x;
  n.fscalar = p;
  n.mask = Tensor(v.shape());
  n.value = Tensor(v.shape());
  const float keep_scale = 1.f / (1.f - p);
  // Mask sampling stays serial: one rng draw per element in index order.
  for (size_t i = 0; i < v.size(); ++i) {
    n.mask.data()[i] = rng.bernoulli(p) ? 0.f : keep_scale;
  }
  const int64_t sz = int64_t(v.size());
  float* o = n.value.data();
  const float* pv = v.data();
  const float* pm = n.mask.data();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < sz; ++i) o[i] = pv[i] * pm[i];
  n.requires_grad = requires_grad(x);
  return push(std::move(n));
}

int Tape::linear(int x, const LinearMap& m) {
  Node n;
  n.op = Op::linear_map;
  n.in0 = x;
  n.map = &m;
  n.value = m.apply(value(x));
  n.requires_grad = requires_grad(x);
  return push(std::move(n));
}

int Tape::linear(int x, std::shared_ptr<const LinearMap> m) {
  Node n;
  n.op = Op::linear_map;
  n.in0 = x;
  n.map = m.get();
  n.owned_map = std::move(m);
  n.value = n.map->apply(value(x));
  n.requires_grad = requires_grad(x);
  return push(std::move(n));
}

int Tape::tile(int x, int tn, int th, int tw) {
  const Tensor& v = value(x);
  if (v.n() != 1) {
    throw std::invalid_argument("tile: source batch must be 1, got " + v.shape().str());
  }
  if (tn < 1 || th < v.h() || tw < v.w()) {
    throw std::invalid_argument("tile: target (" + std::to_string(tn) + ",*," +
                                std::to_string(th) + "," + std::to_string(tw) +
                                ") smaller than source " + v.shape().str());
  }
  Node n;
  n.op = Op::tile;
  n.in0 = x;
  n.tn = tn;
  n.th = th;
  n.tw = tw;
  n.value = Tensor(tn, v.c(), th, tw);
  const int C = v.c(), sh = v.h(), sw = v.w();
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < int64_t(tn) * C * th; ++r) {
    const int y = int(r % th);
    const int c = int((r / th) % C);
    const int b = int(r / (int64_t(th) * C));
    const float* srow = v.data() + v.index(0, c, y % sh, 0);
    float* orow = n.value.data() + n.value.index(b, c, y, 0);
    for (int xcol = 0; xcol < tw; ++xcol) orow[xcol] = srow[xcol % sw];
  }
  n.requires_grad = requires_grad(x);
  return push(std::move(n));
}

namespace {

Tape::Node make_reduction(Op op, int a, int b, const Tensor& va, const Tensor& vb) {
  require_same_shape(va, vb, op == Op::mse ? "mse_loss" : "mae_loss");
  Tape::Node n;
  n.op = op;
  n.in0 = a;
  n.in1 = b;
  n.is_reduction = true;
  double acc = 0.0;
  const size_t sz = va.size();
  const float* pa = va.data();
  const float* pb = vb.data();
  if (op == Op::mse) {
    for (size_t i = 0; i < sz; ++i) {
      const double d = double(pa[i]) - double(pb[i]);
      acc += d * d;
    }
  } else {
    for (size_t i = 0; i < sz; ++i) {
      acc += std::abs(double(pa[i]) - double(pb[i]));
    }
  }
  n.scalar64 = acc / double(sz);
  n.value = Tensor(1, 1, 1, 1);
  n.value.data()[0] = float(n.scalar64);
  return n;
}

}  // namespace

int Tape::mse(int pred, int target) {
  Node n = make_reduction(Op::mse, pred, target, value(pred), value(target));
  n.requires_grad = requires_grad(pred) || requires_grad(target);
  return push(std::move(n));
}

int Tape::mae(int pred, int target) {
  Node n = make_reduction(Op::mae, pred, target, value(pred), value(target));
  n.requires_grad = requires_grad(pred) || requires_grad(target);
  return push(std::move(n));
}

void Tape::ensure_grad(Node& n) {
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
}

void Tape::accum_grad(int id, const Tensor& g) {
  Node& n = node(id);
  ensure_grad(n);
  require_same_shape(n.grad, g, "grad accumulation");
  float* d = n.grad.data();
  const float* s = g.data();
  const int64_t sz = int64_t(g.size());
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < sz; ++i) d[i] += s[i];
}

void Tape::backward(int loss_id) {
  Node& loss = node(loss_id);
  if (!(loss.value.shape() == Shape{1, 1, 1, 1})) {
    throw std::invalid_argument("backward: target must be scalar, got " +
                                loss.value.shape().str());
  }
  if (!loss.requires_grad) return;
  ensure_grad(loss);
  loss.grad.data()[0] += 1.f;

  for (int id = loss_id; id >= 0; --id) {
    Node& n = node(id);
    if (!n.has_grad || n.op == Op::leaf) continue;
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::conv2d: {
        if (requires_grad(n.in0)) {
          Node& x = node(n.in0);
          ensure_grad(x);
          kernels::conv2d_backward_input(g, value(n.in1), n.stride, n.pad, x.grad);
        }
        if (requires_grad(n.in1)) {
          Node& w = node(n.in1);
          ensure_grad(w);
          kernels::conv2d_backward_weight(g, value(n.in0), n.stride, n.pad, w.grad);
        }
        if (requires_grad(n.in2)) {
          Node& b = node(n.in2);
          ensure_grad(b);
          kernels::conv2d_backward_bias(g, b.grad);
        }
        break;
      }
      case Op::pixel_shuffle: {
        if (requires_grad(n.in0)) {
          Tensor gi;
          kernels::pixel_unshuffle(g, n.factor, gi);
          accum_grad(n.in0, gi);
        }
        break;
      }
      case Op::add: {
        if (requires_grad(n.in0)) accum_grad(n.in0, g);
        if (requires_grad(n.in1)) accum_grad(n.in1, g);
        break;
      }
      case Op::relu: {
        if (requires_grad(n.in0)) {
          const Tensor& x = value(n.in0);
          Tensor gi(x.shape());
          const int64_t sz = int64_t(x.size());
#pragma omp parallel for schedule(static)
          for (int64_t i = 0; i < sz; ++i) {
            gi.data()[i] = x.data()[i] > 0.f ? g.data()[i] : 0.f;
          }
          accum_grad(n.in0, gi);
        }
        break;
      }
      case Op::leaky_relu: {
        if (requires_grad(n.in0)) {
          const Tensor& x = value(n.in0);
          Tensor gi(x.shape());
          const float slope = n.fscalar;
          const int64_t sz = int64_t(x.size());
#pragma omp parallel for schedule(static)
          for (int64_t i = 0; i < sz; ++i) {
            gi.data()[i] = x.data()[i] > 0.f ? g.data()[i] : slope * g.data()[i];
          }
          accum_grad(n.in0, gi);
        }
        break;
      }
      case Op::mul_scalar: {
        if (requires_grad(n.in0)) {
          Tensor gi(g.shape());
          const float s = n.fscalar;
          const int64_t sz = int64_t(g.size());
#pragma omp parallel for schedule(static)
          for (int64_t i = 0; i < sz; ++i) gi.data()[i] = g.data()[i] * s;
          accum_grad(n.in0, gi);
        }
        break;
      }
      case Op::dropout: {
        if (requires_grad(n.in0)) {
          Tensor gi(g.shape());
          const int64_t sz = int64_t(g.size());
#pragma omp parallel for schedule(static)
          for (int64_t i = 0; i < sz; ++i) gi.data()[i] = g.data()[i] * n.mask.data()[i];
          accum_grad(n.in0, gi);
        }
        break;
      }
      case Op::linear_map: {
        if (requires_grad(n.in0)) accum_grad(n.in0, n.map->adjoint(g));
        break;
      }
      case Op::tile: {
        if (requires_grad(n.in0)) {
          const Tensor& src = value(n.in0);
          Tensor gi(src.shape());
          const int C = src.c(), sh = src.h(), sw = src.w();
          // Gather per tile element over all of its repetitions.
#pragma omp parallel for schedule(static)
          for (int64_t e = 0; e < int64_t(C) * sh * sw; ++e) {
            const int tx = int(e % sw);
            const int ty = int((e / sw) % sh);
            const int c = int(e / (int64_t(sw) * sh));
            double acc = 0.0;
            for (int b = 0; b < n.tn; ++b) {
              for (int y = ty; y < n.th; y += sh) {
                const float* grow = g.data() + g.index(b, c, y, 0);
                for (int x = tx; x < n.tw; x += sw) acc += grow[x];
              }
            }
            gi.data()[e] = float(acc);
          }
          accum_grad(n.in0, gi);
        }
        break;
      }
      case Op::mse:
      case Op::mae: {
        const Tensor& a = value(n.in0);
        const Tensor& b = value(n.in1);
        const double gs = double(g.data()[0]);
        const double inv_n = 1.0 / double(a.size());
        const bool is_mse = n.op == Op::mse;
        auto side = [&](int input, double sign) {
          if (!requires_grad(input)) return;
          Tensor gi(a.shape());
          const int64_t sz = int64_t(a.size());
#pragma omp parallel for schedule(static)
          for (int64_t i = 0; i < sz; ++i) {
            const double d = double(a.data()[i]) - double(b.data()[i]);
            double v;
            if (is_mse) {
              v = 2.0 * d * inv_n;
            } else {
              v = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * inv_n;
            }
            gi.data()[i] = float(sign * gs * v);
          }
          accum_grad(input, gi);
        };
        side(n.in0, 1.0);
        side(n.in1, -1.0);
        break;
      }
      case Op::leaf:
        break;
    }
  }
  // A requires_grad leaf the sweep never reached has derivative zero, not
  // "no gradient": materialize it so callers can treat all leaves uniformly.
  for (Node& n : nodes_) {
    if (n.op == Op::leaf && n.requires_grad && !n.has_grad) ensure_grad(n);
  }
}

const Tensor& Tape::grad(int id) const {
  const Node& n = node(id);
  if (!n.has_grad) {
    throw std::invalid_argument("grad: node " + std::to_string(id) +
                                " has no gradient (run backward, check requires_grad)");
  }
  return n.grad;
}

double Tape::scalar(int id) const {
  const Node& n = node(id);
  if (!n.is_reduction) {
    throw std::invalid_argument("scalar: node " + std::to_string(id) +
                                " is not a reduction node");
  }
  return n.scalar64;
}

}  // namespace srft

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "srft/rng.hpp"
#include "srft/tensor.hpp"

namespace srft {

/// A linear operator with an exact adjoint: <apply(x), g> == <x, adjoint(g)>
/// up to float rounding. Degradations and fixed resampling layers implement
/// this so they can sit inside a gradient graph without their own node kinds.
class LinearMap {
 public:
  virtual ~LinearMap() = default;
  virtual Shape out_shape(const Shape& in) const = 0;
  virtual Tensor apply(const Tensor& x) const = 0;
  virtual Tensor adjoint(const Tensor& g) const = 0;
  virtual std::string name() const = 0;
};

enum class Op {
  leaf,
  conv2d,
  pixel_shuffle,
  add,
  relu,
  leaky_relu,
  mul_scalar,
  dropout,
  linear_map,
  tile,
  mse,
  mae,
};

/// Single-use computation graph. Node ids are creation-ordered and every op
/// only consumes earlier ids, so reverse id order is a reverse topological
/// order; backward() walks it exactly once. Values are float32 tensors;
/// reduction nodes additionally carry their float64 scalar.
class Tape {
 public:
  struct Node {
    Op op = Op::leaf;
    int in0 = -1, in1 = -1, in2 = -1;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    bool is_reduction = false;
    double scalar64 = 0.0;
    int stride = 1, pad = 0, factor = 1;
    float fscalar = 0.f;
    int tn = 0, th = 0, tw = 0;
    Tensor mask;
    const LinearMap* map = nullptr;
    std::shared_ptr<const LinearMap> owned_map;
  };

  int leaf(Tensor v, bool requires_grad = false);
  int conv2d(int x, int w, int b, int stride, int pad);
  int pixel_shuffle(int x, int s);
  int add(int a, int b);
  int relu(int x);
  int leaky_relu(int x, float slope);
  int mul_scalar(int x, float s);
  /// Inverted dropout; the sampled mask (0 or 1/(1-p)) is kept for backward.
  int dropout(int x, float p, Rng& rng);
  /// Caller guarantees `m` outlives this tape.
  int linear(int x, const LinearMap& m);
  int linear(int x, std::shared_ptr<const LinearMap> m);
  /// Tile a (1,C,th,tw) tensor to (n,C,H,W): out[b,c,y,x] = in[0,c,y%th,x%tw].
  int tile(int x, int n, int h, int w);
  int mse(int pred, int target);
  int mae(int pred, int target);

  /// Reverse sweep from a scalar node; accumulates into .grad of every
  /// requires_grad ancestor. Callable once per tape.
  void backward(int loss_id);

  const Tensor& value(int id) const { return node(id).value; }
  /// Gradient of the last backward() target w.r.t. node `id` (must require grad).
  const Tensor& grad(int id) const;
  /// Float64 value of a reduction node (mse/mae).
  double scalar(int id) const;
  bool requires_grad(int id) const { return node(id).requires_grad; }
  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  const Node& node(int id) const;
  Node& node(int id);
  int push(Node n);
  void ensure_grad(Node& n);
  void accum_grad(int id, const Tensor& g);

  std::vector<Node> nodes_;
};

}  // namespace srft

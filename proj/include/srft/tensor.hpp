#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace srft {

/// Logical shape of a 4-D tensor, always (batch, channels, height, width).
struct Shape {
  int n = 0, c = 0, h = 0, w = 0;

  int64_t numel() const { return int64_t(n) * c * h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense float32 tensor, NCHW row-major. The last axis (width) is contiguous.
/// Heavy arithmetic lives in kernels.hpp / autodiff.hpp; this type only owns
/// storage and indexing.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape s);
  Tensor(int n, int c, int h, int w) : Tensor(Shape{n, c, h, w}) {}

  static Tensor full(Shape s, float v);
  static Tensor from(Shape s, std::vector<float> values);

  const Shape& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  size_t index(int n, int c, int y, int x) const {
    return ((size_t(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  float& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
  float at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

  void fill(float v);
  bool all_finite() const;

  /// Max absolute elementwise difference; shapes must match.
  static double max_abs_diff(const Tensor& a, const Tensor& b);
  /// True when shapes match and every element is bit-identical.
  static bool bit_equal(const Tensor& a, const Tensor& b);

 private:
  Shape shape_{0, 0, 0, 0};
  std::vector<float> data_;
};

/// Throws std::invalid_argument when the shapes differ; `what` names the op.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace srft

#include "srft/tensor.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace srft {

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
         std::to_string(h) + "," + std::to_string(w) + ")";
}

Tensor::Tensor(Shape s) : shape_(s) {
  if (s.n <= 0 || s.c <= 0 || s.h <= 0 || s.w <= 0) {
    throw std::invalid_argument("tensor shape must be positive, got " + s.str());
  }
  data_.assign(size_t(s.numel()), 0.f);
}

Tensor Tensor::full(Shape s, float v) {
  Tensor t(s);
  t.fill(v);
  return t;
}

Tensor Tensor::from(Shape s, std::vector<float> values) {
  Tensor t(s);
  if (values.size() != t.size()) {
    throw std::invalid_argument("tensor data length " + std::to_string(values.size()) +
                                " does not match shape " + s.str());
  }
  t.data_ = std::move(values);
  return t;
}

void Tensor::fill(float v) {
  for (auto& x : data_) x = v;
}

bool Tensor::all_finite() const {
  for (float x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double Tensor::max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(double(a.data()[i]) - double(b.data()[i])));
  }
  return m;
}

bool Tensor::bit_equal(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) return false;
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!(a.shape() == b.shape())) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                a.shape().str() + " vs " + b.shape().str());
  }
}

}  // namespace srft

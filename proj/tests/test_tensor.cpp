#include <limits>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "srft/tensor.hpp"

using srft::Shape;
using srft::Tensor;

TEST_CASE("shape numel and strides") {
  Shape s{2, 3, 4, 5};
  CHECK(s.numel() == 120);
  Tensor t(s);
  CHECK(t.size() == 120);
  t.at(1, 2, 3, 4) = 7.f;
  CHECK(t.data()[t.index(1, 2, 3, 4)] == 7.f);
  CHECK(t.index(1, 2, 3, 4) == 119);
  CHECK(t.index(0, 0, 0, 1) == 1);
  CHECK(t.index(0, 0, 1, 0) == 5);
  CHECK(t.index(0, 1, 0, 0) == 20);
}

TEST_CASE("fresh tensors are zero") {
  Tensor t(1, 2, 3, 3);
  for (size_t i = 0; i < t.size(); ++i) CHECK(t.data()[i] == 0.f);
}

TEST_CASE("fill and full") {
  Tensor t = Tensor::full({1, 1, 2, 2}, 0.5f);
  CHECK(t.at(0, 0, 1, 1) == 0.5f);
  t.fill(-2.f);
  CHECK(t.at(0, 0, 0, 0) == -2.f);
}

TEST_CASE("from initializer data") {
  Tensor t = Tensor::from({1, 1, 2, 2}, {1.f, 2.f, 3.f, 4.f});
  CHECK(t.at(0, 0, 0, 1) == 2.f);
  CHECK(t.at(0, 0, 1, 0) == 3.f);
  CHECK_THROWS_AS(Tensor::from({1, 1, 2, 2}, {1.f}), std::invalid_argument);
}

TEST_CASE("bit_equal and max_abs_diff") {
  Tensor a = Tensor::from({1, 1, 1, 3}, {1.f, 2.f, 3.f});
  Tensor b = a;
  CHECK(Tensor::bit_equal(a, b));
  b.data()[2] = 3.5f;
  CHECK(!Tensor::bit_equal(a, b));
  CHECK(Tensor::max_abs_diff(a, b) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("all_finite flags nan and inf") {
  Tensor t(1, 1, 1, 4);
  CHECK(t.all_finite());
  t.data()[1] = std::numeric_limits<float>::infinity();
  CHECK(!t.all_finite());
  t.data()[1] = 0.f;
  t.data()[3] = std::numeric_limits<float>::quiet_NaN();
  CHECK(!t.all_finite());
}

TEST_CASE("shape mismatch diagnostics name both shapes") {
  Tensor a(1, 1, 2, 2), b(1, 1, 3, 3);
  try {
    srft::require_same_shape(a, b, "op");
    CHECK(false);
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2") != std::string::npos);
    CHECK(msg.find("3") != std::string::npos);
  }
}

#pragma once

#include "srft/tensor.hpp"

/// Serial reference implementations. Deliberately naive and written as direct
/// summations from the operator definitions, with no code shared with the
/// parallel kernels; the tests use them as oracles and the benchmark compares
/// against them.
namespace srft::ref {

/// Direct quadruple-loop convolution, zero padding, float64 accumulation.
Tensor conv2d(const Tensor& in, const Tensor& w, const Tensor& b,
              int stride, int pad);

/// Keys cubic weight, a = -0.5.
double keys_weight(double x);

/// Direct non-separable bicubic resample (center-aligned sampling, replicate
/// borders via index clamping, per-pixel weight normalization). `down` with
/// `antialias` widens the kernel by the scale factor.
Tensor bicubic_resize(const Tensor& in, int scale, bool down, bool antialias);

/// Direct blur: correlation with `k` (single-channel, odd, applied per image
/// channel), replicate borders via index clamping.
Tensor blur(const Tensor& in, const Tensor& k);

}  // namespace srft::ref

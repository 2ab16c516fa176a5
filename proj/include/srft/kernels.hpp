#pragma once

#include "srft/tensor.hpp"

namespace srft::kernels {

/// Thread count for all parallel kernels. No-op when built without OpenMP.
void set_threads(int n);
int max_threads();

/// Every kernel in this namespace computes each output element with a serial
/// float64 accumulation in a fixed term order (or a fixed partial-sum lane
/// pattern combined in a fixed order), then rounds once to float32. Threads
/// only partition output elements, so results are bit-identical for any
/// thread count.

Shape conv2d_out_shape(const Shape& in, const Shape& w, int stride, int pad);

/// out[n,oc,oy,ox] = b[oc] + sum over (ic,ky,kx) of
///   w[oc,ic,ky,kx] * in[n,ic, oy*stride-pad+ky, ox*stride-pad+kx]
/// with zero padding outside the input. Kernel height/width must be odd.
void conv2d_forward(const Tensor& in, const Tensor& w, const Tensor& b,
                    int stride, int pad, Tensor& out);

/// Gradient kernels accumulate (+=) into their destination.
void conv2d_backward_input(const Tensor& gout, const Tensor& w,
                           int stride, int pad, Tensor& gin);
void conv2d_backward_weight(const Tensor& gout, const Tensor& in,
                            int stride, int pad, Tensor& gw);
void conv2d_backward_bias(const Tensor& gout, Tensor& gb);

/// Depth-to-space: out[n, c, y*s+i, x*s+j] = in[n, c*s*s + i*s + j, y, x].
void pixel_shuffle(const Tensor& in, int s, Tensor& out);
/// Exact inverse of pixel_shuffle (space-to-depth).
void pixel_unshuffle(const Tensor& in, int s, Tensor& out);

/// v <- momentum * v + g;  p <- p - lr * v   (classical momentum, elementwise)
void sgd_step(Tensor& p, const Tensor& g, Tensor& v, float lr, float momentum);

}  // namespace srft::kernels

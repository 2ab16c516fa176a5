#pragma once

#include <string>
#include <vector>

#include "srft/autodiff.hpp"
#include "srft/rng.hpp"
#include "srft/tensor.hpp"

namespace srft {

/// Center-aligned separable Keys bicubic resample (a = -0.5). Downsampling
/// requires spatial dims divisible by `scale` and widens the kernel by the
/// scale factor when `antialias` is set; borders replicate; per-pixel weight
/// normalization makes constants exact. scale 1 is the identity.
Tensor bicubic_resize(const Tensor& in, int scale, bool down, bool antialias = true);

/// Exact transpose of bicubic_resize with identical tap tables.
Tensor bicubic_resize_adjoint(const Tensor& g, int scale, bool down, bool antialias = true);

/// Correlation with a (1,1,k,k) kernel applied per channel, replicate borders.
Tensor blur_apply(const Tensor& in, const Tensor& kernel);

/// Exact transpose of blur_apply (border replication folds back).
Tensor blur_adjoint(const Tensor& g, const Tensor& kernel);

enum class KernelKind { gaussian, disk, explicit_values };

/// Parametric blur kernel. Realization samples the continuous profile on an
/// odd support grid and normalizes to sum 1.
struct KernelSpec {
  KernelKind kind = KernelKind::gaussian;
  double sigma_x = 1.0, sigma_y = 1.0, theta = 0.0;  // gaussian (theta radians)
  double radius = 1.0;                               // disk
  int support = 3;
  std::vector<float> values;                         // explicit_values, support^2

  static KernelSpec gaussian(double sigma_x, double sigma_y, double theta, int support);
  static KernelSpec isotropic_gaussian(double sigma, int support);
  static KernelSpec disk(double radius);
  static KernelSpec disk(double radius, int support);
  static KernelSpec explicit_kernel(int support, std::vector<float> values);

  /// (1,1,support,support) tensor, sum exactly normalized to 1.
  Tensor realize() const;
};

/// sigma_x, sigma_y ~ U[0.35s, 1.25s], theta ~ U[0, pi),
/// support = 2*ceil(3*max sigma)+1. Draw order: sigma_x, sigma_y, theta.
KernelSpec random_gaussian_spec(Rng& rng, int scale);

/// Gaussian: sigmas scaled by independent U[1-rel, 1+rel], theta jittered by
/// U[-rel*pi/8, rel*pi/8], support recomputed. Disk: radius scaled the same
/// way. Explicit kernels return unchanged (no rng draws consumed). rel = 0
/// leaves the spec unchanged.
KernelSpec perturb_kernel(const KernelSpec& spec, double rel, Rng& rng);

struct DegradationStage {
  enum class Kind { blur, bicubic_down, identity };
  Kind kind = Kind::identity;
  KernelSpec kernel;   // blur
  Tensor realized;     // blur, cached at construction
  int scale = 1;       // bicubic_down
  bool antialias = true;
};

/// Ordered composition of degradation stages; a LinearMap so it can sit in a
/// gradient graph directly. Copyable value type.
class DegradationSpec final : public LinearMap {
 public:
  DegradationSpec() = default;  // identity

  static DegradationSpec identity();
  static DegradationSpec bicubic_down(int scale, bool antialias = true);
  static DegradationSpec blur_then_down(const KernelSpec& k, int scale,
                                        bool antialias = true);

  DegradationSpec& add_blur(const KernelSpec& k);
  DegradationSpec& add_bicubic_down(int scale, bool antialias = true);
  DegradationSpec& add_identity();

  /// Product of all downsampling factors.
  int total_scale() const;
  const std::vector<DegradationStage>& stages() const { return stages_; }

  Shape out_shape(const Shape& in) const override;
  Tensor apply(const Tensor& x) const override;
  Tensor adjoint(const Tensor& g) const override;
  std::string name() const override;

 private:
  std::vector<DegradationStage> stages_;
};

/// Fixed bicubic resampling layer as a LinearMap (model skips, tail interps).
class ResizeOp final : public LinearMap {
 public:
  ResizeOp(int scale, bool down, bool antialias = true)
      : scale_(scale), down_(down), antialias_(antialias) {}
  Shape out_shape(const Shape& in) const override;
  Tensor apply(const Tensor& x) const override { return bicubic_resize(x, scale_, down_, antialias_); }
  Tensor adjoint(const Tensor& g) const override { return bicubic_resize_adjoint(g, scale_, down_, antialias_); }
  std::string name() const override;

 private:
  int scale_;
  bool down_;
  bool antialias_;
};

}  // namespace srft

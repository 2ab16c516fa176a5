#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "srft/degradation.hpp"
#include "srft/finetune.hpp"
#include "srft/model.hpp"

namespace srft {

/// Mean squared error in float64, all channels jointly.
double mse(const Tensor& a, const Tensor& b);

/// 10*log10(peak^2 / mse), capped at 99 dB (also for exact equality).
/// Symmetric in its arguments; no border crop.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

/// Per-pixel unbiased variance over `passes` stochastic forward passes with
/// the model's dropout active, averaged over channels -> (1,1,H,W).
/// dropout_p = 0 gives an exactly zero map.
Tensor uncertainty_map(const Model& m, const Tensor& input, int passes, Rng& rng);

/// Min-max normalize and invert: high variance maps to dark. A constant map
/// renders all white.
Tensor render_variance(const Tensor& var);

struct EvalRecord {
  std::string image;
  double psnr_start = 0.0, psnr_end = 0.0;
  double lr_psnr_start = 0.0, lr_psnr_end = 0.0;
  int iterations = 0;
  double wall_seconds = 0.0;
  std::string stop_reason;
  std::string error;  // non-empty when this image failed; other rows continue
};

/// For each HR image: degrade with a_test, score the unadapted model,
/// fine-tune on the degraded image alone, score again.
std::vector<EvalRecord> run_benchmark(const Model& m,
                                      const std::vector<std::pair<std::string, Tensor>>& hr_images,
                                      const DegradationSpec& a_test,
                                      const FinetuneConfig& cfg);

/// Mean over the non-error rows, image name "average".
EvalRecord average_record(const std::vector<EvalRecord>& rows);

/// CSV with a ps column that is always "n/a" (perceptual score not
/// implemented). wall_seconds is a measurement and not reproducible.
void write_eval_csv(const std::vector<EvalRecord>& rows, std::ostream& os);

/// Aligned text table with the same columns and a header note.
std::string format_eval_table(const std::vector<EvalRecord>& rows);

}  // namespace srft

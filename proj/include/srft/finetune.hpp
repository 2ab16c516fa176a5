#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "srft/degradation.hpp"
#include "srft/model.hpp"

namespace srft {

/// Classical momentum state; one velocity tensor per parameter, lazily
/// zero-initialized to the parameter's shape.
struct OptimState {
  float lr = 0.01f;
  float momentum = 0.9f;
  std::map<std::string, Tensor> velocity;
};

/// One update for every named gradient. Parameters without a gradient entry
/// are left untouched.
void sgd_step(Model& m, const std::map<std::string, Tensor>& grads, OptimState& opt);

enum class Monitor { lr_psnr, custom_scalar };

struct FinetuneConfig {
  float lr = 0.01f;
  float momentum = 0.9f;
  int max_iters = 4000;
  /// Early stop: no monitor improvement beyond this (dB for lr_psnr) within
  /// `patience` consecutive iterations.
  double plateau_delta_db = 0.04;
  int patience = 50;
  Monitor monitor = Monitor::lr_psnr;
  /// Higher is better; required when monitor == custom_scalar. Receives the
  /// current model and its SR output for the fine-tuning input.
  std::function<double(const Model&, const Tensor& sr)> custom_monitor;
};

struct TraceRecord {
  int iter = 0;
  double loss = 0.0;        // data-fidelity mse, float64
  double lr_psnr_db = 0.0;  // -10*log10(loss) against peak 1, capped at 99
};

enum class StopReason { max_iters, plateau, already_consistent, non_finite };
std::string stop_reason_name(StopReason r);

struct FinetuneResult {
  Model model;  // parameters with the best monitor value seen
  std::vector<TraceRecord> trace;
  StopReason stop_reason = StopReason::max_iters;
  int best_iter = 0;
  double best_monitor = 0.0;
};

/// Self-supervised adaptation: minimize mse(a_test(f(y)), y) over the model
/// parameters with SGD + momentum, full image, one iteration per record.
/// vsr inputs are pre-interpolated by a_test's total scale internally. The
/// trace rows are measured before each update; a non-finite loss aborts with
/// the best snapshot so far.
FinetuneResult finetune(const Model& m, const Tensor& y,
                        const DegradationSpec& a_test, const FinetuneConfig& cfg);

/// `iter,loss,lr_psnr_db` rows plus a trailing `# stop_reason=<reason>` line.
void write_trace_csv(const std::vector<TraceRecord>& trace, StopReason reason,
                     std::ostream& os);
void save_trace_csv(const std::vector<TraceRecord>& trace, StopReason reason,
                    const std::string& path);

}  // namespace srft

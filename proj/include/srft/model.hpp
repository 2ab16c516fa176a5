#pragma once

#include <string>
#include <utility>
#include <vector>

#include "srft/autodiff.hpp"
#include "srft/rng.hpp"
#include "srft/tensor.hpp"

namespace srft {

/// edsr_style: learnable sub-pixel (pixel shuffle) tail, input at LR.
/// enet_style: fixed bicubic feature upsampling between tail convs, input at LR.
/// vsr_style:  input pre-interpolated to HR, size-preserving network.
enum class Family { edsr_style, enet_style, vsr_style };

std::string family_name(Family f);
Family family_from_name(const std::string& s);

struct ModelSpec {
  Family family = Family::edsr_style;
  int train_scale = 4;
  int trunk_blocks = 4;
  int width = 16;
  int channels = 3;
  float dropout_p = 0.f;
  /// Per-tail-module upsampling factor (edsr/enet); empty for vsr.
  std::vector<int> tail;

  static ModelSpec make(Family family, int scale, int trunk_blocks = 4, int width = 16);
  std::string serialize() const;
  static ModelSpec parse(const std::string& text);
  bool operator==(const ModelSpec&) const = default;
};

/// Parameter container plus architecture description. Parameters are ordered;
/// creation order is also the rng draw order at init, so identical seeds give
/// identical models.
class Model {
 public:
  Model() = default;

  static Model build(const ModelSpec& spec, Rng& rng);

  const ModelSpec& spec() const { return spec_; }
  /// Spatial factor from network input to output (1 for vsr).
  int effective_scale() const;

  const std::vector<std::string>& param_names() const { return names_; }
  bool has_param(const std::string& name) const;
  Tensor& param(const std::string& name);
  const Tensor& param(const std::string& name) const;
  int64_t param_count() const;

  /// Copy with a different dropout probability (same parameters).
  Model with_dropout(float p) const;

  // Used by the loader and surgery; appends in order.
  void set_spec(const ModelSpec& s) { spec_ = s; }
  void add_param(const std::string& name, Tensor t);
  void replace_param(const std::string& name, Tensor t);
  void remove_param(const std::string& name);

 private:
  ModelSpec spec_;
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

struct ModelGraph {
  std::vector<std::pair<std::string, int>> params;  // name -> tape leaf id
  int input = -1;
  int output = -1;
};

/// Builds the forward graph on `tape`. With a non-null `dropout_rng` and
/// spec.dropout_p > 0, a dropout node follows each block's skip-add; the
/// usual inference path passes nullptr.
ModelGraph forward_graph(const Model& m, Tape& tape, int input_id,
                         bool params_require_grad, Rng* dropout_rng);

Tensor forward(const Model& m, const Tensor& input, Rng* dropout_rng = nullptr);

struct SurgeryReport {
  bool degraded_start = false;
  std::vector<std::string> dropped;
  std::vector<std::string> added;
};

/// Adapt a x4-trained model to new_scale in {2,3}. edsr drops or replaces
/// sub-pixel tail modules (x3 needs a fresh module: degraded starting point);
/// enet only rewrites its parameter-free interpolation factors; vsr is
/// unchanged. All surviving parameters are preserved bit-for-bit.
Model scale_surgery(const Model& m, int new_scale, Rng& rng,
                    SurgeryReport* report = nullptr);

/// Plant a visible periodic artifact: the sub-pixel output bias becomes a
/// zero-mean dot pattern with peak amplitude eps on a period x period cell
/// (one jittered dot per channel), and the final output conv weight is scaled
/// by a fixed gain. eps = 0 returns the model unchanged.
Model inject_artifact(const Model& m, float eps, int period, Rng& rng);

}  // namespace srft

#pragma once

#include <vector>

#include "srft/degradation.hpp"
#include "srft/finetune.hpp"
#include "srft/model.hpp"
#include "srft/rng.hpp"

namespace srft {

struct PairSample {
  Tensor x;  // HR patch
  Tensor y;  // degraded counterpart, y = a_train(x) exactly
};

struct PairDataset {
  std::vector<PairSample> pairs;
};

/// Random HR crops paired with their degraded versions. Patch dims must be
/// divisible by the degradation's total scale; images smaller than the patch
/// are skipped with a stderr warning, and zero usable images is an error.
PairDataset synthesize_pairs(const std::vector<Tensor>& hr_images,
                             const DegradationSpec& a_train, int patch_size,
                             int count, Rng& rng);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  float lr = 0.05f;
  float momentum = 0.9f;
  enum class Loss { mae, mse } loss = Loss::mae;
};

struct TrainStats {
  std::vector<double> epoch_loss;  // mean minibatch loss per epoch
};

/// Supervised pretraining with SGD + momentum over shuffled minibatches.
/// vsr models receive bicubic-upsampled inputs. A non-finite loss aborts
/// with a diagnostic.
TrainStats train(Model& m, const PairDataset& data, const TrainConfig& cfg, Rng& rng);

/// Procedural training image: smooth multi-octave value noise with randomly
/// placed hard-edged shapes (rectangles, disks, stripes), RGB in [0,1].
Tensor synth_image(int h, int w, Rng& rng);

/// `count` square images of side `size`, one derived rng stream per image.
std::vector<Tensor> synth_corpus(int count, int size, uint64_t seed);

}  // namespace srft

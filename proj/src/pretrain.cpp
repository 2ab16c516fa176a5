#include "srft/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "srft/autodiff.hpp"

namespace srft {

PairDataset synthesize_pairs(const std::vector<Tensor>& hr_images,
                             const DegradationSpec& a_train, int patch_size,
                             int count, Rng& rng) {
  const int scale = a_train.total_scale();
  if (patch_size < 4 * scale || patch_size % scale != 0) {
    throw std::invalid_argument("synthesize_pairs: patch size " +
                                std::to_string(patch_size) +
                                " must be a multiple of the scale " +
                                std::to_string(scale) + " and at least 4x it");
  }
  if (count < 1) throw std::invalid_argument("synthesize_pairs: count must be >= 1");
  std::vector<const Tensor*> usable;
  for (const Tensor& img : hr_images) {
    if (img.h() >= patch_size && img.w() >= patch_size) {
      usable.push_back(&img);
    } else {
      std::cerr << "warning: skipping image " << img.shape().str()
                << " smaller than patch " << patch_size << "\n";
    }
  }
  if (usable.empty()) {
    throw std::invalid_argument("synthesize_pairs: no image is at least " +
                                std::to_string(patch_size) + "x" +
                                std::to_string(patch_size));
  }
  PairDataset ds;
  ds.pairs.reserve(count);
  for (int i = 0; i < count; ++i) {
    const Tensor& img = *usable[rng.uniform_int(usable.size())];
    const int y0 = int(rng.uniform_int(uint64_t(img.h() - patch_size + 1)));
    const int x0 = int(rng.uniform_int(uint64_t(img.w() - patch_size + 1)));
    Tensor x(1, img.c(), patch_size, patch_size);
    for (int c = 0; c < img.c(); ++c)
      for (int y = 0; y < patch_size; ++y)
        for (int xx = 0; xx < patch_size; ++xx)
          x.at(0, c, y, xx) = img.at(0, c, y0 + y, x0 + xx);
    Tensor y = a_train.apply(x);
    ds.pairs.push_back(PairSample{std::move(x), std::move(y)});
  }
  return ds;
}

namespace {

Tensor stack_batch(const PairDataset& data, const std::vector<int>& idx,
                   size_t lo, size_t hi, bool hr) {
  const Tensor& first = hr ? data.pairs[idx[lo]].x : data.pairs[idx[lo]].y;
  Tensor out(int(hi - lo), first.c(), first.h(), first.w());
  for (size_t i = lo; i < hi; ++i) {
    const Tensor& t = hr ? data.pairs[idx[i]].x : data.pairs[idx[i]].y;
    require_same_shape(t, first, "train batch");
    std::copy(t.data(), t.data() + t.size(),
              out.data() + (i - lo) * t.size());
  }
  return out;
}

}  // namespace

TrainStats train(Model& m, const PairDataset& data, const TrainConfig& cfg, Rng& rng) {
  if (data.pairs.empty()) throw std::invalid_argument("train: empty dataset");
  if (cfg.epochs < 1 || cfg.batch_size < 1) {
    throw std::invalid_argument("train: epochs and batch_size must be >= 1");
  }
  if (!(cfg.lr > 0.f)) throw std::invalid_argument("train: lr must be positive");
  const int scale = data.pairs[0].x.h() / data.pairs[0].y.h();
  const bool vsr = m.spec().family == Family::vsr_style;
  if (!vsr && m.effective_scale() != scale) {
    throw std::invalid_argument("train: dataset scale " + std::to_string(scale) +
                                " does not match model scale " +
                                std::to_string(m.effective_scale()));
  }

  TrainStats stats;
  OptimState opt{cfg.lr, cfg.momentum, {}};
  std::vector<int> perm(data.pairs.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = int(i);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with our own rng keeps the order platform-stable.
    for (size_t i = perm.size() - 1; i > 0; --i) {
      std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
    }
    double loss_sum = 0.0;
    int batches = 0;
    for (size_t lo = 0; lo < perm.size(); lo += cfg.batch_size) {
      const size_t hi = std::min(perm.size(), lo + cfg.batch_size);
      Tensor hr = stack_batch(data, perm, lo, hi, /*hr=*/true);
      Tensor lr = stack_batch(data, perm, lo, hi, /*hr=*/false);
      const Tensor input = vsr ? bicubic_resize(lr, scale, /*down=*/false) : lr;

      Tape tape;
      const int in_id = tape.leaf(input, false);
      const int target = tape.leaf(hr, false);
      ModelGraph g = forward_graph(m, tape, in_id, /*params_require_grad=*/true, nullptr);
      const int loss_id = cfg.loss == TrainConfig::Loss::mae
                              ? tape.mae(g.output, target)
                              : tape.mse(g.output, target);
      const double loss = tape.scalar(loss_id);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("train: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(batches) +
                                 " (lower the learning rate)");
      }
      tape.backward(loss_id);
      std::map<std::string, Tensor> grads;
      for (const auto& [name, id] : g.params) grads.emplace(name, tape.grad(id));
      sgd_step(m, grads, opt);
      loss_sum += loss;
      ++batches;
    }
    stats.epoch_loss.push_back(loss_sum / batches);
  }
  return stats;
}

namespace {

/// Bilinearly upsampled grid of uniform draws, values in [0,1].
void add_value_noise(std::vector<double>& field, int h, int w, int grid,
                     double amp, Rng& rng) {
  std::vector<double> g((grid + 1) * (grid + 1));
  for (auto& v : g) v = rng.uniform();
  for (int y = 0; y < h; ++y) {
    const double gy = double(y) / h * grid;
    const int y0 = int(gy);
    const double fy = gy - y0;
    for (int x = 0; x < w; ++x) {
      const double gx = double(x) / w * grid;
      const int x0 = int(gx);
      const double fx = gx - x0;
      const double v00 = g[y0 * (grid + 1) + x0];
      const double v01 = g[y0 * (grid + 1) + x0 + 1];
      const double v10 = g[(y0 + 1) * (grid + 1) + x0];
      const double v11 = g[(y0 + 1) * (grid + 1) + x0 + 1];
      field[size_t(y) * w + x] +=
          amp * ((1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11));
    }
  }
}

}  // namespace

Tensor synth_image(int h, int w, Rng& rng) {
  if (h < 8 || w < 8) throw std::invalid_argument("synth_image: dims must be >= 8");
  std::vector<double> lum(size_t(h) * w, 0.0);
  add_value_noise(lum, h, w, 5, 0.5, rng);
  add_value_noise(lum, h, w, 11, 0.3, rng);
  add_value_noise(lum, h, w, 23, 0.2, rng);

  Tensor img(1, 3, h, w);
  for (int c = 0; c < 3; ++c) {
    std::vector<double> chroma(size_t(h) * w, 0.0);
    add_value_noise(chroma, h, w, 3, 1.0, rng);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double v = 0.15 + 0.6 * lum[size_t(y) * w + x] +
                         0.25 * (chroma[size_t(y) * w + x] - 0.5);
        img.at(0, c, y, x) = float(std::clamp(v, 0.0, 1.0));
      }
  }

  // Hard-edged shapes give the degradations something sharp to destroy.
  const int nshapes = 5 + int(rng.uniform_int(5));
  for (int s = 0; s < nshapes; ++s) {
    const int kind = int(rng.uniform_int(3));
    float col[3];
    for (float& v : col) v = float(rng.uniform());
    const double alpha = rng.uniform(0.6, 1.0);
    const double cy = rng.uniform() * h;
    const double cx = rng.uniform() * w;
    if (kind == 0) {
      const double hh = rng.uniform(0.08, 0.3) * h;
      const double hw = rng.uniform(0.08, 0.3) * w;
      for (int y = std::max(0, int(cy - hh)); y < std::min(h, int(cy + hh)); ++y)
        for (int x = std::max(0, int(cx - hw)); x < std::min(w, int(cx + hw)); ++x)
          for (int c = 0; c < 3; ++c)
            img.at(0, c, y, x) = float((1 - alpha) * img.at(0, c, y, x) + alpha * col[c]);
    } else if (kind == 1) {
      const double r = rng.uniform(0.06, 0.22) * std::min(h, w);
      const double r2 = r * r;
      for (int y = std::max(0, int(cy - r)); y < std::min(h, int(cy + r + 1)); ++y)
        for (int x = std::max(0, int(cx - r)); x < std::min(w, int(cx + r + 1)); ++x) {
          if ((y - cy) * (y - cy) + (x - cx) * (x - cx) > r2) continue;
          for (int c = 0; c < 3; ++c)
            img.at(0, c, y, x) = float((1 - alpha) * img.at(0, c, y, x) + alpha * col[c]);
        }
    } else {
      const double ang = rng.uniform(0.0, 3.14159265358979323846);
      const double nx = std::cos(ang), ny = std::sin(ang);
      const double off = nx * cx + ny * cy;
      const double half = rng.uniform(1.0, 3.5);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          if (std::abs(nx * x + ny * y - off) > half) continue;
          for (int c = 0; c < 3; ++c)
            img.at(0, c, y, x) = float((1 - alpha) * img.at(0, c, y, x) + alpha * col[c]);
        }
    }
  }
  return img;
}

std::vector<Tensor> synth_corpus(int count, int size, uint64_t seed) {
  if (count < 1) throw std::invalid_argument("synth_corpus: count must be >= 1");
  Rng root(seed);
  std::vector<Tensor> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Rng sub = root.fork(uint64_t(i));
    out.push_back(synth_image(size, size, sub));
  }
  return out;
}

}  // namespace srft

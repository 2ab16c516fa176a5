#include "srft/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "srft/degradation.hpp"

namespace srft {

namespace {

/// Output conv init scale. Kept at the plain fan-in bound: shrinking it
/// (an earlier 0.1 draft) throttles every trunk gradient through the output
/// conv and stalls pretraining at the interpolation baseline.
constexpr float kOutputInitScale = 1.f;
/// inject_artifact's gain on the output conv weight and the dot peak as a
/// fraction of eps. The pair is sized together against the amplitude bound:
/// max output movement (dot peak stacked on the gain's strongest conv-path
/// pixel) must stay within 1.5*eps, while the gain stays large enough that
/// the injected model carries a clear MC-dropout variance signature
/// (~(1.2)^2 = 1.44x) for fine-tuning to undo.
constexpr float kArtifactGain = 1.2f;
constexpr float kDotPeak = 0.75f;

Tensor init_conv_weight(int oc, int ic, int kh, int kw, Rng& rng, float scale = 1.f) {
  Tensor t(oc, ic, kh, kw);
  const double bound = 1.0 / std::sqrt(double(ic) * kh * kw);
  for (size_t i = 0; i < t.size(); ++i) {
    t.data()[i] = float(rng.uniform(-bound, bound)) * scale;
  }
  return t;
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::edsr_style: return "edsr_style";
    case Family::enet_style: return "enet_style";
    case Family::vsr_style: return "vsr_style";
  }
  throw std::invalid_argument("family_name: bad enum value");
}

Family family_from_name(const std::string& s) {
  if (s == "edsr_style") return Family::edsr_style;
  if (s == "enet_style") return Family::enet_style;
  if (s == "vsr_style") return Family::vsr_style;
  throw std::invalid_argument("unknown model family '" + s +
                              "' (expected edsr_style, enet_style or vsr_style)");
}

ModelSpec ModelSpec::make(Family family, int scale, int trunk_blocks, int width) {
  if (scale < 2 || scale > 4) {
    throw std::invalid_argument("model scale must be in {2,3,4}, got " +
                                std::to_string(scale));
  }
  if (trunk_blocks < 1 || width < 1) {
    throw std::invalid_argument("model: trunk_blocks and width must be positive");
  }
  ModelSpec s;
  s.family = family;
  s.train_scale = scale;
  s.trunk_blocks = trunk_blocks;
  s.width = width;
  if (family != Family::vsr_style) {
    s.tail = (scale == 4) ? std::vector<int>{2, 2} : std::vector<int>{scale};
  }
  return s;
}

std::string ModelSpec::serialize() const {
  std::ostringstream os;
  os << "family=" << family_name(family) << " train_scale=" << train_scale
     << " trunk_blocks=" << trunk_blocks << " width=" << width
     << " channels=" << channels;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", double(dropout_p));
  os << " dropout_p=" << buf << " tail=";
  if (tail.empty()) {
    os << "-";
  } else {
    for (size_t i = 0; i < tail.size(); ++i) os << (i ? "," : "") << tail[i];
  }
  return os.str();
}

ModelSpec ModelSpec::parse(const std::string& text) {
  ModelSpec s;
  s.tail.clear();
  std::istringstream is(text);
  std::string tok;
  bool saw_family = false, saw_tail = false;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("model spec: bad token '" + tok + "'");
    }
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    if (key == "family") {
      s.family = family_from_name(val);
      saw_family = true;
    } else if (key == "train_scale") {
      s.train_scale = std::stoi(val);
    } else if (key == "trunk_blocks") {
      s.trunk_blocks = std::stoi(val);
    } else if (key == "width") {
      s.width = std::stoi(val);
    } else if (key == "channels") {
      s.channels = std::stoi(val);
    } else if (key == "dropout_p") {
      s.dropout_p = std::stof(val);
    } else if (key == "tail") {
      saw_tail = true;
      if (val != "-") {
        std::istringstream ts(val);
        std::string part;
        while (std::getline(ts, part, ',')) s.tail.push_back(std::stoi(part));
      }
    } else {
      throw std::invalid_argument("model spec: unknown key '" + key + "'");
    }
  }
  if (!saw_family || !saw_tail) {
    throw std::invalid_argument("model spec: missing family or tail in '" + text + "'");
  }
  return s;
}

int Model::effective_scale() const {
  if (spec_.family == Family::vsr_style) return 1;
  int s = 1;
  for (int f : spec_.tail) s *= f;
  return s;
}

bool Model::has_param(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

Tensor& Model::param(const std::string& name) {
  for (size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return tensors_[i];
  }
  throw std::invalid_argument("model has no parameter '" + name + "'");
}

const Tensor& Model::param(const std::string& name) const {
  return const_cast<Model*>(this)->param(name);
}

int64_t Model::param_count() const {
  int64_t n = 0;
  for (const auto& t : tensors_) n += int64_t(t.size());
  return n;
}

Model Model::with_dropout(float p) const {
  if (p < 0.f || p >= 1.f) {
    throw std::invalid_argument("dropout_p must be in [0,1), got " + std::to_string(p));
  }
  Model m = *this;
  m.spec_.dropout_p = p;
  return m;
}

void Model::add_param(const std::string& name, Tensor t) {
  if (has_param(name)) {
    throw std::invalid_argument("duplicate model parameter '" + name + "'");
  }
  names_.push_back(name);
  tensors_.push_back(std::move(t));
}

void Model::replace_param(const std::string& name, Tensor t) {
  param(name) = std::move(t);
}

void Model::remove_param(const std::string& name) {
  for (size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) {
      names_.erase(names_.begin() + i);
      tensors_.erase(tensors_.begin() + i);
      return;
    }
  }
  throw std::invalid_argument("model has no parameter '" + name + "'");
}

Model Model::build(const ModelSpec& spec, Rng& rng) {
  if (spec.family != Family::vsr_style && spec.tail.empty()) {
    throw std::invalid_argument("model spec: " + family_name(spec.family) +
                                " requires tail factors");
  }
  for (int f : spec.tail) {
    if (f < 1 || f > 4) {
      throw std::invalid_argument("model spec: tail factor " + std::to_string(f) +
                                  " out of range");
    }
  }
  Model m;
  m.spec_ = spec;
  const int W = spec.width, C = spec.channels;
  m.add_param("head.w", init_conv_weight(W, C, 3, 3, rng));
  m.add_param("head.b", Tensor(1, W, 1, 1));
  for (int i = 0; i < spec.trunk_blocks; ++i) {
    const std::string p = "block" + std::to_string(i);
    m.add_param(p + ".conv1.w", init_conv_weight(W, W, 3, 3, rng));
    m.add_param(p + ".conv1.b", Tensor(1, W, 1, 1));
    m.add_param(p + ".conv2.w", init_conv_weight(W, W, 3, 3, rng));
    m.add_param(p + ".conv2.b", Tensor(1, W, 1, 1));
  }
  for (size_t i = 0; i < spec.tail.size(); ++i) {
    const std::string p = "tail" + std::to_string(i);
    const int f = spec.tail[i];
    if (spec.family == Family::edsr_style) {
      m.add_param(p + ".w", init_conv_weight(W * f * f, W, 3, 3, rng));
      m.add_param(p + ".b", Tensor(1, W * f * f, 1, 1));
    } else {
      m.add_param(p + ".w", init_conv_weight(W, W, 3, 3, rng));
      m.add_param(p + ".b", Tensor(1, W, 1, 1));
    }
  }
  m.add_param("out.w", init_conv_weight(C, W, 3, 3, rng, kOutputInitScale));
  m.add_param("out.b", Tensor(1, C, 1, 1));
  m.add_param("out.bias_tile", Tensor(1, C, spec.train_scale, spec.train_scale));
  return m;
}

ModelGraph forward_graph(const Model& m, Tape& tape, int input_id,
                         bool params_require_grad, Rng* dropout_rng) {
  const ModelSpec& spec = m.spec();
  const Tensor& input = tape.value(input_id);
  if (input.c() != spec.channels) {
    throw std::invalid_argument("model forward: input " + input.shape().str() +
                                " must have " + std::to_string(spec.channels) +
                                " channels");
  }

  ModelGraph g;
  g.input = input_id;
  auto leaf_of = [&](const std::string& name) {
    for (const auto& [n, id] : g.params) {
      if (n == name) return id;
    }
    throw std::invalid_argument("forward_graph: missing leaf for '" + name + "'");
  };
  for (const std::string& name : m.param_names()) {
    g.params.emplace_back(name, tape.leaf(m.param(name), params_require_grad));
  }

  const bool use_dropout = dropout_rng != nullptr && spec.dropout_p > 0.f;
  int h0 = tape.conv2d(input_id, leaf_of("head.w"), leaf_of("head.b"), 1, 1);
  int h = h0;
  for (int i = 0; i < spec.trunk_blocks; ++i) {
    const std::string p = "block" + std::to_string(i);
    int t = tape.conv2d(h, leaf_of(p + ".conv1.w"), leaf_of(p + ".conv1.b"), 1, 1);
    t = tape.relu(t);
    t = tape.conv2d(t, leaf_of(p + ".conv2.w"), leaf_of(p + ".conv2.b"), 1, 1);
    h = tape.add(h, t);
    if (use_dropout) h = tape.dropout(h, spec.dropout_p, *dropout_rng);
  }
  h = tape.add(h, h0);

  for (size_t i = 0; i < spec.tail.size(); ++i) {
    const std::string p = "tail" + std::to_string(i);
    const int f = spec.tail[i];
    if (spec.family == Family::edsr_style) {
      h = tape.conv2d(h, leaf_of(p + ".w"), leaf_of(p + ".b"), 1, 1);
      h = tape.pixel_shuffle(h, f);
    } else {
      if (f > 1) h = tape.linear(h, std::make_shared<ResizeOp>(f, /*down=*/false));
      h = tape.conv2d(h, leaf_of(p + ".w"), leaf_of(p + ".b"), 1, 1);
      h = tape.relu(h);
    }
  }

  int out = tape.conv2d(h, leaf_of("out.w"), leaf_of("out.b"), 1, 1);
  const Shape os = tape.value(out).shape();
  int bias = tape.tile(leaf_of("out.bias_tile"), os.n, os.h, os.w);
  out = tape.add(out, bias);

  int skip;
  if (spec.family == Family::vsr_style) {
    skip = input_id;
  } else {
    const int S = m.effective_scale();
    skip = (S == 1) ? input_id
                    : tape.linear(input_id, std::make_shared<ResizeOp>(S, /*down=*/false));
  }
  g.output = tape.add(out, skip);
  return g;
}

Tensor forward(const Model& m, const Tensor& input, Rng* dropout_rng) {
  Tape tape;
  const int in = tape.leaf(input, false);
  ModelGraph g = forward_graph(m, tape, in, /*params_require_grad=*/false, dropout_rng);
  return tape.value(g.output);
}

Model scale_surgery(const Model& m, int new_scale, Rng& rng, SurgeryReport* report) {
  if (new_scale != 2 && new_scale != 3) {
    throw std::invalid_argument("scale_surgery: target scale must be 2 or 3, got " +
                                std::to_string(new_scale));
  }
  const ModelSpec& spec = m.spec();
  if (spec.train_scale != 4) {
    throw std::invalid_argument("scale_surgery: expected a x4 model, got x" +
                                std::to_string(spec.train_scale));
  }
  SurgeryReport local;
  SurgeryReport& rep = report ? *report : local;
  rep = SurgeryReport{};

  Model out;
  ModelSpec ns = spec;
  ns.train_scale = new_scale;

  if (spec.family == Family::vsr_style) {
    out = m;
    out.set_spec(ns);
    return out;
  }

  if (spec.tail != std::vector<int>{2, 2}) {
    throw std::invalid_argument("scale_surgery: expected tail factors 2,2 on a x4 " +
                                family_name(spec.family) + " model");
  }

  if (spec.family == Family::enet_style) {
    // Interpolation factors are parameter-free; no weights are touched.
    ns.tail = (new_scale == 2) ? std::vector<int>{2, 1} : std::vector<int>{3, 1};
    out = m;
    out.set_spec(ns);
    return out;
  }

  // edsr_style: drop the second x2 sub-pixel module for x2; replace both with
  // one freshly initialized x3 module for x3 (degraded starting point).
  ns.tail = std::vector<int>{new_scale};
  out.set_spec(ns);
  const bool fresh = new_scale == 3;
  for (const std::string& name : m.param_names()) {
    const bool is_tail0 = name.rfind("tail0.", 0) == 0;
    const bool is_tail1 = name.rfind("tail1.", 0) == 0;
    if (is_tail1 || (fresh && is_tail0)) {
      rep.dropped.push_back(name);
      continue;
    }
    if (fresh && name == "out.w") {
      // Fresh module goes in tail0's canonical slot, before out.*.
      const int W = spec.width;
      out.add_param("tail0.w", init_conv_weight(W * 9, W, 3, 3, rng));
      out.add_param("tail0.b", Tensor(1, W * 9, 1, 1));
      rep.added.push_back("tail0.w");
      rep.added.push_back("tail0.b");
      rep.degraded_start = true;
    }
    out.add_param(name, m.param(name));
  }
  return out;
}

Model inject_artifact(const Model& m, float eps, int period, Rng& rng) {
  if (eps < 0.f) throw std::invalid_argument("inject_artifact: eps must be >= 0");
  if (eps == 0.f) return m;
  if (period < 2 || period > 16) {
    throw std::invalid_argument("inject_artifact: period must be in [2,16], got " +
                                std::to_string(period));
  }
  Model out = m;
  const int C = m.spec().channels;
  const Tensor& learned = m.param("out.bias_tile");
  Tensor tile(1, C, period, period);
  // Soft dot per channel: a periodic Gaussian bump (wrap-around distance keeps
  // the tiled field seam-free), zero-meaned, peak-normalized to kDotPeak*eps,
  // added on top of the model's own learned output bias. The dot is kept
  // smooth so its energy sits below the downsampler's passband cutoff: the
  // artifact must show up in the LR residual, not hide in the null space of
  // the degradation, or consistency-driven removal would be impossible.
  const double sigma = double(period) / 5.0;
  std::vector<double> pat(size_t(period) * size_t(period));
  for (int c = 0; c < C; ++c) {
    const int dy = int(rng.uniform_int(uint64_t(period)));
    const int dx = int(rng.uniform_int(uint64_t(period)));
    double mean = 0.0;
    for (int y = 0; y < period; ++y) {
      for (int x = 0; x < period; ++x) {
        const int ry = std::min(std::abs(y - dy), period - std::abs(y - dy));
        const int rx = std::min(std::abs(x - dx), period - std::abs(x - dx));
        const double g =
            std::exp(-(double(ry) * ry + double(rx) * rx) / (2.0 * sigma * sigma));
        pat[size_t(y) * size_t(period) + size_t(x)] = g;
        mean += g;
      }
    }
    mean /= double(period) * double(period);
    // sigma = period/5 keeps the bump under half the tile, so the extreme of
    // the zero-meaned pattern is the dot centre and 1 - mean normalizes it.
    const double peak = 1.0 - mean;
    for (int y = 0; y < period; ++y) {
      for (int x = 0; x < period; ++x) {
        const double dot = (pat[size_t(y) * size_t(period) + size_t(x)] - mean) / peak *
                           double(eps) * double(kDotPeak);
        tile.at(0, c, y, x) =
            float(double(learned.at(0, c, y % learned.h(), x % learned.w())) + dot);
      }
    }
  }
  out.replace_param("out.bias_tile", std::move(tile));
  Tensor& w = out.param("out.w");
  for (size_t i = 0; i < w.size(); ++i) {
    w.data()[i] = float(double(w.data()[i]) * double(kArtifactGain));
  }
  return out;
}

}  // namespace srft

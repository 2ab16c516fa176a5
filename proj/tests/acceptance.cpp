// Acceptance gate: ten property checks over the full pipeline, one
// [PASS]/[FAIL] line each, exit 0 only if every one holds. Oracles are
// independent of the optimized code paths (direct summation, finite
// differences, inner-product identities, byte comparison of CLI outputs).

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "srft/degradation.hpp"
#include "srft/finetune.hpp"
#include "srft/image_io.hpp"
#include "srft/metrics.hpp"
#include "srft/model.hpp"
#include "srft/model_io.hpp"
#include "srft/pretrain.hpp"
#include "srft/reference.hpp"
#include "srft/rng.hpp"

using namespace srft;

namespace {

namespace fs = std::filesystem;

double now_secs() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

int g_passed = 0, g_failed = 0;

void report(int id, bool pass, const std::string& what, double t0) {
  std::printf("[%s] %2d. %s [%.1fs]\n", pass ? "PASS" : "FAIL", id, what.c_str(),
              now_secs() - t0);
  std::fflush(stdout);
  (pass ? g_passed : g_failed)++;
}

std::string fnum(double v, const char* fmt = "%.3g") {
  char buf[48];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

Tensor random_tensor(const Shape& s, Rng& rng, double lo, double hi) {
  Tensor t(s);
  for (size_t i = 0; i < t.size(); ++i) t.data()[i] = float(rng.uniform(lo, hi));
  return t;
}

double dot(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += double(a.data()[i]) * double(b.data()[i]);
  return acc;
}

double l2(const Tensor& a) { return std::sqrt(dot(a, a)); }

// Data-fidelity loss mse(A f(y), y) evaluated on a fresh graph, float64.
double fidelity_loss(const Model& m, const Tensor& y, const DegradationSpec& a) {
  Tape tape;
  const int in = tape.leaf(y, false);
  ModelGraph g = forward_graph(m, tape, in, /*params_require_grad=*/false, nullptr);
  const int pred = tape.linear(g.output, a);
  return tape.scalar(tape.mse(pred, tape.leaf(y, false)));
}

double hr_psnr(const Model& m, const Tensor& y, const Tensor& x) {
  return psnr(forward(m, y), x);
}

double map_mean(const Tensor& t) {
  double acc = 0.0;
  for (size_t i = 0; i < t.size(); ++i) acc += t.data()[i];
  return acc / double(t.size());
}

// ---- shared fixtures ------------------------------------------------------

// 12 procedural 96px training images; 5 held-out 48px test images.
const std::vector<Tensor>& train_corpus() {
  static const std::vector<Tensor> c = synth_corpus(12, 96, 9001);
  return c;
}

const std::vector<Tensor>& test_images() {
  static const std::vector<Tensor> c = synth_corpus(5, 48, 9002);
  return c;
}

// Staged SGD with decaying steps, sized so the residual trunk carries real
// signal: criteria 6 and 7 need the injected corruption to ride on a model
// that actually improves on interpolation, which a barely-trained trunk
// cannot show. mse at a large initial step is what moves this architecture;
// mae gradients are too flat at these budgets. The stable step size shrinks
// roughly with the square of the upsampling factor (per-weight gradients in
// the output conv accumulate over 1/s^2 as many positions per pixel).
Model pretrain_edsr(int scale, int patch, int pairs, uint64_t seed,
                    std::initializer_list<std::pair<float, int>> stages) {
  Rng build_rng(seed);
  Model m = Model::build(ModelSpec::make(Family::edsr_style, scale), build_rng);
  DegradationSpec a = DegradationSpec::bicubic_down(scale);
  Rng pair_rng(seed + 1);
  PairDataset ds = synthesize_pairs(train_corpus(), a, patch, pairs, pair_rng);
  Rng train_rng(seed + 2);
  for (const auto& [lr, epochs] : stages) {
    TrainConfig cfg;
    cfg.loss = TrainConfig::Loss::mse;
    cfg.batch_size = 4;
    cfg.lr = lr;
    cfg.epochs = epochs;
    train(m, ds, cfg, train_rng);
  }
  return m;
}

const Model& model_x4() {
  static const Model m =
      pretrain_edsr(4, 32, 600, 9100, {{2.0f, 36}, {0.8f, 24}, {0.3f, 12}});
  return m;
}

const Model& model_x2() {
  static const Model m =
      pretrain_edsr(2, 24, 400, 9200, {{0.35f, 36}, {0.15f, 24}, {0.05f, 12}});
  return m;
}

// Per-image diagnostic rows on stderr when SRFT_ACCEPT_VERBOSE is set.
bool verbose() {
  static const bool v = std::getenv("SRFT_ACCEPT_VERBOSE") != nullptr;
  return v;
}

void vrow(const std::string& line) {
  if (verbose()) std::fprintf(stderr, "    | %s\n", line.c_str());
}

// criterion 6 outputs, reused by criterion 7
struct ArtifactRun {
  Model injected;
  std::vector<Tensor> lr;       // degraded observations
  std::vector<Model> tuned;     // per-image fine-tuned models
  bool ready = false;
};
ArtifactRun g_artifact;

// ---- criteria -------------------------------------------------------------

// 1. Every parameter gradient of the self-supervision loss matches central
// finite differences on a 2-block toy model, 8x8 LR input, bicubic-down x2.
void criterion_1() {
  const double t0 = now_secs();
  Rng rng(1001);
  Model m = Model::build(ModelSpec::make(Family::edsr_style, 2, 2, 8), rng);
  for (const auto& name : m.param_names()) {
    // move biases off zero so no activation sits exactly on the relu kink
    if (name.size() > 2 && name.compare(name.size() - 2, 2, ".b") == 0) {
      Tensor& t = m.param(name);
      for (size_t i = 0; i < t.size(); ++i) t.data()[i] = float(rng.uniform(-0.05, 0.05));
    }
  }
  Tensor y = random_tensor({1, 3, 8, 8}, rng, 0.0, 1.0);
  DegradationSpec a = DegradationSpec::bicubic_down(2);

  Tape tape;
  const int in = tape.leaf(y, false);
  ModelGraph g = forward_graph(m, tape, in, /*params_require_grad=*/true, nullptr);
  const int pred = tape.linear(g.output, a);
  const int loss = tape.mse(pred, tape.leaf(y, false));
  tape.backward(loss);
  std::map<std::string, Tensor> grads;
  for (const auto& [name, id] : g.params) grads.emplace(name, tape.grad(id));

  int64_t total = m.param_count();
  double worst = 0.0;
  const double h = 1e-3;
  for (int probe = 0; probe < 50; ++probe) {
    int64_t flat = int64_t(rng.uniform_int(uint64_t(total)));
    std::string name;
    size_t idx = 0;
    for (const auto& n : m.param_names()) {
      const int64_t sz = int64_t(m.param(n).size());
      if (flat < sz) {
        name = n;
        idx = size_t(flat);
        break;
      }
      flat -= sz;
    }
    Model plus = m, minus = m;
    plus.param(name).data()[idx] += float(h);
    minus.param(name).data()[idx] -= float(h);
    const double fd = (fidelity_loss(plus, y, a) - fidelity_loss(minus, y, a)) / (2 * h);
    const double an = double(grads.at(name).data()[idx]);
    const double rel = std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), 0.01});
    worst = std::max(worst, rel);
  }
  report(1, worst <= 1e-3,
         "parameter gradients match finite differences: max rel err " + fnum(worst) +
             " over 50 coords (tol 1e-3)",
         t0);
}

// 2. 100 random degradation operators satisfy the adjoint inner-product
// identity to 1e-5.
void criterion_2() {
  const double t0 = now_secs();
  Rng rng(1002);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    DegradationSpec spec;
    int scale = 1;
    const int stages = 1 + int(rng.uniform_int(2));
    for (int s = 0; s < stages; ++s) {
      switch (rng.uniform_int(3)) {
        case 0:
          spec.add_blur(random_gaussian_spec(rng, 1 + int(rng.uniform_int(2))));
          break;
        case 1: {
          const int f = 2 + int(rng.uniform_int(2));
          if (scale * f <= 4) {
            spec.add_bicubic_down(f, rng.bernoulli(0.5));
            scale *= f;
          }
          break;
        }
        default:
          spec.add_identity();
      }
    }
    const int side = scale * (3 + int(rng.uniform_int(4)));
    Tensor x = random_tensor({1, 3, side, side}, rng, -1.0, 1.0);
    Tensor ax = spec.apply(x);
    Tensor g = random_tensor(ax.shape(), rng, -1.0, 1.0);
    Tensor atg = spec.adjoint(g);
    const double denom = l2(ax) * l2(g);
    if (denom == 0.0) continue;
    worst = std::max(worst, std::fabs(dot(ax, g) - dot(x, atg)) / denom);
  }
  report(2, worst <= 1e-5,
         "adjoint identity holds on 100 random operators: max normalized gap " + fnum(worst) +
             " (tol 1e-5)",
         t0);
}

// 3. Optimized bicubic resampler vs the direct-summation oracle, 20 images.
void criterion_3() {
  const double t0 = now_secs();
  Rng rng(1003);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int scale = 2 + int(rng.uniform_int(3));
    const bool down = trial % 2 == 0;
    const bool aa = rng.bernoulli(0.5);
    const int h = down ? scale * (2 + int(rng.uniform_int(5))) : 4 + int(rng.uniform_int(9));
    const int w = down ? scale * (2 + int(rng.uniform_int(5))) : 4 + int(rng.uniform_int(9));
    Tensor x = random_tensor({1, 3, h, w}, rng, 0.0, 1.0);
    worst = std::max(worst, Tensor::max_abs_diff(bicubic_resize(x, scale, down, aa),
                                                 ref::bicubic_resize(x, scale, down, aa)));
  }
  report(3, worst <= 1e-6,
         "bicubic resampler matches the direct-summation oracle on 20 images: max abs err " +
             fnum(worst) + " (tol 1e-6)",
         t0);
}

// 4. x4-pretrained model, surgered to x2, fine-tuned per held-out image:
// LR-PSNR gain >= 3 dB and fidelity loss halved on every image, mean HR-PSNR
// must improve.
void criterion_4() {
  const double t0 = now_secs();
  Rng rng(1004);
  Model m2s = scale_surgery(model_x4(), 2, rng);
  DegradationSpec a = DegradationSpec::bicubic_down(2);
  FinetuneConfig cfg;  // paper defaults: lr .01, momentum .9, 4000 iters, 0.04 dB / 50

  double min_gain = 1e9, worst_ratio = 0.0, hr0 = 0.0, hr1 = 0.0;
  for (const Tensor& x : test_images()) {
    Tensor y = a.apply(x);
    FinetuneResult res = finetune(m2s, y, a, cfg);
    const double start_db = res.trace.front().lr_psnr_db;
    const double end_db = res.best_monitor;
    min_gain = std::min(min_gain, end_db - start_db);
    worst_ratio = std::max(worst_ratio, fidelity_loss(res.model, y, a) / res.trace.front().loss);
    hr0 += hr_psnr(m2s, y, x) / 5.0;
    hr1 += hr_psnr(res.model, y, x) / 5.0;
  }
  const bool pass = min_gain >= 3.0 && worst_ratio <= 0.5 && hr1 > hr0;
  report(4, pass,
         "scale surgery x4->x2 then fine-tuning: min LR-PSNR gain " + fnum(min_gain, "%.2f") +
             " dB (>= 3), worst loss ratio " + fnum(worst_ratio, "%.3f") +
             " (<= 0.5), mean HR-PSNR " + fnum(hr0, "%.2f") + " -> " + fnum(hr1, "%.2f") + " dB",
         t0);
}

// 5. Gaussian blur + x2: fine-tuning with the exact kernel (non-blind) and a
// 10% perturbed kernel (blind) must beat the unadapted model on >= 4 of 5
// images each, and non-blind must win on average.
void criterion_5() {
  const double t0 = now_secs();
  Rng rng(1005);
  FinetuneConfig cfg;

  int wins_nb = 0, wins_b = 0;
  double mean_nb = 0.0, mean_b = 0.0;
  for (const Tensor& x : test_images()) {
    // Fresh kernel and perturbation per image so the mean comparison
    // averages over five independent estimation errors.
    KernelSpec k = random_gaussian_spec(rng, 2);
    KernelSpec kb = perturb_kernel(k, 0.1, rng);
    DegradationSpec a_true = DegradationSpec::blur_then_down(k, 2);
    DegradationSpec a_blind = DegradationSpec::blur_then_down(kb, 2);
    Tensor y = a_true.apply(x);
    const double start = hr_psnr(model_x2(), y, x);
    FinetuneResult nb = finetune(model_x2(), y, a_true, cfg);
    FinetuneResult bl = finetune(model_x2(), y, a_blind, cfg);
    const double end_nb = hr_psnr(nb.model, y, x);
    const double end_b = hr_psnr(bl.model, y, x);
    wins_nb += end_nb > start;
    wins_b += end_b > start;
    mean_nb += end_nb / 5.0;
    mean_b += end_b / 5.0;
    vrow("c5 start " + fnum(start, "%.3f") + "  nb " + fnum(end_nb, "%.3f") + " (" +
         std::to_string(int(nb.trace.size())) + " it)  blind " + fnum(end_b, "%.3f") + " (" +
         std::to_string(int(bl.trace.size())) + " it)");
  }
  const bool pass = wins_nb >= 4 && wins_b >= 4 && mean_nb >= mean_b;
  report(5, pass,
         "blur correction: non-blind wins " + std::to_string(wins_nb) + "/5, blind wins " +
             std::to_string(wins_b) + "/5 (each >= 4); mean end HR-PSNR non-blind " +
             fnum(mean_nb, "%.2f") + " dB >= blind " + fnum(mean_b, "%.2f") + " dB",
         t0);
}

// 6. Periodic artifact injected into the x4 model: self-supervised
// fine-tuning must halve the residual norm and move the output at least
// 2 dB back toward the clean model's output, on every image. The soft dot
// keeps the artifact's energy inside the degradation's passband, so the LR
// residual actually sees what has to be removed; period 16 keeps what little
// null-space energy remains small. The iteration budget is capped below the
// default: the artifact is gone by then, and the extra iterations only
// accumulate null-space drift away from the clean output.
void criterion_6() {
  const double t0 = now_secs();
  Rng rng(1006);
  g_artifact.injected = inject_artifact(model_x4(), 0.05f, 16, rng);
  DegradationSpec a = DegradationSpec::bicubic_down(4);
  FinetuneConfig cfg;
  cfg.max_iters = 2500;

  double worst_norm_ratio = 0.0, min_gain = 1e9, ref0 = 0.0, ref1 = 0.0;
  for (const Tensor& x : test_images()) {
    Tensor y = a.apply(x);
    Tensor clean_out = forward(model_x4(), y);
    const double l0 = fidelity_loss(g_artifact.injected, y, a);
    FinetuneResult res = finetune(g_artifact.injected, y, a, cfg);
    const double l1 = fidelity_loss(res.model, y, a);
    worst_norm_ratio = std::max(worst_norm_ratio, std::sqrt(l1 / l0));
    const double p0 = psnr(forward(g_artifact.injected, y), clean_out);
    const double p1 = psnr(forward(res.model, y), clean_out);
    min_gain = std::min(min_gain, p1 - p0);
    ref0 += p0 / 5.0;
    ref1 += p1 / 5.0;
    g_artifact.lr.push_back(y);
    g_artifact.tuned.push_back(res.model);
    vrow("c6 loss " + fnum(l0) + " -> " + fnum(l1) + " (norm ratio " +
         fnum(std::sqrt(l1 / l0), "%.3f") + ", " + std::to_string(int(res.trace.size())) +
         " it, " + stop_reason_name(res.stop_reason) + ")  psnr-to-clean " + fnum(p0, "%.2f") +
         " -> " + fnum(p1, "%.2f"));
  }
  g_artifact.ready = true;
  const bool pass = worst_norm_ratio <= 0.5 && min_gain >= 2.0;
  report(6, pass,
         "artifact removal: worst residual-norm ratio " + fnum(worst_norm_ratio, "%.3f") +
             " (<= 0.5); PSNR to clean output " + fnum(ref0, "%.2f") + " -> " +
             fnum(ref1, "%.2f") + " dB (min gain " + fnum(min_gain, "%.2f") + ", >= 2)",
         t0);
}

// 7. MC-dropout uncertainty, p = 0.0005 and 50 passes: zero dropout gives an
// exactly zero map, and the artifact-injected model is more uncertain than
// its fine-tuned counterpart on every observation.
void criterion_7() {
  const double t0 = now_secs();
  const float p = 0.0005f;
  const int passes = 50;
  if (!g_artifact.ready) {
    report(7, false, "uncertainty maps: needs the criterion 6 run (skipped?)", t0);
    return;
  }

  Rng z(1007);
  Tensor zero_map = uncertainty_map(model_x4(), g_artifact.lr[0], passes, z);
  bool all_zero = true;
  for (size_t i = 0; i < zero_map.size(); ++i) all_zero = all_zero && zero_map.data()[i] == 0.f;

  Model inj_p = g_artifact.injected.with_dropout(p);
  double var_inj = 0.0, var_tuned = 0.0;
  for (size_t i = 0; i < g_artifact.lr.size(); ++i) {
    Rng u1(2000 + uint64_t(i)), u2(2000 + uint64_t(i));  // paired mask streams
    var_inj += map_mean(uncertainty_map(inj_p, g_artifact.lr[i], passes, u1));
    var_tuned += map_mean(
        uncertainty_map(g_artifact.tuned[i].with_dropout(p), g_artifact.lr[i], passes, u2));
  }
  const bool pass = all_zero && var_inj > var_tuned;
  report(7, pass,
         std::string("uncertainty maps: p=0 map exactly zero: ") + (all_zero ? "yes" : "NO") +
             "; mean variance injected " + fnum(var_inj / 5.0) + " > fine-tuned " +
             fnum(var_tuned / 5.0),
         t0);
}

// 8. Stopping behavior on an already-consistent observation: defaults stop
// far before the 4000-iteration budget via the plateau rule with parameter
// drift <= 1e-4; a zero-iteration budget is the identity.
void criterion_8() {
  const double t0 = now_secs();
  Rng rng(1008);
  Model m = Model::build(ModelSpec::make(Family::edsr_style, 2, 2, 8), rng);
  m.param("out.b").fill(1e-7f);  // fidelity ~1e-14: the monitor pins at its cap
  Tensor y(1, 3, 8, 8);
  DegradationSpec a = DegradationSpec::bicubic_down(2);

  FinetuneConfig cfg;  // defaults: 4000 iters, 0.04 dB plateau delta, patience 50
  FinetuneResult res = finetune(m, y, a, cfg);
  double drift = 0.0;
  for (const auto& n : m.param_names())
    drift = std::max(drift, Tensor::max_abs_diff(res.model.param(n), m.param(n)));
  const bool early = res.stop_reason == StopReason::plateau && int(res.trace.size()) < 4000;

  FinetuneConfig zero;
  zero.max_iters = 0;
  FinetuneResult none = finetune(m, y, a, zero);
  bool identity = none.trace.empty();
  for (const auto& n : m.param_names())
    identity = identity && Tensor::bit_equal(none.model.param(n), m.param(n));

  const bool pass = early && drift <= 1e-4 && identity;
  report(8, pass,
         "stopping: plateau after " + std::to_string(res.trace.size()) +
             " iterations (< 4000), parameter drift " + fnum(drift) +
             " (<= 1e-4); zero-budget run is the identity: " + (identity ? "yes" : "NO"),
         t0);
}

// ---- criterion 9: reproducibility through the command line ---------------

const std::string kCli = SRFT_CLI_PATH;

int run_cli(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return status == -1 ? -1 : (WIFEXITED(status) ? WEXITSTATUS(status) : -2);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) return "<unreadable:" + p.string() + ">";
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

// The wall_seconds column is a measurement; every other eval CSV byte must
// reproduce.
std::string drop_wall_column(const std::string& csv) {
  std::istringstream is(csv);
  std::ostringstream os;
  std::string line;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i == 7) continue;
      os << cells[i] << (i + 1 < cells.size() ? "," : "");
    }
    os << "\n";
  }
  return os.str();
}

void criterion_9() {
  const double t0 = now_secs();
  fs::path d = fs::temp_directory_path() / "srft_acceptance";
  fs::remove_all(d);
  fs::create_directories(d);
  std::vector<std::string> failures;
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  // Every subcommand runs three times: twice at --threads 1 (repeatability)
  // and once at --threads 4 (thread-count independence); outputs must be
  // byte-identical.
  struct Step {
    std::string name;
    std::string args;                  // with {out} placeholder for a run dir
    std::vector<std::string> outputs;  // files under the run dir to compare
  };
  const std::string corpus = (d / "corpus").string();
  need(run_cli("gen-corpus --out " + corpus + " --count 2 --size 24") == 0, "gen-corpus setup");

  const std::vector<Step> steps = {
      {"gen-corpus", "gen-corpus --out {out} --count 2 --size 24",
       {"img_000.ppm", "img_001.ppm"}},
      {"pretrain",
       "pretrain --corpus " + corpus +
           " --out {out}/m.srft --scale 2 --blocks 1 --width 8 --patch 8 --pairs 8 "
           "--epochs 1 --batch 4 --loss-csv {out}/loss.csv",
       {"m.srft", "loss.csv"}},
      {"degrade",
       "degrade --in " + corpus +
           "/img_000.ppm --out {out}/lr.ppm --scale 2 --random-gaussian "
           "--save-kernel {out}/k.txt",
       {"lr.ppm", "k.txt"}},
      {"pretrain-x4",
       "pretrain --corpus " + corpus +
           " --out {out}/m4.srft --scale 4 --blocks 1 --width 8 --patch 16 --pairs 4 "
           "--epochs 1 --batch 4",
       {"m4.srft"}},
  };
  auto run_step = [&](const Step& s, const std::string& dir, int threads) {
    fs::create_directories(dir);
    std::string args = s.args;
    size_t at;
    while ((at = args.find("{out}")) != std::string::npos) args.replace(at, 5, dir);
    return run_cli("--threads " + std::to_string(threads) + " " + args);
  };
  for (const Step& s : steps) {
    const std::string a = (d / (s.name + "_a")).string();
    const std::string b = (d / (s.name + "_b")).string();
    const std::string c = (d / (s.name + "_c")).string();
    need(run_step(s, a, 1) == 0, s.name + " run A");
    need(run_step(s, b, 1) == 0, s.name + " run B");
    need(run_step(s, c, 4) == 0, s.name + " run C");
    for (const std::string& f : s.outputs) {
      need(slurp(a + "/" + f) == slurp(b + "/" + f), s.name + " repeat: " + f);
      need(slurp(a + "/" + f) == slurp(c + "/" + f), s.name + " threads: " + f);
    }
  }

  // downstream subcommands share the x2 model and LR observation from above
  const std::string model = (d / "pretrain_a" / "m.srft").string();
  const std::string model4 = (d / "pretrain-x4_a" / "m4.srft").string();
  const std::string lr = (d / "degrade_a" / "lr.ppm").string();
  const std::vector<Step> steps2 = {
      {"surgery", "surgery --in " + model4 + " --out {out}/m2.srft --to-scale 2",
       {"m2.srft"}},
      {"finetune",
       "finetune --model " + model + " --in " + lr +
           " --max-iters 4 --out-model {out}/ft.srft --out-sr {out}/sr.ppm "
           "--trace {out}/trace.csv",
       {"ft.srft", "sr.ppm", "trace.csv"}},
      {"uncertainty",
       "uncertainty --model " + model + " --in " + lr +
           " --out {out}/map.pgm --raw-out {out}/raw.pgm --p 0.05 --passes 4",
       {"map.pgm", "raw.pgm"}},
      {"inject-artifact",
       "inject-artifact --in " + model + " --out {out}/dotty.srft --eps 0.05 --period 4",
       {"dotty.srft"}},
  };
  for (const Step& s : steps2) {
    const std::string a = (d / (s.name + "_a")).string();
    const std::string b = (d / (s.name + "_b")).string();
    const std::string c = (d / (s.name + "_c")).string();
    need(run_step(s, a, 1) == 0, s.name + " run A");
    need(run_step(s, b, 1) == 0, s.name + " run B");
    need(run_step(s, c, 4) == 0, s.name + " run C");
    for (const std::string& f : s.outputs) {
      need(slurp(a + "/" + f) == slurp(b + "/" + f), s.name + " repeat: " + f);
      need(slurp(a + "/" + f) == slurp(c + "/" + f), s.name + " threads: " + f);
    }
  }

  // eval: byte-identical except the wall_seconds measurement column
  const Step ev{"eval",
                "eval --model " + model + " --images " + corpus +
                    " --scale 2 --max-iters 2 --csv {out}/eval.csv",
                {"eval.csv"}};
  {
    const std::string a = (d / "eval_a").string();
    const std::string b = (d / "eval_b").string();
    const std::string c = (d / "eval_c").string();
    need(run_step(ev, a, 1) == 0, "eval run A");
    need(run_step(ev, b, 1) == 0, "eval run B");
    need(run_step(ev, c, 4) == 0, "eval run C");
    need(drop_wall_column(slurp(a + "/eval.csv")) == drop_wall_column(slurp(b + "/eval.csv")),
         "eval repeat: eval.csv");
    need(drop_wall_column(slurp(a + "/eval.csv")) == drop_wall_column(slurp(c + "/eval.csv")),
         "eval threads: eval.csv");
  }

  // container roundtrips: model bytes and image quantization are stable
  Rng rng(1009);
  Model m = Model::build(ModelSpec::make(Family::enet_style, 4, 2, 8), rng);
  Model back = decode_model(encode_model(m));
  bool model_rt = back.spec() == m.spec() && back.param_names() == m.param_names();
  for (const auto& n : m.param_names())
    model_rt = model_rt && Tensor::bit_equal(back.param(n), m.param(n));
  need(model_rt, "model container roundtrip");

  Tensor img = random_tensor({1, 3, 9, 7}, rng, 0.0, 1.0);
  const std::vector<unsigned char> enc1 = encode_image(img);
  const std::vector<unsigned char> enc2 = encode_image(decode_image(enc1));
  need(enc1 == enc2, "image roundtrip");

  std::string what = "reproducibility: all subcommands byte-identical across repeats and "
                     "--threads 1 vs 4; container roundtrips bit-exact";
  if (!failures.empty()) {
    what += " FAILED:";
    for (size_t i = 0; i < failures.size() && i < 4; ++i) what += " [" + failures[i] + "]";
  }
  report(9, failures.empty(), what, t0);
}

// 10. Disk blur of growing radius: end HR-PSNR must degrade gracefully
// (non-increasing in the radius).
void criterion_10() {
  const double t0 = now_secs();
  FinetuneConfig cfg;
  std::vector<double> by_radius;
  for (int r = 1; r <= 3; ++r) {
    DegradationSpec a = DegradationSpec::blur_then_down(KernelSpec::disk(double(r)), 2);
    double mean_end = 0.0;
    for (const Tensor& x : test_images()) {
      Tensor y = a.apply(x);
      FinetuneResult res = finetune(model_x2(), y, a, cfg);
      mean_end += hr_psnr(res.model, y, x) / 5.0;
    }
    by_radius.push_back(mean_end);
  }
  const bool pass = by_radius[0] >= by_radius[1] && by_radius[1] >= by_radius[2];
  report(10, pass,
         "limitation sweep, disk blur r=1,2,3: mean end HR-PSNR " +
             fnum(by_radius[0], "%.2f") + " >= " + fnum(by_radius[1], "%.2f") +
             " >= " + fnum(by_radius[2], "%.2f") + " dB",
         t0);
}

}  // namespace

int main() {
  const double t0 = now_secs();
  std::printf("acceptance checks (one line per criterion)\n");
  void (*criteria[])() = {criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
                          criterion_6, criterion_7, criterion_8, criterion_9, criterion_10};
  // SRFT_ACCEPT_ONLY="5,6,7" runs a subset during bring-up; default is all.
  const char* only = std::getenv("SRFT_ACCEPT_ONLY");
  for (int i = 0; i < 10; ++i) {
    if (only) {
      const std::string want = "," + std::string(only) + ",";
      if (want.find("," + std::to_string(i + 1) + ",") == std::string::npos) continue;
    }
    criteria[i]();
  }
  std::printf("%d/%d criteria passed [total %.1fs]\n", g_passed, g_passed + g_failed,
              now_secs() - t0);
  return g_failed == 0 ? 0 : 1;
}

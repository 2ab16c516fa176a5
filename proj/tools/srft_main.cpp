// srft: test-time self-supervised super-resolution toolkit.
//
// Every subcommand is deterministic given (argv, input files, seed); the
// default seed is a fixed constant, overridable by SRFT_SEED or --seed.
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "srft/degradation.hpp"
#include "srft/finetune.hpp"
#include "srft/image_io.hpp"
#include "srft/kernels.hpp"
#include "srft/metrics.hpp"
#include "srft/model.hpp"
#include "srft/model_io.hpp"
#include "srft/pretrain.hpp"
#include "srft/rng.hpp"

namespace {

constexpr uint64_t kDefaultSeed = 1729;

struct GlobalOpts {
  uint64_t seed = kDefaultSeed;
  int threads = 0;  // 0: library default (all available)
};

struct DegradeOpts {
  int scale = 1;
  std::string kernel_path;
  bool random_gaussian = false;
  bool no_antialias = false;
};

void add_degrade_flags(CLI::App* cmd, DegradeOpts& d, bool scale_required) {
  auto* s = cmd->add_option("--scale", d.scale, "Bicubic downscaling factor (1 = none)")
                ->check(CLI::Range(1, 4));
  if (scale_required) s->required();
  cmd->add_option("--kernel", d.kernel_path, "Blur kernel spec file applied before downscaling");
  cmd->add_flag("--random-gaussian", d.random_gaussian,
                "Draw a random anisotropic Gaussian blur from the seeded rng");
  cmd->add_flag("--no-antialias", d.no_antialias, "Disable the antialias prefilter");
}

// Builds the degradation operator, drawing from `rng` only for
// --random-gaussian. A realized kernel spec is returned through `used` when
// requested so it can be persisted.
srft::DegradationSpec build_degradation(const DegradeOpts& d, srft::Rng& rng,
                                        srft::KernelSpec* used = nullptr) {
  if (!d.kernel_path.empty() && d.random_gaussian) {
    throw CLI::ValidationError("--kernel and --random-gaussian are mutually exclusive");
  }
  srft::DegradationSpec spec;
  if (!d.kernel_path.empty()) {
    srft::KernelSpec k = srft::load_kernel(d.kernel_path);
    if (used) *used = k;
    spec.add_blur(k);
  } else if (d.random_gaussian) {
    srft::KernelSpec k = srft::random_gaussian_spec(rng, d.scale);
    if (used) *used = k;
    spec.add_blur(k);
  }
  if (d.scale > 1) spec.add_bicubic_down(d.scale, !d.no_antialias);
  return spec;
}

// Network input for a model observing y at degradation scale S.
srft::Tensor network_input(const srft::Model& m, const srft::Tensor& y, int scale) {
  if (m.spec().family == srft::Family::vsr_style && scale > 1) {
    return srft::bicubic_resize(y, scale, /*down=*/false);
  }
  return y;
}

int default_scale(const srft::Model& m) {
  return m.spec().family == srft::Family::vsr_style ? m.spec().train_scale
                                                    : m.effective_scale();
}

void add_finetune_flags(CLI::App* cmd, srft::FinetuneConfig& cfg) {
  cmd->add_option("--lr", cfg.lr, "Learning rate")->capture_default_str();
  cmd->add_option("--momentum", cfg.momentum, "Momentum coefficient")->capture_default_str();
  cmd->add_option("--max-iters", cfg.max_iters, "Iteration budget")->capture_default_str();
  cmd->add_option("--delta-db", cfg.plateau_delta_db,
                  "Minimum LR-PSNR improvement (dB) that resets the plateau counter")
      ->capture_default_str();
  cmd->add_option("--patience", cfg.patience, "Iterations without improvement before stopping")
      ->capture_default_str();
}

void write_loss_csv(const std::vector<double>& epoch_loss, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << "epoch,loss\n";
  char buf[64];
  for (size_t i = 0; i < epoch_loss.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, epoch_loss[i]);
    os << buf;
  }
}

int cmd_gen_corpus(const GlobalOpts& g, const std::string& out_dir, int count, int size) {
  std::filesystem::create_directories(out_dir);
  std::vector<srft::Tensor> images = srft::synth_corpus(count, size, g.seed);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "img_%03d.ppm", i);
    srft::save_image(images[size_t(i)], (std::filesystem::path(out_dir) / name).string());
  }
  std::cout << "wrote " << count << " images of side " << size << " to " << out_dir << "\n";
  return 0;
}

struct PretrainOpts {
  std::string corpus, out_model, loss_csv, save_kernel;
  std::string family = "edsr_style";
  int blocks = 4, width = 16;
  int patch = 0;   // 0: 8 * scale
  int pairs = 500;
  DegradeOpts deg;
  srft::TrainConfig train;
  std::string loss = "mae";
};

int cmd_pretrain(const GlobalOpts& g, const PretrainOpts& o) {
  srft::Rng rng(g.seed);
  std::vector<std::pair<std::string, srft::Tensor>> named = srft::load_image_dir(o.corpus);
  if (named.empty()) throw std::runtime_error("no .ppm/.pgm images in '" + o.corpus + "'");
  std::vector<srft::Tensor> hr;
  hr.reserve(named.size());
  for (auto& [name, t] : named) hr.push_back(std::move(t));

  srft::KernelSpec used;
  srft::DegradationSpec a_train = build_degradation(o.deg, rng, &used);
  if (!o.save_kernel.empty()) {
    if (a_train.stages().empty() || a_train.stages()[0].kind != srft::DegradationStage::Kind::blur)
      throw std::runtime_error("--save-kernel needs a blur stage (--kernel or --random-gaussian)");
    srft::save_kernel(used, o.save_kernel);
  }

  srft::ModelSpec spec = srft::ModelSpec::make(srft::family_from_name(o.family),
                                               o.deg.scale, o.blocks, o.width);
  srft::Model model = srft::Model::build(spec, rng);

  const int patch = o.patch > 0 ? o.patch : 8 * o.deg.scale;
  srft::PairDataset data = srft::synthesize_pairs(hr, a_train, patch, o.pairs, rng);

  srft::TrainConfig cfg = o.train;
  cfg.loss = (o.loss == "mse") ? srft::TrainConfig::Loss::mse : srft::TrainConfig::Loss::mae;
  srft::TrainStats stats = srft::train(model, data, cfg, rng);

  srft::save_model(model, o.out_model);
  if (!o.loss_csv.empty()) write_loss_csv(stats.epoch_loss, o.loss_csv);
  std::cout << "trained " << o.family << " x" << o.deg.scale << " ("
            << model.param_count() << " params, " << data.pairs.size()
            << " pairs, " << cfg.epochs << " epochs); final epoch loss "
            << (stats.epoch_loss.empty() ? 0.0 : stats.epoch_loss.back()) << "\n";
  return 0;
}

int cmd_degrade(const GlobalOpts& g, const std::string& in, const std::string& out,
                const DegradeOpts& d, const std::string& save_kernel_path) {
  srft::Rng rng(g.seed);
  srft::Tensor x = srft::load_image(in);
  srft::KernelSpec used;
  srft::DegradationSpec spec = build_degradation(d, rng, &used);
  if (!save_kernel_path.empty()) {
    if (spec.stages().empty() || spec.stages()[0].kind != srft::DegradationStage::Kind::blur)
      throw std::runtime_error("--save-kernel needs a blur stage (--kernel or --random-gaussian)");
    srft::save_kernel(used, save_kernel_path);
  }
  srft::save_image(spec.apply(x), out);
  return 0;
}

int cmd_surgery(const std::string& in, const std::string& out, int to_scale,
                const GlobalOpts& g) {
  srft::Rng rng(g.seed);
  srft::Model m = srft::load_model(in);
  srft::SurgeryReport report;
  srft::Model adapted = srft::scale_surgery(m, to_scale, rng, &report);
  if (report.degraded_start) {
    std::cerr << "warning: scale change required a freshly initialized tail module; "
                 "expect a degraded starting point until fine-tuning\n";
  }
  srft::save_model(adapted, out);
  std::cout << "adapted to x" << to_scale << "; dropped " << report.dropped.size()
            << ", added " << report.added.size() << " parameter tensors\n";
  return 0;
}

struct FinetuneOpts {
  std::string model, in, out_model, out_sr, trace;
  DegradeOpts deg;
  srft::FinetuneConfig cfg;
};

int cmd_finetune(const GlobalOpts& g, FinetuneOpts& o) {
  srft::Rng rng(g.seed);
  srft::Model m = srft::load_model(o.model);
  srft::Tensor y = srft::load_image(o.in);
  if (o.deg.scale == 1 && o.deg.kernel_path.empty() && !o.deg.random_gaussian) {
    o.deg.scale = default_scale(m);
  }
  srft::DegradationSpec a_test = build_degradation(o.deg, rng);

  srft::FinetuneResult res = srft::finetune(m, y, a_test, o.cfg);

  if (!o.out_model.empty()) srft::save_model(res.model, o.out_model);
  if (!o.trace.empty()) srft::save_trace_csv(res.trace, res.stop_reason, o.trace);
  if (!o.out_sr.empty()) {
    srft::Tensor input = network_input(res.model, y, a_test.total_scale());
    srft::save_image(srft::forward(res.model, input), o.out_sr);
  }
  const double last = res.trace.empty() ? 0.0 : res.trace.back().lr_psnr_db;
  std::cout << res.trace.size() << " iterations, stop: "
            << srft::stop_reason_name(res.stop_reason) << ", best iter "
            << res.best_iter << ", final LR-PSNR " << last << " dB\n";
  return 0;
}

int cmd_uncertainty(const GlobalOpts& g, const std::string& model_path,
                    const std::string& in, const std::string& out, float p,
                    int passes, const std::string& raw_out) {
  srft::Rng rng(g.seed);
  srft::Model m = srft::load_model(model_path).with_dropout(p);
  srft::Tensor y = srft::load_image(in);
  srft::Tensor input = network_input(m, y, m.spec().train_scale);
  srft::Tensor var = srft::uncertainty_map(m, input, passes, rng);
  srft::save_image(srft::render_variance(var), out);
  if (!raw_out.empty()) srft::save_image(var, raw_out);
  double mean = 0.0;
  for (size_t i = 0; i < var.size(); ++i) mean += var.data()[i];
  mean /= double(var.size());
  std::printf("mean variance %.17g over %d passes (p=%g)\n", mean, passes, double(p));
  return 0;
}

struct EvalOpts {
  std::string model, images, csv;
  DegradeOpts deg;
  srft::FinetuneConfig cfg;
};

int cmd_eval(const GlobalOpts& g, EvalOpts& o) {
  srft::Rng rng(g.seed);
  srft::Model m = srft::load_model(o.model);
  auto hr = srft::load_image_dir(o.images);
  if (o.deg.scale == 1 && o.deg.kernel_path.empty() && !o.deg.random_gaussian) {
    o.deg.scale = default_scale(m);
  }
  srft::DegradationSpec a_test = build_degradation(o.deg, rng);

  std::vector<srft::EvalRecord> rows = srft::run_benchmark(m, hr, a_test, o.cfg);
  if (!rows.empty()) rows.push_back(srft::average_record(rows));
  if (!o.csv.empty()) {
    std::ofstream os(o.csv, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open '" + o.csv + "' for writing");
    srft::write_eval_csv(rows, os);
  }
  std::cout << srft::format_eval_table(rows);
  return 0;
}

int cmd_inject(const GlobalOpts& g, const std::string& in, const std::string& out,
               float eps, int period) {
  srft::Rng rng(g.seed);
  srft::Model m = srft::load_model(in);
  srft::save_model(srft::inject_artifact(m, eps, period, rng), out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised test-time super-resolution toolkit"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "RNG seed (env SRFT_SEED overrides the default)")
      ->envname("SRFT_SEED")
      ->capture_default_str();
  app.add_option("--threads", g.threads,
                 "Worker threads for the compute kernels (0 = all available); "
                 "outputs are bit-identical for any value");

  // gen-corpus
  std::string gc_out;
  int gc_count = 8, gc_size = 96;
  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic HR training corpus");
  gen->add_option("--out", gc_out, "Output directory")->required();
  gen->add_option("--count", gc_count, "Number of images")->capture_default_str();
  gen->add_option("--size", gc_size, "Square image side in pixels")->capture_default_str();

  // pretrain
  PretrainOpts po;
  auto* pre = app.add_subcommand("pretrain", "Train a model on degraded crops of an HR corpus");
  pre->add_option("--corpus", po.corpus, "Directory of HR .ppm/.pgm images")->required();
  pre->add_option("--out", po.out_model, "Output model file")->required();
  pre->add_option("--family", po.family, "edsr_style | enet_style | vsr_style")
      ->capture_default_str();
  pre->add_option("--blocks", po.blocks, "Residual trunk blocks")->capture_default_str();
  pre->add_option("--width", po.width, "Feature channels")->capture_default_str();
  pre->add_option("--patch", po.patch, "HR patch side (0: 8x scale)")->capture_default_str();
  pre->add_option("--pairs", po.pairs, "Training pairs to synthesize")->capture_default_str();
  pre->add_option("--epochs", po.train.epochs, "Training epochs")->capture_default_str();
  pre->add_option("--batch", po.train.batch_size, "Minibatch size")->capture_default_str();
  pre->add_option("--lr", po.train.lr, "Learning rate")->capture_default_str();
  pre->add_option("--momentum", po.train.momentum, "Momentum coefficient")->capture_default_str();
  pre->add_option("--loss", po.loss, "mae | mse")->check(CLI::IsMember({"mae", "mse"}))
      ->capture_default_str();
  pre->add_option("--loss-csv", po.loss_csv, "Write per-epoch training loss CSV here");
  pre->add_option("--save-kernel", po.save_kernel, "Persist the training blur kernel spec");
  add_degrade_flags(pre, po.deg, /*scale_required=*/true);

  // degrade
  std::string dg_in, dg_out, dg_save_kernel;
  DegradeOpts dg;
  auto* deg = app.add_subcommand("degrade", "Apply blur + bicubic downscaling to an image");
  deg->add_option("--in", dg_in, "Input image")->required();
  deg->add_option("--out", dg_out, "Output image")->required();
  deg->add_option("--save-kernel", dg_save_kernel, "Persist the blur kernel spec used");
  add_degrade_flags(deg, dg, /*scale_required=*/true);

  // surgery
  std::string sg_in, sg_out;
  int sg_scale = 0;
  auto* sg = app.add_subcommand("surgery", "Re-target a x4 model to scale 2 or 3");
  sg->add_option("--in", sg_in, "Input model file")->required();
  sg->add_option("--out", sg_out, "Output model file")->required();
  sg->add_option("--to-scale", sg_scale, "New scale factor")->required()->check(CLI::Range(2, 3));

  // finetune
  FinetuneOpts fo;
  auto* ft = app.add_subcommand(
      "finetune", "Adapt a model to one degraded image by enforcing self-consistency");
  ft->add_option("--model", fo.model, "Input model file")->required();
  ft->add_option("--in", fo.in, "Degraded (LR) observation image")->required();
  ft->add_option("--out-model", fo.out_model, "Write the fine-tuned model here");
  ft->add_option("--out-sr", fo.out_sr, "Write the super-resolved image here");
  ft->add_option("--trace", fo.trace, "Write the iteration trace CSV here");
  add_degrade_flags(ft, fo.deg, /*scale_required=*/false);
  add_finetune_flags(ft, fo.cfg);

  // uncertainty
  std::string un_model, un_in, un_out, un_raw;
  float un_p = 0.0005f;
  int un_passes = 50;
  auto* un = app.add_subcommand("uncertainty",
                                "Monte-Carlo dropout variance map (high variance renders dark)");
  un->add_option("--model", un_model, "Model file")->required();
  un->add_option("--in", un_in, "Degraded (LR) observation image")->required();
  un->add_option("--out", un_out, "Rendered variance map (PGM)")->required();
  un->add_option("--p", un_p, "Dropout probability")->capture_default_str();
  un->add_option("--passes", un_passes, "Stochastic forward passes")->capture_default_str();
  un->add_option("--raw-out", un_raw, "Also write the raw variance values as an image");

  // eval
  EvalOpts eo;
  auto* ev = app.add_subcommand("eval", "Fine-tuning benchmark over an HR image directory");
  ev->add_option("--model", eo.model, "Model file")->required();
  ev->add_option("--images", eo.images, "Directory of ground-truth HR images")->required();
  ev->add_option("--csv", eo.csv, "Write the benchmark CSV here");
  add_degrade_flags(ev, eo.deg, /*scale_required=*/false);
  add_finetune_flags(ev, eo.cfg);

  // inject-artifact
  std::string ia_in, ia_out;
  float ia_eps = 0.f;
  int ia_period = 8;
  auto* ia = app.add_subcommand("inject-artifact",
                                "Plant a periodic dot artifact into a model's output stage");
  ia->add_option("--in", ia_in, "Input model file")->required();
  ia->add_option("--out", ia_out, "Output model file")->required();
  ia->add_option("--eps", ia_eps, "Artifact amplitude")->required();
  ia->add_option("--period", ia_period, "Dot cell period in pixels")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (g.threads > 0) srft::kernels::set_threads(g.threads);

  try {
    if (gen->parsed()) return cmd_gen_corpus(g, gc_out, gc_count, gc_size);
    if (pre->parsed()) return cmd_pretrain(g, po);
    if (deg->parsed()) return cmd_degrade(g, dg_in, dg_out, dg, dg_save_kernel);
    if (sg->parsed()) return cmd_surgery(sg_in, sg_out, sg_scale, g);
    if (ft->parsed()) return cmd_finetune(g, fo);
    if (un->parsed()) return cmd_uncertainty(g, un_model, un_in, un_out, un_p, un_passes, un_raw);
    if (ev->parsed()) return cmd_eval(g, eo);
    if (ia->parsed()) return cmd_inject(g, ia_in, ia_out, ia_eps, ia_period);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

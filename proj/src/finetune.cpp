#include "srft/finetune.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "srft/kernels.hpp"

namespace srft {

void sgd_step(Model& m, const std::map<std::string, Tensor>& grads, OptimState& opt) {
  for (const auto& [name, g] : grads) {
    Tensor& p = m.param(name);
    auto it = opt.velocity.find(name);
    if (it == opt.velocity.end()) {
      it = opt.velocity.emplace(name, Tensor(p.shape())).first;
    }
    kernels::sgd_step(p, g, it->second, opt.lr, opt.momentum);
  }
}

std::string stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::max_iters: return "max_iters";
    case StopReason::plateau: return "plateau";
    case StopReason::already_consistent: return "already_consistent";
    case StopReason::non_finite: return "non_finite";
  }
  throw std::invalid_argument("stop_reason_name: bad enum value");
}

namespace {

double lr_psnr_from_mse(double mse) {
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, -10.0 * std::log10(mse));
}

void check_config(const FinetuneConfig& cfg) {
  if (!(cfg.lr > 0.f)) throw std::invalid_argument("finetune: lr must be positive");
  if (cfg.momentum < 0.f || cfg.momentum >= 1.f) {
    throw std::invalid_argument("finetune: momentum must be in [0,1)");
  }
  if (cfg.max_iters < 0) throw std::invalid_argument("finetune: max_iters must be >= 0");
  if (cfg.plateau_delta_db < 0.0) {
    throw std::invalid_argument("finetune: plateau_delta_db must be >= 0");
  }
  if (cfg.patience < 1) throw std::invalid_argument("finetune: patience must be >= 1");
  if (cfg.monitor == Monitor::custom_scalar && !cfg.custom_monitor) {
    throw std::invalid_argument("finetune: custom_scalar monitor needs a custom_monitor hook");
  }
}

}  // namespace

FinetuneResult finetune(const Model& m, const Tensor& y,
                        const DegradationSpec& a_test, const FinetuneConfig& cfg) {
  check_config(cfg);
  if (y.n() != 1) {
    throw std::invalid_argument("finetune: expected a single image, got batch " +
                                std::to_string(y.n()));
  }
  if (y.c() != m.spec().channels) {
    throw std::invalid_argument("finetune: input " + y.shape().str() + " must have " +
                                std::to_string(m.spec().channels) + " channels");
  }

  const int S = a_test.total_scale();
  const bool vsr = m.spec().family == Family::vsr_style;
  if (!vsr && m.effective_scale() != S) {
    throw std::invalid_argument("finetune: degradation total scale " + std::to_string(S) +
                                " does not match model scale " +
                                std::to_string(m.effective_scale()));
  }
  const Tensor input = vsr ? bicubic_resize(y, S, /*down=*/false) : y;
  const Shape sr_shape{1, y.c(), y.h() * S, y.w() * S};
  const Shape back = a_test.out_shape(sr_shape);
  if (!(back == y.shape())) {
    throw std::invalid_argument("finetune: degradation maps SR " + sr_shape.str() +
                                " to " + back.str() + ", expected " + y.shape().str());
  }

  FinetuneResult res;
  res.model = m;
  res.best_monitor = -std::numeric_limits<double>::infinity();

  Model cur = m;
  OptimState opt{cfg.lr, cfg.momentum, {}};
  double plateau_best = -std::numeric_limits<double>::infinity();
  int patience_ctr = 0;
  res.stop_reason = StopReason::max_iters;

  for (int it = 0; it < cfg.max_iters; ++it) {
    Tape tape;
    const int in_id = tape.leaf(input, false);
    const int target = tape.leaf(y, false);
    ModelGraph g = forward_graph(cur, tape, in_id, /*params_require_grad=*/true, nullptr);
    const int pred = tape.linear(g.output, a_test);
    const int loss_id = tape.mse(pred, target);
    const double loss = tape.scalar(loss_id);
    const double psnr = lr_psnr_from_mse(loss);
    res.trace.push_back(TraceRecord{it, loss, psnr});

    if (!std::isfinite(loss)) {
      res.stop_reason = StopReason::non_finite;
      break;
    }
    const double monitor = cfg.monitor == Monitor::lr_psnr
                               ? psnr
                               : cfg.custom_monitor(cur, tape.value(g.output));
    if (monitor > res.best_monitor) {
      res.best_monitor = monitor;
      res.best_iter = it;
      res.model = cur;
    }
    if (it == 0 && loss == 0.0) {
      res.stop_reason = StopReason::already_consistent;
      break;
    }
    if (monitor > plateau_best + cfg.plateau_delta_db) {
      plateau_best = monitor;
      patience_ctr = 0;
    } else if (++patience_ctr >= cfg.patience) {
      res.stop_reason = StopReason::plateau;
      break;
    }

    tape.backward(loss_id);
    std::map<std::string, Tensor> grads;
    for (const auto& [name, id] : g.params) {
      grads.emplace(name, tape.grad(id));
    }
    sgd_step(cur, grads, opt);
  }
  return res;
}

void write_trace_csv(const std::vector<TraceRecord>& trace, StopReason reason,
                     std::ostream& os) {
  os << "iter,loss,lr_psnr_db\n";
  char buf[96];
  for (const TraceRecord& r : trace) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", r.iter, r.loss, r.lr_psnr_db);
    os << buf;
  }
  os << "# stop_reason=" << stop_reason_name(reason) << "\n";
}

void save_trace_csv(const std::vector<TraceRecord>& trace, StopReason reason,
                    const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_trace_csv(trace, reason, f);
  if (!f) throw std::runtime_error("short write to '" + path + "'");
}

}  // namespace srft

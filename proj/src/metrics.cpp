#include "srft/metrics.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace srft {

double mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse");
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = double(a.data()[i]) - double(b.data()[i]);
    acc += d * d;
  }
  return acc / double(a.size());
}

double psnr(const Tensor& a, const Tensor& b, double peak) {
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
  const double m = mse(a, b);
  if (m <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(peak * peak / m));
}

Tensor uncertainty_map(const Model& m, const Tensor& input, int passes, Rng& rng) {
  if (passes < 2) {
    throw std::invalid_argument("uncertainty_map: need at least 2 passes, got " +
                                std::to_string(passes));
  }
  if (input.n() != 1) {
    throw std::invalid_argument("uncertainty_map: expected a single image, got batch " +
                                std::to_string(input.n()));
  }
  // Welford in float64 per output element; exact zero when all passes agree.
  std::vector<double> mean, m2;
  Shape os;
  for (int p = 0; p < passes; ++p) {
    const Tensor out = forward(m, input, &rng);
    if (p == 0) {
      os = out.shape();
      mean.assign(out.size(), 0.0);
      m2.assign(out.size(), 0.0);
    }
    for (size_t i = 0; i < out.size(); ++i) {
      const double x = out.data()[i];
      const double d = x - mean[i];
      mean[i] += d / double(p + 1);
      m2[i] += d * (x - mean[i]);
    }
  }
  Tensor map(1, 1, os.h, os.w);
  const size_t plane = size_t(os.h) * os.w;
  for (size_t i = 0; i < plane; ++i) {
    double acc = 0.0;
    for (int c = 0; c < os.c; ++c) acc += m2[size_t(c) * plane + i];
    map.data()[i] = float(acc / (double(os.c) * double(passes - 1)));
  }
  return map;
}

Tensor render_variance(const Tensor& var) {
  float lo = var.data()[0], hi = var.data()[0];
  for (size_t i = 0; i < var.size(); ++i) {
    lo = std::min(lo, var.data()[i]);
    hi = std::max(hi, var.data()[i]);
  }
  Tensor out(var.shape());
  if (hi <= lo) {
    out.fill(1.f);
    return out;
  }
  const double range = double(hi) - double(lo);
  for (size_t i = 0; i < var.size(); ++i) {
    out.data()[i] = float(1.0 - (double(var.data()[i]) - double(lo)) / range);
  }
  return out;
}

std::vector<EvalRecord> run_benchmark(const Model& m,
                                      const std::vector<std::pair<std::string, Tensor>>& hr_images,
                                      const DegradationSpec& a_test,
                                      const FinetuneConfig& cfg) {
  std::vector<EvalRecord> rows;
  rows.reserve(hr_images.size());
  const int S = a_test.total_scale();
  const bool vsr = m.spec().family == Family::vsr_style;
  for (const auto& [name, x] : hr_images) {
    EvalRecord rec;
    rec.image = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const Tensor y = a_test.apply(x);
      const Tensor input = vsr ? bicubic_resize(y, S, /*down=*/false) : y;
      const Tensor sr0 = forward(m, input);
      rec.psnr_start = psnr(sr0, x);
      rec.lr_psnr_start = psnr(a_test.apply(sr0), y);
      FinetuneResult ft = finetune(m, y, a_test, cfg);
      const Tensor sr1 = forward(ft.model, input);
      rec.psnr_end = psnr(sr1, x);
      rec.lr_psnr_end = psnr(a_test.apply(sr1), y);
      rec.iterations = int(ft.trace.size());
      rec.stop_reason = stop_reason_name(ft.stop_reason);
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back(std::move(rec));
  }
  return rows;
}

EvalRecord average_record(const std::vector<EvalRecord>& rows) {
  EvalRecord avg;
  avg.image = "average";
  int n = 0;
  for (const EvalRecord& r : rows) {
    if (!r.error.empty()) continue;
    avg.psnr_start += r.psnr_start;
    avg.psnr_end += r.psnr_end;
    avg.lr_psnr_start += r.lr_psnr_start;
    avg.lr_psnr_end += r.lr_psnr_end;
    avg.iterations += r.iterations;
    avg.wall_seconds += r.wall_seconds;
    ++n;
  }
  if (n > 0) {
    avg.psnr_start /= n;
    avg.psnr_end /= n;
    avg.lr_psnr_start /= n;
    avg.lr_psnr_end /= n;
    avg.iterations = int(std::lround(double(avg.iterations) / n));
    avg.wall_seconds /= n;
  } else {
    avg.error = "no successful rows";
  }
  return avg;
}

namespace {

std::string fmt_db(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

void write_eval_csv(const std::vector<EvalRecord>& rows, std::ostream& os) {
  os << "image,psnr_start_db,psnr_end_db,lr_psnr_start_db,lr_psnr_end_db,ps,"
        "iterations,wall_seconds,stop_reason,error\n";
  for (const EvalRecord& r : rows) {
    if (!r.error.empty()) {
      std::string msg = r.error;
      for (char& c : msg) {
        if (c == ',' || c == '\n') c = ';';
      }
      os << r.image << ",,,,,n/a,,,," << msg << "\n";
      continue;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", r.wall_seconds);
    os << r.image << "," << fmt_db(r.psnr_start) << "," << fmt_db(r.psnr_end) << ","
       << fmt_db(r.lr_psnr_start) << "," << fmt_db(r.lr_psnr_end) << ",n/a,"
       << r.iterations << "," << buf << "," << r.stop_reason << ",\n";
  }
}

std::string format_eval_table(const std::vector<EvalRecord>& rows) {
  std::ostringstream os;
  os << "# psnr: joint rgb against peak 1, no border crop; ps: n/a (out of scope)\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-14s %10s %10s %10s %10s %6s %6s %8s  %s\n",
                "image", "psnr0", "psnr1", "lrpsnr0", "lrpsnr1", "ps", "iters",
                "seconds", "stop");
  os << line;
  for (const EvalRecord& r : rows) {
    if (!r.error.empty()) {
      std::snprintf(line, sizeof line, "%-14s failed: %s\n", r.image.c_str(),
                    r.error.c_str());
      os << line;
      continue;
    }
    std::snprintf(line, sizeof line,
                  "%-14s %10.4f %10.4f %10.4f %10.4f %6s %6d %8.2f  %s\n",
                  r.image.c_str(), r.psnr_start, r.psnr_end, r.lr_psnr_start,
                  r.lr_psnr_end, "n/a", r.iterations, r.wall_seconds,
                  r.stop_reason.c_str());
    os << line;
  }
  return os.str();
}

}  // namespace srft

#ifndef SPIM_BENCH_HPP
#define SPIM_BENCH_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "spim/common.hpp"
#include "spim/image.hpp"
#include "spim/imaging.hpp"
#include "spim/metrics.hpp"
#include "spim/reconstruct.hpp"
#include "spim/tv.hpp"

namespace spim {

/// One benchmark contender: how to measure (its patterns) and how to invert.
struct MethodSpec {
  Method method = Method::tval3;
  const PatternMatrix* patterns = nullptr;  // forward model (all methods)
  ReconstructResources res;
};

struct BenchmarkConfig {
  double sigma = 0.25;  // gaussian test noise on the standardised scale
  std::uint64_t seed = 99;
  int timing_reps = 3;  // median over this many repetitions
  int jobs = 1;
};

struct BenchmarkRow {
  std::string method;
  double ssim_mean = 0, ssim_std = 0;
  double psnr_mean = 0, psnr_std = 0;
  double ms_mean = 0, ms_std = 0;
  int images = 0;
  int failures = 0;
};

struct BenchmarkDetail {
  int image_id = 0;
  std::string method;
  double ssim = 0, psnr = 0, ms = 0;
  bool failed = false;
};

struct BenchmarkResult {
  std::vector<BenchmarkRow> rows;       // one per method
  std::vector<BenchmarkDetail> detail;  // one per (image, method)
  int warnings = 0;                     // failed reconstructions
};

namespace detail {

inline Image run_method(const MethodSpec& spec, const Measurement& noisy_raw,
                        double& seconds) {
  if (spec.method == Method::led || spec.method == Method::sh_ld) {
    DecodeResult r = decode(*spec.res.ckpt, noisy_raw);
    seconds = r.seconds;
    return std::move(r.image);
  }
  const auto t0 = std::chrono::steady_clock::now();
  auto [img, report] = tval3_reconstruct(*spec.res.patterns, noisy_raw, spec.res.tv);
  seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return std::move(img);
}

inline void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0;
  sd = 0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  for (double x : v) sd += (x - mean) * (x - mean);
  sd = std::sqrt(sd / static_cast<double>(v.size()));
}

} // namespace detail

/// For every (image, method): simulate y through the method's patterns, add
/// gaussian noise of `sigma` on the standardised scale (applied in the raw
/// domain as sigma * std_y, so TV solvers and learned decoders see the same
/// corruption), reconstruct, score, and time (median of `timing_reps`).
inline BenchmarkResult run_benchmark(const std::vector<Image>& images,
                                     const std::vector<MethodSpec>& methods,
                                     const BenchmarkConfig& cfg) {
  if (images.empty()) throw invalid_input("benchmark needs at least one image");
  if (methods.empty()) throw invalid_input("benchmark needs at least one method");
  for (const MethodSpec& spec : methods) {
    if (!spec.patterns) throw invalid_input("method is missing its pattern matrix");
    const bool learned = spec.method == Method::led || spec.method == Method::sh_ld;
    if (learned && !spec.res.ckpt) throw invalid_input("method needs a checkpoint");
    if (!learned && !spec.res.patterns)
      throw invalid_input("method needs a tv pattern matrix");
  }

  BenchmarkResult result;
  result.detail.resize(images.size() * methods.size());

  std::mutex next_mutex;
  std::size_t next_image = 0;
  auto worker = [&]() {
    for (;;) {
      std::size_t img_idx;
      {
        std::lock_guard<std::mutex> lock(next_mutex);
        if (next_image >= images.size()) return;
        img_idx = next_image++;
      }
      const Image& truth = images[img_idx];
      for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        const MethodSpec& spec = methods[mi];
        BenchmarkDetail& row = result.detail[img_idx * methods.size() + mi];
        row.image_id = static_cast<int>(img_idx);
        row.method = method_name(spec.method);
        try {
          Measurement y = forward_measure(*spec.patterns, truth);
          Measurement y_std = standardize(y);
          Measurement noisy = y;
          if (cfg.sigma > 0) {
            Rng rng(cfg.seed, (static_cast<std::uint64_t>(img_idx) << 8) | mi);
            const double amp = cfg.sigma * (y_std.saved_std + 1e-8);
            for (double& v : noisy.values) v += amp * rng.gaussian();
          }
          std::vector<double> times;
          Image out;
          for (int rep = 0; rep < std::max(cfg.timing_reps, 1); ++rep) {
            double seconds = 0;
            out = detail::run_method(spec, noisy, seconds);
            times.push_back(seconds);
          }
          std::sort(times.begin(), times.end());
          row.ms = times[times.size() / 2] * 1e3;
          row.ssim = ssim(truth, out);
          row.psnr = psnr(truth, out);
        } catch (const std::exception&) {
          row.failed = true;
        }
      }
    }
  };

  const int jobs = std::max(cfg.jobs, 1);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    BenchmarkRow row;
    row.method = method_name(methods[mi].method);
    std::vector<double> ssims, psnrs, times;
    for (std::size_t img_idx = 0; img_idx < images.size(); ++img_idx) {
      const BenchmarkDetail& d = result.detail[img_idx * methods.size() + mi];
      if (d.failed) {
        ++row.failures;
        ++result.warnings;
        continue;
      }
      ssims.push_back(d.ssim);
      psnrs.push_back(std::isfinite(d.psnr) ? d.psnr : 200.0);  // +inf sentinel
      times.push_back(d.ms);
    }
    row.images = static_cast<int>(ssims.size());
    detail::mean_std(ssims, row.ssim_mean, row.ssim_std);
    detail::mean_std(psnrs, row.psnr_mean, row.psnr_std);
    detail::mean_std(times, row.ms_mean, row.ms_std);
    result.rows.push_back(std::move(row));
  }
  return result;
}

inline void write_summary_csv(std::ostream& os, const BenchmarkResult& r) {
  os << "method,ssim_mean,ssim_std,psnr_mean,psnr_std,ms_mean,ms_std\n";
  for (const BenchmarkRow& row : r.rows)
    os << row.method << ',' << row.ssim_mean << ',' << row.ssim_std << ','
       << row.psnr_mean << ',' << row.psnr_std << ',' << row.ms_mean << ','
       << row.ms_std << '\n';
}

inline void write_detail_csv(std::ostream& os, const BenchmarkResult& r) {
  os << "image_id,method,ssim,psnr,ms\n";
  for (const BenchmarkDetail& d : r.detail) {
    if (d.failed)
      os << d.image_id << ',' << d.method << ",failed,failed,failed\n";
    else
      os << d.image_id << ',' << d.method << ',' << d.ssim << ',' << d.psnr << ','
         << d.ms << '\n';
  }
}

} // namespace spim

#endif // SPIM_BENCH_HPP

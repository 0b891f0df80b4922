#pragma once

// Image-quality metrics on magnitude sequences. `b` is always the reference.
//
// SSIM uses a uniform square window over fully-contained positions only, with population
// (biased) variances; values are not comparable with 11x11 Gaussian-window SSIM.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cinerecon/tensor.hpp"

namespace cinerecon::metrics {

struct SsimOptions {
  std::size_t window = 7;
  double k1 = 0.01;
  double k2 = 0.03;
  /// Defaults to max(b) over the whole sequence.
  std::optional<double> dynamic_range;
};

inline constexpr double kPsnrCapDb = 200.0;
inline constexpr double kPsnrMseFloor = 1e-20;

/// Mean SSIM of one (rows x cols) image pair with an explicit dynamic range.
double ssim_image(std::span<const double> a, std::span<const double> b, std::size_t rows, std::size_t cols,
                  double dynamic_range, const SsimOptions& opts = {});

/// Per-frame SSIM. A zero dynamic range yields 1.0 for identical inputs and
/// PreconditionError otherwise.
std::vector<double> ssim(const RealImageSequence& a, const RealImageSequence& b, const SsimOptions& opts = {});

/// Per-frame 10 log10(peak^2 / MSE) with peak = max(b) over the sequence unless given.
std::vector<double> psnr(const RealImageSequence& a, const RealImageSequence& b, std::optional<double> peak = {});
double psnr_from_mse(double peak, double mse);

/// Per-frame ||a - b||^2 / ||b||^2. A zero reference frame raises PreconditionError.
std::vector<double> nmse(const RealImageSequence& a, const RealImageSequence& b);
double nmse(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> v);
double stddev(std::span<const double> v);  // population

struct MetricReport {
  std::string method;
  std::vector<double> ssim;
  std::vector<double> psnr_db;
  std::vector<double> nmse;
  double seconds = 0.0;

  double mean_ssim() const { return mean(ssim); }
  double mean_psnr_db() const { return mean(psnr_db); }
  double mean_nmse() const { return mean(nmse); }
};

MetricReport evaluate(const std::string& method, const RealImageSequence& recon, const RealImageSequence& reference,
                      double seconds);

/// CSV columns: method,frame,ssim,psnr_db,nmse,seconds.
void write_csv_header(std::ostream& os);
void write_csv_rows(std::ostream& os, const MetricReport& report);

}  // namespace cinerecon::metrics

#include "cinerecon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "cinerecon/error.hpp"

namespace cinerecon::metrics {

namespace {

void check_dims(const RealImageSequence& a, const RealImageSequence& b, const char* op) {
  if (a.frames() != b.frames() || a.rows() != b.rows() || a.cols() != b.cols()) {
    throw StructuralError(std::string(op) + ": dims differ (" + std::to_string(a.frames()) + "x" +
                          std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                          std::to_string(b.frames()) + "x" + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()) + ")");
  }
}

}  // namespace

double ssim_image(std::span<const double> a, std::span<const double> b, std::size_t rows, std::size_t cols,
                  double dynamic_range, const SsimOptions& opts) {
  const std::size_t win = opts.window;
  if (a.size() != rows * cols || b.size() != rows * cols) throw StructuralError("ssim_image: size mismatch");
  if (win < 1 || win > rows || win > cols) throw ParameterError("ssim window larger than the image");
  if (!(dynamic_range > 0.0)) throw ParameterError("ssim dynamic range must be positive");
  const double c1 = (opts.k1 * dynamic_range) * (opts.k1 * dynamic_range);
  const double c2 = (opts.k2 * dynamic_range) * (opts.k2 * dynamic_range);
  const double n = static_cast<double>(win * win);

  double total = 0.0;
  for (std::size_t y = 0; y + win <= rows; ++y) {
    for (std::size_t x = 0; x + win <= cols; ++x) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (std::size_t dy = 0; dy < win; ++dy) {
        const std::size_t row = (y + dy) * cols + x;
        for (std::size_t dx = 0; dx < win; ++dx) {
          const double va = a[row + dx], vb = b[row + dx];
          sa += va;
          sb += vb;
          saa += va * va;
          sbb += vb * vb;
          sab += va * vb;
        }
      }
      const double ma = sa / n, mb = sb / n;
      const double va = saa / n - ma * ma, vb = sbb / n - mb * mb, cov = sab / n - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
  }
  return total / static_cast<double>((rows - win + 1) * (cols - win + 1));
}

std::vector<double> ssim(const RealImageSequence& a, const RealImageSequence& b, const SsimOptions& opts) {
  check_dims(a, b, "ssim");
  const double range = opts.dynamic_range.value_or(b.max());
  std::vector<double> out(a.frames());
  if (range == 0.0) {
    if (!(a == b)) throw PreconditionError("ssim: reference has zero dynamic range and inputs differ");
    std::fill(out.begin(), out.end(), 1.0);
    return out;
  }
  for (std::size_t t = 0; t < a.frames(); ++t) {
    const auto fa = a.frame(t), fb = b.frame(t);
    // Identical frames score exactly 1 regardless of rounding in the windowed sums.
    out[t] = std::equal(fa.begin(), fa.end(), fb.begin()) ? 1.0 : ssim_image(fa, fb, a.rows(), a.cols(), range, opts);
  }
  return out;
}

double psnr_from_mse(double peak, double mse) {
  if (mse < kPsnrMseFloor) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

std::vector<double> psnr(const RealImageSequence& a, const RealImageSequence& b, std::optional<double> peak) {
  check_dims(a, b, "psnr");
  const double p = peak.value_or(b.max());
  std::vector<double> out(a.frames());
  for (std::size_t t = 0; t < a.frames(); ++t) {
    const auto fa = a.frame(t), fb = b.frame(t);
    double se = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) se += (fa[i] - fb[i]) * (fa[i] - fb[i]);
    out[t] = psnr_from_mse(p, se / static_cast<double>(fa.size()));
  }
  return out;
}

double nmse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw StructuralError("nmse: size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  if (den == 0.0) throw PreconditionError("nmse: reference has zero norm");
  return num / den;
}

std::vector<double> nmse(const RealImageSequence& a, const RealImageSequence& b) {
  check_dims(a, b, "nmse");
  std::vector<double> out(a.frames());
  for (std::size_t t = 0; t < a.frames(); ++t) out[t] = nmse(a.frame(t), b.frame(t));
  return out;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

MetricReport evaluate(const std::string& method, const RealImageSequence& recon, const RealImageSequence& reference,
                      double seconds) {
  return {method, ssim(recon, reference), psnr(recon, reference), nmse(recon, reference), seconds};
}

void write_csv_header(std::ostream& os) { os << "method,frame,ssim,psnr_db,nmse,seconds\n"; }

void write_csv_rows(std::ostream& os, const MetricReport& report) {
  const auto flags = os.flags();
  const auto prec = os.precision(10);
  for (std::size_t t = 0; t < report.ssim.size(); ++t) {
    os << report.method << ',' << t << ',' << report.ssim[t] << ',' << report.psnr_db[t] << ',' << report.nmse[t]
       << ',' << report.seconds << '\n';
  }
  os.precision(prec);
  os.flags(flags);
}

}  // namespace cinerecon::metrics

#include "cinerecon/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "cinerecon/error.hpp"

namespace cinerecon {

namespace {

// FFTW planning is not thread-safe; execution of an existing plan is.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(std::size_t rows, std::size_t cols, int sign) {
    const std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(rows, cols, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    auto* buf = fftw_alloc_complex(rows * cols);
    // FFTW_UNALIGNED: plans are executed on caller-owned buffers of arbitrary alignment.
    fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), buf, buf, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
    if (plan == nullptr) throw NumericalError("FFTW failed to create a plan");
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> plans_;
};

void centered_transform(std::span<const cplx> in, std::span<cplx> out, std::size_t rows, std::size_t cols,
                        int sign) {
  const std::size_t n = rows * cols;
  if (in.size() != n || out.size() != n) throw StructuralError("fft plane size does not match rows*cols");
  thread_local std::vector<cplx> work;
  work.resize(n);

  // ifftshift: work[j] = in[(j + n/2) mod n] along each axis.
  const std::size_t hr = rows / 2;
  const std::size_t hc = cols / 2;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t sr = (r + hr) % rows;
    for (std::size_t c = 0; c < cols; ++c) work[r * cols + c] = in[sr * cols + (c + hc) % cols];
  }

  auto* buf = reinterpret_cast<fftw_complex*>(work.data());
  fftw_execute_dft(PlanCache::instance().get(rows, cols, sign), buf, buf);

  // fftshift: out[j] = work[(j - n/2) mod n].
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t sr = (r + rows - hr) % rows;
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = work[sr * cols + (c + cols - hc) % cols] * scale;
  }
}

ComplexCine transform_all(const ComplexCine& x, Domain result_domain, int sign) {
  const auto& d = x.dims();
  ComplexCine out(d, result_domain);
  for (std::size_t t = 0; t < d.frames; ++t) {
    for (std::size_t c = 0; c < d.coils; ++c) centered_transform(x.slice(t, c), out.slice(t, c), d.rows, d.cols, sign);
  }
  return out;
}

}  // namespace

void fft2c_plane(std::span<const cplx> in, std::span<cplx> out, std::size_t rows, std::size_t cols) {
  centered_transform(in, out, rows, cols, FFTW_FORWARD);
}

void ifft2c_plane(std::span<const cplx> in, std::span<cplx> out, std::size_t rows, std::size_t cols) {
  centered_transform(in, out, rows, cols, FFTW_BACKWARD);
}

ComplexCine fft2c(const ComplexCine& image) {
  image.expect_domain(Domain::image, "fft2c");
  return transform_all(image, Domain::kspace, FFTW_FORWARD);
}

ComplexCine ifft2c(const ComplexCine& kspace) {
  kspace.expect_domain(Domain::kspace, "ifft2c");
  return transform_all(kspace, Domain::image, FFTW_BACKWARD);
}

RealImageSequence rss_combine(const ComplexCine& image) {
  const auto& d = image.dims();
  std::vector<double> out(d.frames * d.slice_size(), 0.0);
  for (std::size_t t = 0; t < d.frames; ++t) {
    double* dst = out.data() + t * d.slice_size();
    for (std::size_t c = 0; c < d.coils; ++c) {
      auto plane = image.slice(t, c);
      for (std::size_t i = 0; i < plane.size(); ++i) dst[i] += std::norm(plane[i]);
    }
    for (std::size_t i = 0; i < d.slice_size(); ++i) dst[i] = std::sqrt(dst[i]);
  }
  return RealImageSequence(d.frames, d.rows, d.cols, std::move(out));
}

RealImageSequence magnitude(const ComplexCine& image) {
  if (image.dims().coils != 1) throw StructuralError("magnitude expects a single-coil cine");
  return rss_combine(image);
}

}  // namespace cinerecon

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cinerecon/cs.hpp"
#include "cinerecon/error.hpp"
#include "cinerecon/fft.hpp"

namespace cinerecon::cs {

namespace {

void check_sense_shapes(const CineDims& d, const CoilSensitivities& sens, const SamplingMask& mask, const char* op) {
  if (sens.rows != d.rows || sens.cols != d.cols) {
    throw StructuralError(std::string(op) + ": sensitivity maps do not match image size " + d.to_string());
  }
  if (mask.frames != d.frames || mask.lines != d.cols) {
    throw StructuralError(std::string(op) + ": mask does not match " + d.to_string());
  }
}

}  // namespace

CoilSensitivities estimate_sensitivities(const ComplexCine& k_us, const SamplingMask& mask, std::size_t acs_width) {
  k_us.expect_domain(Domain::kspace, "estimate_sensitivities");
  const auto& d = k_us.dims();
  if (mask.frames != d.frames || mask.lines != d.cols) throw StructuralError("estimate_sensitivities: mask shape mismatch");
  if (acs_width < 1 || acs_width > d.cols) throw ParameterError("acs_width must be in [1, W]");
  const std::size_t a0 = sampling::acs_start(d.cols, acs_width);
  for (std::size_t t = 0; t < d.frames; ++t) {
    for (std::size_t k = a0; k < a0 + acs_width; ++k) {
      if (!mask.at(t, k)) {
        throw PreconditionError("ACS line " + std::to_string(k) + " is not sampled in frame " + std::to_string(t));
      }
    }
  }

  // Hamming taper whose 0.08 end points fall on the first unsampled column on either side, so
  // every calibration column keeps a usable weight even for a 4-line band.
  std::vector<double> window(acs_width);
  for (std::size_t j = 0; j < acs_width; ++j) {
    window[j] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(j + 1) /
                                       static_cast<double>(acs_width + 1));
  }

  CoilSensitivities s(d.coils, d.rows, d.cols);
  std::vector<cplx> plane(d.slice_size());
  for (std::size_t c = 0; c < d.coils; ++c) {
    std::fill(plane.begin(), plane.end(), cplx{});
    for (std::size_t k = a0; k < a0 + acs_width; ++k) {
      std::size_t count = 0;
      for (std::size_t t = 0; t < d.frames; ++t) count += mask.at(t, k) ? 1 : 0;
      for (std::size_t h = 0; h < d.rows; ++h) {
        cplx acc{};
        for (std::size_t t = 0; t < d.frames; ++t) {
          if (mask.at(t, k)) acc += k_us(t, c, h, k);
        }
        plane[h * d.cols + k] = acc / static_cast<double>(count) * window[k - a0];
      }
    }
    ifft2c_plane(plane, s.map(c), d.rows, d.cols);
  }

  std::vector<double> rss(d.slice_size(), 0.0);
  for (std::size_t c = 0; c < d.coils; ++c) {
    auto m = s.map(c);
    for (std::size_t i = 0; i < rss.size(); ++i) rss[i] += std::norm(m[i]);
  }
  for (auto& v : rss) v = std::sqrt(v);
  const double floor = 1e-6 * *std::max_element(rss.begin(), rss.end());
  for (std::size_t c = 0; c < d.coils; ++c) {
    auto m = s.map(c);
    for (std::size_t i = 0; i < rss.size(); ++i) m[i] = (rss[i] < floor || rss[i] == 0.0) ? cplx{} : m[i] / rss[i];
  }
  return s;
}

ComplexCine sense_forward(const ComplexCine& x, const CoilSensitivities& sens, const SamplingMask& mask) {
  x.expect_domain(Domain::image, "sense_forward");
  const auto& d = x.dims();
  if (d.coils != 1) throw StructuralError("sense_forward expects a coil-combined (C=1) image");
  check_sense_shapes(d, sens, mask, "sense_forward");
  ComplexCine k({d.frames, sens.coils, d.rows, d.cols}, Domain::kspace);
  std::vector<cplx> buf(d.slice_size());
  for (std::size_t t = 0; t < d.frames; ++t) {
    auto img = x.slice(t, 0);
    for (std::size_t c = 0; c < sens.coils; ++c) {
      auto map = sens.map(c);
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = map[i] * img[i];
      auto out = k.slice(t, c);
      fft2c_plane(buf, out, d.rows, d.cols);
      for (std::size_t h = 0; h < d.rows; ++h) {
        for (std::size_t w = 0; w < d.cols; ++w) {
          if (!mask.at(t, w)) out[h * d.cols + w] = cplx{};
        }
      }
    }
  }
  return k;
}

ComplexCine sense_adjoint(const ComplexCine& k, const CoilSensitivities& sens, const SamplingMask& mask) {
  k.expect_domain(Domain::kspace, "sense_adjoint");
  const auto& d = k.dims();
  if (d.coils != sens.coils) throw StructuralError("sense_adjoint: coil count does not match sensitivities");
  check_sense_shapes(d, sens, mask, "sense_adjoint");
  ComplexCine x({d.frames, 1, d.rows, d.cols}, Domain::image);
  std::vector<cplx> buf(d.slice_size());
  for (std::size_t t = 0; t < d.frames; ++t) {
    auto out = x.slice(t, 0);
    for (std::size_t c = 0; c < d.coils; ++c) {
      auto src = k.slice(t, c);
      for (std::size_t h = 0; h < d.rows; ++h) {
        for (std::size_t w = 0; w < d.cols; ++w) {
          buf[h * d.cols + w] = mask.at(t, w) ? src[h * d.cols + w] : cplx{};
        }
      }
      ifft2c_plane(buf, buf, d.rows, d.cols);
      auto map = sens.map(c);
      for (std::size_t i = 0; i < buf.size(); ++i) out[i] += std::conj(map[i]) * buf[i];
    }
  }
  return x;
}

ComplexCine temporal_diff(const ComplexCine& x) {
  const auto& d = x.dims();
  if (d.frames < 2) throw ParameterError("temporal_diff needs at least 2 frames");
  ComplexCine out({d.frames - 1, d.coils, d.rows, d.cols}, x.domain());
  const std::size_t frame = d.coils * d.slice_size();
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t t = 0; t + 1 < d.frames; ++t) {
    for (std::size_t i = 0; i < frame; ++i) dst[t * frame + i] = src[(t + 1) * frame + i] - src[t * frame + i];
  }
  return out;
}

ComplexCine temporal_diff_adjoint(const ComplexCine& dd) {
  const auto& d = dd.dims();
  const std::size_t frames = d.frames + 1;
  ComplexCine out({frames, d.coils, d.rows, d.cols}, dd.domain());
  const std::size_t frame = d.coils * d.slice_size();
  auto src = dd.data();
  auto dst = out.data();
  // (D^H d)[t] = d[t-1] - d[t], with d[-1] = d[T-1] = 0.
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < frame; ++i) {
      cplx v{};
      if (t >= 1) v += src[(t - 1) * frame + i];
      if (t + 1 < frames) v -= src[t * frame + i];
      dst[t * frame + i] = v;
    }
  }
  return out;
}

}  // namespace cinerecon::cs

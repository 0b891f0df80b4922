#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "cinerecon/cs.hpp"
#include "cinerecon/error.hpp"

namespace cinerecon::cs {

namespace {

constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

void check_levels(const CineDims& d, std::size_t levels) {
  const std::size_t f = std::size_t{1} << levels;
  if (levels > 20 || d.rows % f != 0 || d.cols % f != 0) {
    throw ParameterError("Haar transform with " + std::to_string(levels) + " levels needs H and W divisible by " +
                         std::to_string(f) + ", got " + std::to_string(d.rows) + "x" + std::to_string(d.cols));
  }
}

// One analysis step on a strided 1-D line of even length n.
void analyze(cplx* line, std::size_t n, std::size_t stride, std::vector<cplx>& tmp) {
  const std::size_t half = n / 2;
  tmp.resize(n);
  for (std::size_t j = 0; j < half; ++j) {
    const cplx a = line[(2 * j) * stride];
    const cplx b = line[(2 * j + 1) * stride];
    tmp[j] = (a + b) * kInvSqrt2;
    tmp[half + j] = (a - b) * kInvSqrt2;
  }
  for (std::size_t j = 0; j < n; ++j) line[j * stride] = tmp[j];
}

void synthesize(cplx* line, std::size_t n, std::size_t stride, std::vector<cplx>& tmp) {
  const std::size_t half = n / 2;
  tmp.resize(n);
  for (std::size_t j = 0; j < half; ++j) {
    const cplx s = line[j * stride];
    const cplx d = line[(half + j) * stride];
    tmp[2 * j] = (s + d) * kInvSqrt2;
    tmp[2 * j + 1] = (s - d) * kInvSqrt2;
  }
  for (std::size_t j = 0; j < n; ++j) line[j * stride] = tmp[j];
}

}  // namespace

ComplexCine haar_dwt2(const ComplexCine& img, std::size_t levels) {
  const auto& d = img.dims();
  check_levels(d, levels);
  ComplexCine out = img;
  std::vector<cplx> tmp;
  for (std::size_t t = 0; t < d.frames; ++t) {
    for (std::size_t c = 0; c < d.coils; ++c) {
      cplx* p = out.slice(t, c).data();
      std::size_t rh = d.rows;
      std::size_t rw = d.cols;
      for (std::size_t l = 0; l < levels; ++l) {
        for (std::size_t r = 0; r < rh; ++r) analyze(p + r * d.cols, rw, 1, tmp);
        for (std::size_t col = 0; col < rw; ++col) analyze(p + col, rh, d.cols, tmp);
        rh /= 2;
        rw /= 2;
      }
    }
  }
  return out;
}

ComplexCine haar_idwt2(const ComplexCine& coeffs, std::size_t levels) {
  const auto& d = coeffs.dims();
  check_levels(d, levels);
  ComplexCine out = coeffs;
  std::vector<cplx> tmp;
  for (std::size_t t = 0; t < d.frames; ++t) {
    for (std::size_t c = 0; c < d.coils; ++c) {
      cplx* p = out.slice(t, c).data();
      for (std::size_t l = levels; l-- > 0;) {
        const std::size_t rh = d.rows >> l;
        const std::size_t rw = d.cols >> l;
        for (std::size_t col = 0; col < rw; ++col) synthesize(p + col, rh, d.cols, tmp);
        for (std::size_t r = 0; r < rh; ++r) synthesize(p + r * d.cols, rw, 1, tmp);
      }
    }
  }
  return out;
}

}  // namespace cinerecon::cs

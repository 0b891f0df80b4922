#include "cinerecon/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "cinerecon/error.hpp"
#include "cinerecon/random.hpp"

namespace cinerecon::sampling {

namespace {

void check_mask_shape(const ComplexCine& k, const SamplingMask& m, const char* op) {
  if (m.frames != k.dims().frames || m.lines != k.dims().cols) {
    throw StructuralError(std::string(op) + ": mask (" + std::to_string(m.frames) + ", " + std::to_string(m.lines) +
                          ") does not match k-space " + k.dims().to_string());
  }
}

}  // namespace

SamplingMask::SamplingMask(std::size_t n_frames, std::size_t n_lines)
    : frames(n_frames), lines(n_lines), bits(n_frames * n_lines, 0) {}

std::size_t SamplingMask::count(std::size_t t) const noexcept {
  return static_cast<std::size_t>(std::count(bits.begin() + static_cast<std::ptrdiff_t>(t * lines),
                                             bits.begin() + static_cast<std::ptrdiff_t>((t + 1) * lines), 1));
}

std::size_t SamplingMask::total() const noexcept {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
}

std::size_t lines_per_frame(std::size_t lines, double acceleration) {
  if (!(acceleration >= 1.0)) throw ParameterError("acceleration must be >= 1");
  return static_cast<std::size_t>(std::llround(static_cast<double>(lines) / acceleration));
}

std::size_t acs_start(std::size_t lines, std::size_t n_acs) { return lines / 2 - n_acs / 2; }

std::vector<std::vector<std::size_t>> lh_strata(std::size_t lines, std::size_t n_acs, std::size_t n_strata,
                                                double density_decay) {
  const std::size_t a0 = acs_start(lines, n_acs);
  std::vector<std::size_t> outer;
  std::vector<double> weight;
  const double centre = static_cast<double>(lines / 2);
  const double half = static_cast<double>(lines) / 2.0;
  for (std::size_t k = 0; k < lines; ++k) {
    if (k >= a0 && k < a0 + n_acs) continue;
    outer.push_back(k);
    const double base = std::max(0.0, 1.0 - std::abs(static_cast<double>(k) - centre) / half);
    weight.push_back(std::pow(base, density_decay));
  }
  if (n_strata == 0 || n_strata > outer.size()) {
    throw ParameterError("cannot split " + std::to_string(outer.size()) + " lines into " + std::to_string(n_strata) +
                         " strata");
  }

  std::vector<double> cum(outer.size() + 1, 0.0);
  for (std::size_t i = 0; i < outer.size(); ++i) cum[i + 1] = cum[i] + weight[i];
  const double total = cum.back();

  // Boundary j is the cut index (exclusive end of stratum j) closest to the j-th weight quantile,
  // clamped so every stratum keeps at least one line.
  std::vector<std::vector<std::size_t>> strata(n_strata);
  std::size_t begin = 0;
  for (std::size_t j = 0; j < n_strata; ++j) {
    std::size_t end = outer.size();
    if (j + 1 < n_strata) {
      const double target = total * static_cast<double>(j + 1) / static_cast<double>(n_strata);
      const std::size_t lo = begin + 1;
      const std::size_t hi = outer.size() - (n_strata - j - 1);
      end = lo;
      double best = std::abs(cum[lo] - target);
      for (std::size_t e = lo + 1; e <= hi; ++e) {
        const double err = std::abs(cum[e] - target);
        if (err < best) {
          best = err;
          end = e;
        }
      }
    }
    strata[j].assign(outer.begin() + static_cast<std::ptrdiff_t>(begin), outer.begin() + static_cast<std::ptrdiff_t>(end));
    begin = end;
  }
  return strata;
}

SamplingMask generate_lh_mask(const MaskParams& p) {
  if (p.lines < 2 || p.frames < 1) throw ParameterError("mask needs lines >= 2 and frames >= 1");
  if (!(p.density_decay >= 0.0)) throw ParameterError("density_decay must be >= 0");
  const std::size_t n_samp = lines_per_frame(p.lines, p.acceleration);
  if (p.n_acs > n_samp || n_samp > p.lines) {
    throw ParameterError("infeasible mask: " + std::to_string(n_samp) + " lines per frame with n_acs=" +
                         std::to_string(p.n_acs));
  }
  const std::size_t n_rand = n_samp - p.n_acs;
  if (n_rand == 0) {
    throw ParameterError("infeasible mask: n_acs=" + std::to_string(p.n_acs) + " leaves no randomly sampled lines at r=" +
                         std::to_string(p.acceleration));
  }

  SamplingMask mask(p.frames, p.lines);
  mask.n_acs = p.n_acs;
  mask.target_r = p.acceleration;
  const std::size_t a0 = acs_start(p.lines, p.n_acs);
  for (std::size_t t = 0; t < p.frames; ++t) {
    for (std::size_t k = a0; k < a0 + p.n_acs; ++k) mask.set(t, k, true);
  }

  std::mt19937_64 rng(p.seed);
  for (auto& stratum : lh_strata(p.lines, p.n_acs, n_rand, p.density_decay)) {
    // The shuffled order is read cyclically over time.
    shuffle(stratum, rng);
    for (std::size_t t = 0; t < p.frames; ++t) mask.set(t, stratum[t % stratum.size()], true);
  }
  return mask;
}

double effective_acceleration(const SamplingMask& mask) {
  const std::size_t ones = mask.total();
  if (ones == 0) throw ParameterError("degenerate mask: no sampled lines");
  return static_cast<double>(mask.frames * mask.lines) / static_cast<double>(ones);
}

ComplexCine undersample(const ComplexCine& k_full, const SamplingMask& mask) {
  k_full.expect_domain(Domain::kspace, "undersample");
  check_mask_shape(k_full, mask, "undersample");
  ComplexCine out = k_full;
  const auto& d = k_full.dims();
  for (std::size_t t = 0; t < d.frames; ++t) {
    for (std::size_t c = 0; c < d.coils; ++c) {
      auto plane = out.slice(t, c);
      for (std::size_t h = 0; h < d.rows; ++h) {
        for (std::size_t w = 0; w < d.cols; ++w) {
          if (!mask.at(t, w)) plane[h * d.cols + w] = cplx{};
        }
      }
    }
  }
  return out;
}

ComplexCine data_consistency(const ComplexCine& k_pred, const ComplexCine& k_acq, const SamplingMask& mask) {
  k_pred.expect_domain(Domain::kspace, "data_consistency");
  k_acq.expect_domain(Domain::kspace, "data_consistency");
  if (k_pred.dims() != k_acq.dims()) {
    throw StructuralError("data_consistency: prediction " + k_pred.dims().to_string() + " vs acquisition " +
                          k_acq.dims().to_string());
  }
  check_mask_shape(k_pred, mask, "data_consistency");
  ComplexCine out = k_pred;
  const auto& d = k_pred.dims();
  for (std::size_t t = 0; t < d.frames; ++t) {
    for (std::size_t c = 0; c < d.coils; ++c) {
      auto dst = out.slice(t, c);
      auto acq = k_acq.slice(t, c);
      for (std::size_t h = 0; h < d.rows; ++h) {
        for (std::size_t w = 0; w < d.cols; ++w) {
          if (mask.at(t, w)) dst[h * d.cols + w] = acq[h * d.cols + w];
        }
      }
    }
  }
  return out;
}

CxtTensor to_cxt(const SamplingMask& mask) {
  std::vector<float> values(mask.bits.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = mask.bits[i] ? 1.0f : 0.0f;
  return make_real32({mask.frames, mask.lines}, values);
}

SamplingMask mask_from_cxt(const CxtTensor& t) {
  if (t.dims.size() != 2) throw StructuralError("mask tensor must have rank 2 (T, lines)");
  const auto values = real_values(t);
  SamplingMask mask(t.dims[0], t.dims[1]);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] != 0.0 && values[i] != 1.0) throw FormatError("mask entries must be 0 or 1", kCxtPreambleBytes + 16 + 4 * i);
    mask.bits[i] = values[i] != 0.0 ? 1 : 0;
  }
  std::size_t n_acs = 0;
  for (std::size_t w = 1; w <= mask.lines; ++w) {
    const std::size_t a0 = acs_start(mask.lines, w);
    bool all = true;
    for (std::size_t t = 0; t < mask.frames && all; ++t) {
      for (std::size_t k = a0; k < a0 + w && all; ++k) all = mask.at(t, k);
    }
    if (!all) break;
    n_acs = w;
  }
  mask.n_acs = n_acs;
  mask.target_r = mask.total() > 0 ? effective_acceleration(mask) : 1.0;
  return mask;
}

}  // namespace cinerecon::sampling

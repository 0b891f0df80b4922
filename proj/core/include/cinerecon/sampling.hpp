#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cinerecon/cxt.hpp"
#include "cinerecon/tensor.hpp"

namespace cinerecon::sampling {

/// Binary Cartesian line mask, frames x phase-encode lines (image columns).
struct SamplingMask {
  std::size_t frames = 0;
  std::size_t lines = 0;
  std::vector<std::uint8_t> bits;
  std::size_t n_acs = 0;
  double target_r = 1.0;

  SamplingMask() = default;
  SamplingMask(std::size_t n_frames, std::size_t n_lines);

  bool at(std::size_t t, std::size_t line) const noexcept { return bits[t * lines + line] != 0; }
  void set(std::size_t t, std::size_t line, bool on) noexcept { bits[t * lines + line] = on ? 1 : 0; }
  std::size_t count(std::size_t t) const noexcept;
  std::size_t total() const noexcept;

  friend bool operator==(const SamplingMask&, const SamplingMask&) = default;
};

struct MaskParams {
  std::size_t lines = 180;
  std::size_t frames = 12;
  double acceleration = 12.0;
  std::size_t n_acs = 4;
  double density_decay = 2.0;
  std::uint64_t seed = 0;
};

/// Lines sampled per frame for a given acceleration: round(lines / r).
std::size_t lines_per_frame(std::size_t lines, double acceleration);

/// First index of the always-sampled centre band: lines/2 - n_acs/2.
std::size_t acs_start(std::size_t lines, std::size_t n_acs);

/// Splits the non-centre lines (index order) into `n_strata` contiguous, non-empty groups of
/// approximately equal total weight, weight(k) = (1 - |k - lines/2| / (lines/2))^decay.
std::vector<std::vector<std::size_t>> lh_strata(std::size_t lines, std::size_t n_acs, std::size_t n_strata,
                                                double density_decay);

/// Variable-density Latin-hypercube mask. Every frame samples the centre band plus one line per
/// stratum; within a stratum of size L the lines follow a seeded random cyclic order, so any L
/// consecutive frames visit L distinct lines.
SamplingMask generate_lh_mask(const MaskParams& params);

/// frames * lines / (number of sampled entries).
double effective_acceleration(const SamplingMask& mask);

/// Zeroes every phase-encode column the mask does not sample. Read-out rows are kept.
ComplexCine undersample(const ComplexCine& k_full, const SamplingMask& mask);

/// Hard data consistency: acquired samples where the mask is set, prediction elsewhere.
ComplexCine data_consistency(const ComplexCine& k_pred, const ComplexCine& k_acq, const SamplingMask& mask);

/// Stored as real32 0/1 with dims (T, lines).
CxtTensor to_cxt(const SamplingMask& mask);
/// n_acs is recovered as the widest centred band sampled in every frame; target_r as the
/// effective acceleration.
SamplingMask mask_from_cxt(const CxtTensor& t);

}  // namespace cinerecon::sampling

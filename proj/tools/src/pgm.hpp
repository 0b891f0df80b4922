#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "cinerecon/tensor.hpp"

namespace cinerecon::cli {

struct Gray16 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint16_t> pixels;  // row-major

  friend bool operator==(const Gray16&, const Gray16&) = default;
};

inline constexpr std::size_t kSeparatorPx = 2;

/// Frame `frame` of each panel side by side with kSeparatorPx black columns in between.
/// Intensities map [0, white] linearly onto [0, 65535] and clip above.
Gray16 montage(const std::vector<const RealImageSequence*>& panels, std::size_t frame, double white);

/// Binary PGM, maxval 65535, big-endian samples.
void write_pgm(const std::filesystem::path& path, const Gray16& img);
Gray16 read_pgm(const std::filesystem::path& path);

}  // namespace cinerecon::cli

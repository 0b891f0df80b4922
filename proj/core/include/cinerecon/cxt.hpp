#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cinerecon/tensor.hpp"

namespace cinerecon {

/// CXT binary tensor file, little-endian:
///   bytes 0-3  magic "CXT1"
///   byte  4    dtype code (see DType)
///   byte  5    ndim, 1..8
///   ndim x u64 dims
///   row-major payload, complex values interleaved (re, im)
enum class DType : std::uint8_t { real32 = 0, real64 = 1, complex64 = 2, complex128 = 3 };

std::size_t element_bytes(DType dtype) noexcept;
const char* to_string(DType dtype) noexcept;

struct CxtTensor {
  DType dtype = DType::real64;
  std::vector<std::uint64_t> dims;
  std::vector<std::byte> payload;

  std::uint64_t numel() const noexcept;

  friend bool operator==(const CxtTensor&, const CxtTensor&) = default;
};

inline constexpr std::size_t kCxtMaxRank = 8;
inline constexpr std::size_t kCxtPreambleBytes = 6;

void write_tensor(const std::filesystem::path& path, const CxtTensor& tensor);
CxtTensor read_tensor(const std::filesystem::path& path);

// Typed payload access. Each throws StructuralError when the dtype does not match.
CxtTensor make_real64(std::vector<std::uint64_t> dims, std::span<const double> values);
CxtTensor make_real32(std::vector<std::uint64_t> dims, std::span<const float> values);
CxtTensor make_complex128(std::vector<std::uint64_t> dims, std::span<const cplx> values);
std::vector<double> real_values(const CxtTensor& t);  // accepts real32 or real64
std::vector<cplx> complex_values(const CxtTensor& t);  // accepts complex64 or complex128

// Domain conversions used by the dataset layout.
CxtTensor to_cxt(const ComplexCine& x);  // complex128, (T, C, H, W)
ComplexCine cine_from_cxt(const CxtTensor& t, Domain domain);
CxtTensor to_cxt(const RealImageSequence& x);  // real64, (T, H, W)
RealImageSequence images_from_cxt(const CxtTensor& t);
CxtTensor to_cxt(const CoilSensitivities& s);  // complex128, (C, H, W)
CoilSensitivities sensitivities_from_cxt(const CxtTensor& t);

}  // namespace cinerecon

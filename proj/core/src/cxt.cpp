#include "cinerecon/cxt.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "cinerecon/error.hpp"

namespace cinerecon {

static_assert(std::endian::native == std::endian::little, "CXT I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 4> kMagic{'C', 'X', 'T', '1'};

template <typename T>
std::vector<std::byte> to_bytes(std::span<const T> values) {
  std::vector<std::byte> out(values.size_bytes());
  if (!out.empty()) std::memcpy(out.data(), values.data(), out.size());
  return out;
}

template <typename T>
std::vector<T> from_bytes(const std::vector<std::byte>& bytes) {
  std::vector<T> out(bytes.size() / sizeof(T));
  if (!out.empty()) std::memcpy(out.data(), bytes.data(), out.size() * sizeof(T));
  return out;
}

void expect_rank(const CxtTensor& t, std::size_t rank, const char* what) {
  if (t.dims.size() != rank) {
    throw StructuralError(std::string(what) + ": expected rank " + std::to_string(rank) + ", file has rank " +
                          std::to_string(t.dims.size()));
  }
}

}  // namespace

std::size_t element_bytes(DType dtype) noexcept {
  switch (dtype) {
    case DType::real32: return 4;
    case DType::real64: return 8;
    case DType::complex64: return 8;
    case DType::complex128: return 16;
  }
  return 0;
}

const char* to_string(DType dtype) noexcept {
  switch (dtype) {
    case DType::real32: return "real32";
    case DType::real64: return "real64";
    case DType::complex64: return "complex64";
    case DType::complex128: return "complex128";
  }
  return "unknown";
}

std::uint64_t CxtTensor::numel() const noexcept {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void write_tensor(const std::filesystem::path& path, const CxtTensor& tensor) {
  if (tensor.dims.empty() || tensor.dims.size() > kCxtMaxRank) throw StructuralError("CXT rank must be 1..8");
  if (tensor.payload.size() != tensor.numel() * element_bytes(tensor.dtype)) {
    throw StructuralError("CXT payload size does not match dims and dtype");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), kMagic.size());
  const std::array<char, 2> codes{static_cast<char>(tensor.dtype), static_cast<char>(tensor.dims.size())};
  out.write(codes.data(), codes.size());
  for (std::uint64_t d : tensor.dims) {
    std::array<char, 8> le{};
    std::memcpy(le.data(), &d, 8);
    out.write(le.data(), le.size());
  }
  out.write(reinterpret_cast<const char*>(tensor.payload.data()), static_cast<std::streamsize>(tensor.payload.size()));
  if (!out) throw IoError("write to " + path.string() + " failed");
}

CxtTensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0, std::ios::beg);

  if (file_size < kCxtPreambleBytes) {
    throw FormatError("truncated CXT preamble: expected " + std::to_string(kCxtPreambleBytes) + " bytes, file has " +
                          std::to_string(file_size),
                      file_size);
  }
  std::array<char, kCxtPreambleBytes> pre{};
  in.read(pre.data(), pre.size());
  if (!std::equal(kMagic.begin(), kMagic.end(), pre.begin())) throw FormatError("bad CXT magic", 0);

  CxtTensor t;
  const auto code = static_cast<std::uint8_t>(pre[4]);
  if (code > 3) throw FormatError("unknown CXT dtype code " + std::to_string(code), 4);
  t.dtype = static_cast<DType>(code);
  const auto ndim = static_cast<std::uint8_t>(pre[5]);
  if (ndim < 1 || ndim > kCxtMaxRank) throw FormatError("CXT ndim " + std::to_string(ndim) + " outside 1..8", 5);

  const std::uint64_t header_bytes = kCxtPreambleBytes + 8ull * ndim;
  if (file_size < header_bytes) {
    throw FormatError("truncated CXT dims: expected " + std::to_string(header_bytes) + " header bytes, file has " +
                          std::to_string(file_size),
                      file_size);
  }
  t.dims.resize(ndim);
  std::uint64_t numel = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    std::array<char, 8> le{};
    in.read(le.data(), le.size());
    std::memcpy(&t.dims[i], le.data(), 8);
    if (t.dims[i] != 0 && numel > std::numeric_limits<std::uint64_t>::max() / t.dims[i]) {
      throw FormatError("CXT dims overflow", kCxtPreambleBytes + 8 * i);
    }
    numel *= t.dims[i];
  }
  const std::uint64_t esize = element_bytes(t.dtype);
  if (numel > std::numeric_limits<std::uint64_t>::max() / esize) throw FormatError("CXT payload size overflow", header_bytes);
  const std::uint64_t expected = header_bytes + numel * esize;
  // Size check happens before the payload allocation.
  if (file_size != expected) {
    throw FormatError("CXT size mismatch: expected " + std::to_string(expected) + " bytes in total (" +
                          std::to_string(numel * esize) + " payload), file has " + std::to_string(file_size),
                      std::min(file_size, expected));
  }
  t.payload.resize(numel * esize);
  in.read(reinterpret_cast<char*>(t.payload.data()), static_cast<std::streamsize>(t.payload.size()));
  if (!in) throw IoError("read from " + path.string() + " failed");
  return t;
}

CxtTensor make_real64(std::vector<std::uint64_t> dims, std::span<const double> values) {
  CxtTensor t{DType::real64, std::move(dims), to_bytes(values)};
  if (t.numel() != values.size()) throw StructuralError("make_real64: value count does not match dims");
  return t;
}

CxtTensor make_real32(std::vector<std::uint64_t> dims, std::span<const float> values) {
  CxtTensor t{DType::real32, std::move(dims), to_bytes(values)};
  if (t.numel() != values.size()) throw StructuralError("make_real32: value count does not match dims");
  return t;
}

CxtTensor make_complex128(std::vector<std::uint64_t> dims, std::span<const cplx> values) {
  CxtTensor t{DType::complex128, std::move(dims), to_bytes(values)};
  if (t.numel() != values.size()) throw StructuralError("make_complex128: value count does not match dims");
  return t;
}

std::vector<double> real_values(const CxtTensor& t) {
  if (t.dtype == DType::real64) return from_bytes<double>(t.payload);
  if (t.dtype == DType::real32) {
    const auto f = from_bytes<float>(t.payload);
    return {f.begin(), f.end()};
  }
  throw StructuralError(std::string("expected a real tensor, got ") + to_string(t.dtype));
}

std::vector<cplx> complex_values(const CxtTensor& t) {
  if (t.dtype == DType::complex128) return from_bytes<cplx>(t.payload);
  if (t.dtype == DType::complex64) {
    const auto f = from_bytes<std::complex<float>>(t.payload);
    std::vector<cplx> out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = cplx(f[i].real(), f[i].imag());
    return out;
  }
  throw StructuralError(std::string("expected a complex tensor, got ") + to_string(t.dtype));
}

CxtTensor to_cxt(const ComplexCine& x) {
  const auto& d = x.dims();
  return make_complex128({d.frames, d.coils, d.rows, d.cols}, x.data());
}

ComplexCine cine_from_cxt(const CxtTensor& t, Domain domain) {
  expect_rank(t, 4, "cine tensor");
  CineDims d{t.dims[0], t.dims[1], t.dims[2], t.dims[3]};
  return ComplexCine(d, domain, complex_values(t));
}

CxtTensor to_cxt(const RealImageSequence& x) {
  return make_real64({x.frames(), x.rows(), x.cols()}, x.data());
}

RealImageSequence images_from_cxt(const CxtTensor& t) {
  expect_rank(t, 3, "image sequence tensor");
  return RealImageSequence(t.dims[0], t.dims[1], t.dims[2], real_values(t));
}

CxtTensor to_cxt(const CoilSensitivities& s) { return make_complex128({s.coils, s.rows, s.cols}, s.data); }

CoilSensitivities sensitivities_from_cxt(const CxtTensor& t) {
  expect_rank(t, 3, "coil sensitivity tensor");
  CoilSensitivities s(t.dims[0], t.dims[1], t.dims[2]);
  s.data = complex_values(t);
  return s;
}

}  // namespace cinerecon

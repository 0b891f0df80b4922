#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cinerecon {

using cplx = std::complex<double>;

enum class Domain { image, kspace };

const char* to_string(Domain d) noexcept;

/// Extents of a cine tensor: frames x coils x rows x columns, row-major.
struct CineDims {
  std::size_t frames = 0;
  std::size_t coils = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t slice_size() const noexcept { return rows * cols; }
  std::size_t size() const noexcept { return frames * coils * rows * cols; }
  std::string to_string() const;

  friend bool operator==(const CineDims&, const CineDims&) = default;
};

/// Complex image or k-space sequence. The domain tag is metadata only.
class ComplexCine {
 public:
  ComplexCine(CineDims dims, Domain domain);
  ComplexCine(CineDims dims, Domain domain, std::vector<cplx> data);

  const CineDims& dims() const noexcept { return dims_; }
  Domain domain() const noexcept { return domain_; }

  std::span<cplx> data() noexcept { return data_; }
  std::span<const cplx> data() const noexcept { return data_; }

  cplx& operator()(std::size_t t, std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[index(t, c, h, w)];
  }
  const cplx& operator()(std::size_t t, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[index(t, c, h, w)];
  }

  /// The rows x cols plane for one (frame, coil).
  std::span<cplx> slice(std::size_t t, std::size_t c) noexcept;
  std::span<const cplx> slice(std::size_t t, std::size_t c) const noexcept;

  /// Throws StructuralError if the tag is not `expected`.
  void expect_domain(Domain expected, const char* op) const;

  /// Same data, different tag.
  ComplexCine retagged(Domain d) const&;
  ComplexCine retagged(Domain d) &&;

  /// Extracts coil `c` as a single-coil cine.
  ComplexCine coil(std::size_t c) const;

  double norm() const noexcept;

 private:
  std::size_t index(std::size_t t, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return ((t * dims_.coils + c) * dims_.rows + h) * dims_.cols + w;
  }

  CineDims dims_;
  Domain domain_;
  std::vector<cplx> data_;
};

/// Nonnegative magnitude sequence, frames x rows x cols.
class RealImageSequence {
 public:
  RealImageSequence(std::size_t frames, std::size_t rows, std::size_t cols);
  RealImageSequence(std::size_t frames, std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t frames() const noexcept { return frames_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t frame_size() const noexcept { return rows_ * cols_; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<const double> frame(std::size_t t) const noexcept {
    return std::span<const double>(data_).subspan(t * frame_size(), frame_size());
  }
  double operator()(std::size_t t, std::size_t h, std::size_t w) const noexcept {
    return data_[(t * rows_ + h) * cols_ + w];
  }
  double max() const noexcept;

  friend bool operator==(const RealImageSequence&, const RealImageSequence&) = default;

 private:
  std::size_t frames_;
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

/// Per-pixel complex coil response, coils x rows x cols.
struct CoilSensitivities {
  std::size_t coils = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<cplx> data;

  CoilSensitivities() = default;
  CoilSensitivities(std::size_t n_coils, std::size_t n_rows, std::size_t n_cols);

  std::span<cplx> map(std::size_t c) noexcept { return std::span<cplx>(data).subspan(c * rows * cols, rows * cols); }
  std::span<const cplx> map(std::size_t c) const noexcept {
    return std::span<const cplx>(data).subspan(c * rows * cols, rows * cols);
  }
};

}  // namespace cinerecon

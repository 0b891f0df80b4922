#include "cinerecon/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "cinerecon/error.hpp"

namespace cinerecon {

const char* to_string(Domain d) noexcept { return d == Domain::image ? "image" : "kspace"; }

std::string CineDims::to_string() const {
  return "(" + std::to_string(frames) + ", " + std::to_string(coils) + ", " + std::to_string(rows) + ", " +
         std::to_string(cols) + ")";
}

namespace {

void validate(const CineDims& d) {
  if (d.frames < 1 || d.coils < 1 || d.rows < 2 || d.cols < 2) {
    throw StructuralError("cine dims " + d.to_string() + " violate T>=1, C>=1, H>=2, W>=2");
  }
}

}  // namespace

ComplexCine::ComplexCine(CineDims dims, Domain domain) : dims_(dims), domain_(domain) {
  validate(dims_);
  data_.assign(dims_.size(), cplx{});
}

ComplexCine::ComplexCine(CineDims dims, Domain domain, std::vector<cplx> data)
    : dims_(dims), domain_(domain), data_(std::move(data)) {
  validate(dims_);
  if (data_.size() != dims_.size()) {
    throw StructuralError("cine data length " + std::to_string(data_.size()) + " does not match dims " +
                          dims_.to_string());
  }
}

std::span<cplx> ComplexCine::slice(std::size_t t, std::size_t c) noexcept {
  return std::span<cplx>(data_).subspan(index(t, c, 0, 0), dims_.slice_size());
}

std::span<const cplx> ComplexCine::slice(std::size_t t, std::size_t c) const noexcept {
  return std::span<const cplx>(data_).subspan(index(t, c, 0, 0), dims_.slice_size());
}

void ComplexCine::expect_domain(Domain expected, const char* op) const {
  if (domain_ != expected) {
    throw StructuralError(std::string(op) + ": expected " + to_string(expected) + " input, got " +
                          to_string(domain_));
  }
}

ComplexCine ComplexCine::retagged(Domain d) const& {
  ComplexCine out = *this;
  out.domain_ = d;
  return out;
}

ComplexCine ComplexCine::retagged(Domain d) && {
  domain_ = d;
  return std::move(*this);
}

ComplexCine ComplexCine::coil(std::size_t c) const {
  if (c >= dims_.coils) throw StructuralError("coil index out of range");
  ComplexCine out({dims_.frames, 1, dims_.rows, dims_.cols}, domain_);
  for (std::size_t t = 0; t < dims_.frames; ++t) {
    auto src = slice(t, c);
    std::copy(src.begin(), src.end(), out.slice(t, 0).begin());
  }
  return out;
}

double ComplexCine::norm() const noexcept {
  double acc = 0.0;
  for (const auto& z : data_) acc += std::norm(z);
  return std::sqrt(acc);
}

RealImageSequence::RealImageSequence(std::size_t frames, std::size_t rows, std::size_t cols)
    : RealImageSequence(frames, rows, cols, std::vector<double>(frames * rows * cols, 0.0)) {}

RealImageSequence::RealImageSequence(std::size_t frames, std::size_t rows, std::size_t cols,
                                     std::vector<double> data)
    : frames_(frames), rows_(rows), cols_(cols), data_(std::move(data)) {
  if (frames_ < 1 || rows_ < 1 || cols_ < 1) throw StructuralError("image sequence with an empty dimension");
  if (data_.size() != frames_ * rows_ * cols_) throw StructuralError("image sequence data length mismatch");
  for (double v : data_) {
    if (!(v >= 0.0)) throw StructuralError("magnitude image contains a negative or NaN value");
  }
}

double RealImageSequence::max() const noexcept { return *std::max_element(data_.begin(), data_.end()); }

CoilSensitivities::CoilSensitivities(std::size_t n_coils, std::size_t n_rows, std::size_t n_cols)
    : coils(n_coils), rows(n_rows), cols(n_cols), data(n_coils * n_rows * n_cols) {
  if (n_coils < 1 || n_rows < 2 || n_cols < 2) throw StructuralError("coil sensitivity dims too small");
}

}  // namespace cinerecon

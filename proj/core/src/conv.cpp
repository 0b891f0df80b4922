#include <Eigen/Core>

#include <algorithm>
#include <string>

#include "cinerecon/autodiff.hpp"
#include "cinerecon/error.hpp"

namespace cinerecon::ad {

namespace {

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapMat = Eigen::Map<RowMat<S>>;
template <typename S>
using ConstMapMat = Eigen::Map<const RowMat<S>>;

// Rows [y0, y1) of the im2col matrix, stored as (C*9) x ((y1 - y0) * W):
// cols[(c*9 + ky*3 + kx), ((y - y0)*W + x)] = in[c, y+ky-1, x+kx-1], zero outside.
template <typename S>
void im2col(const S* in, std::size_t channels, std::size_t h, std::size_t w, std::size_t y0, std::size_t y1,
            S* cols) {
  const std::size_t hw = h * w;
  const std::size_t n = (y1 - y0) * w;
  for (std::size_t c = 0; c < channels; ++c) {
    const S* plane = in + c * hw;
    for (std::size_t ky = 0; ky < kKernel; ++ky) {
      for (std::size_t kx = 0; kx < kKernel; ++kx) {
        S* row = cols + ((c * kKernel + ky) * kKernel + kx) * n;
        for (std::size_t y = y0; y < y1; ++y) {
          S* dst = row + (y - y0) * w;
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(dst, dst + w, S(0));
            continue;
          }
          const S* src = plane + static_cast<std::size_t>(sy) * w;
          if (kx == 0) {
            dst[0] = S(0);
            std::copy(src, src + w - 1, dst + 1);
          } else if (kx == 1) {
            std::copy(src, src + w, dst);
          } else {
            std::copy(src + 1, src + w, dst);
            dst[w - 1] = S(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col over the same row range: scatter-add columns into the image gradient.
template <typename S>
void col2im_add(const S* cols, std::size_t channels, std::size_t h, std::size_t w, std::size_t y0, std::size_t y1,
                S* out) {
  const std::size_t hw = h * w;
  const std::size_t n = (y1 - y0) * w;
  for (std::size_t c = 0; c < channels; ++c) {
    S* plane = out + c * hw;
    for (std::size_t ky = 0; ky < kKernel; ++ky) {
      for (std::size_t kx = 0; kx < kKernel; ++kx) {
        const S* row = cols + ((c * kKernel + ky) * kKernel + kx) * n;
        for (std::size_t y = y0; y < y1; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          S* dst = plane + static_cast<std::size_t>(sy) * w;
          const S* src = row + (y - y0) * w;
          if (kx == 0) {
            for (std::size_t x = 1; x < w; ++x) dst[x - 1] += src[x];
          } else if (kx == 1) {
            for (std::size_t x = 0; x < w; ++x) dst[x] += src[x];
          } else {
            for (std::size_t x = 0; x + 1 < w; ++x) dst[x + 1] += src[x];
          }
        }
      }
    }
  }
}

// Image rows per im2col tile, chosen so a tile stays near 128 KiB.
template <typename S>
std::size_t tile_rows(std::size_t k, std::size_t w) {
  const std::size_t budget = (std::size_t{128} << 10) / sizeof(S);
  return std::max<std::size_t>(1, budget / std::max<std::size_t>(1, k * w));
}

// Outputs narrower than this skip im2col: a GEMM with so few rows runs far below peak,
// while shifted row updates vectorize well.
constexpr std::size_t kDirectMaxOut = 4;

// Visits every (o, c, ky, kx) tap with the valid output rows/columns for that shift.
// f(o, c, tap, y_out, y_in, x_out_begin, x_in_begin, len)
template <typename F>
void for_each_tap(std::size_t c_out, std::size_t c_in, std::size_t h, std::size_t w, F&& f) {
  for (std::size_t o = 0; o < c_out; ++o) {
    for (std::size_t c = 0; c < c_in; ++c) {
      for (std::size_t ky = 0; ky < kKernel; ++ky) {
        const std::size_t y_begin = ky == 0 ? 1 : 0;
        const std::size_t y_end = ky == 2 ? h - 1 : h;
        for (std::size_t kx = 0; kx < kKernel; ++kx) {
          const std::size_t x_out = kx == 0 ? 1 : 0;
          const std::size_t x_in = kx == 2 ? 1 : 0;
          const std::size_t len = kx == 1 ? w : w - 1;
          const std::size_t tap = (c * kKernel + ky) * kKernel + kx;
          for (std::size_t y = y_begin; y < y_end; ++y) f(o, c, tap, y, y + ky - 1, x_out, x_in, len);
        }
      }
    }
  }
}

template <typename S>
void direct_forward(const S* in, const S* wt, std::size_t c_out, std::size_t c_in, std::size_t h, std::size_t w,
                    S* out) {
  const std::size_t hw = h * w, k = c_in * kKernel * kKernel;
  for_each_tap(c_out, c_in, h, w,
               [&](std::size_t o, std::size_t c, std::size_t tap, std::size_t y, std::size_t sy, std::size_t xo,
                   std::size_t xi, std::size_t len) {
                 const S v = wt[o * k + tap];
                 S* dst = out + o * hw + y * w + xo;
                 const S* src = in + c * hw + sy * w + xi;
                 for (std::size_t i = 0; i < len; ++i) dst[i] += v * src[i];
               });
}

template <typename S>
void direct_grad_input(const S* g, const S* wt, std::size_t c_out, std::size_t c_in, std::size_t h, std::size_t w,
                       S* dx) {
  const std::size_t hw = h * w, k = c_in * kKernel * kKernel;
  for_each_tap(c_out, c_in, h, w,
               [&](std::size_t o, std::size_t c, std::size_t tap, std::size_t y, std::size_t sy, std::size_t xo,
                   std::size_t xi, std::size_t len) {
                 const S v = wt[o * k + tap];
                 const S* src = g + o * hw + y * w + xo;
                 S* dst = dx + c * hw + sy * w + xi;
                 for (std::size_t i = 0; i < len; ++i) dst[i] += v * src[i];
               });
}

template <typename S>
void direct_grad_weight(const S* g, const S* in, std::size_t c_out, std::size_t c_in, std::size_t h, std::size_t w,
                        S* dw) {
  using Vec = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>;
  const std::size_t hw = h * w, k = c_in * kKernel * kKernel;
  for_each_tap(c_out, c_in, h, w,
               [&](std::size_t o, std::size_t c, std::size_t tap, std::size_t y, std::size_t sy, std::size_t xo,
                   std::size_t xi, std::size_t len) {
                 const auto n = static_cast<Eigen::Index>(len);
                 dw[o * k + tap] += Vec(g + o * hw + y * w + xo, n).dot(Vec(in + c * hw + sy * w + xi, n));
               });
}

template <typename S>
std::vector<S>& scratch() {
  thread_local std::vector<S> buf;
  return buf;
}

}  // namespace

template <typename S>
Var<S> conv2d_sum(std::span<const ConvTerm<S>> terms, const std::optional<Var<S>>& bias, Activation act) {
  if (terms.empty()) throw StructuralError("conv2d_sum needs at least one term");
  const Shape& x0 = terms[0].input.shape();
  if (x0.rank != 3) throw StructuralError("conv2d input must be (C, H, W), got " + x0.to_string());
  const std::size_t h = x0[1], w = x0[2], hw = h * w;
  const std::size_t c_out = terms[0].weight.shape()[0];

  std::vector<Var<S>> parents;
  for (const auto& t : terms) {
    const Shape& xs = t.input.shape();
    const Shape& ws = t.weight.shape();
    if (xs.rank != 3 || xs[1] != h || xs[2] != w) throw StructuralError("conv2d inputs disagree on spatial size");
    if (ws.rank != 4 || ws[2] != kKernel || ws[3] != kKernel) {
      throw StructuralError("conv2d kernel must be (C_out, C_in, 3, 3), got " + ws.to_string());
    }
    if (ws[1] != xs[0]) {
      throw StructuralError("conv2d channel mismatch: input has " + std::to_string(xs[0]) + " channels, kernel expects " +
                            std::to_string(ws[1]));
    }
    if (ws[0] != c_out) throw StructuralError("conv2d terms disagree on output channels");
    parents.push_back(t.input);
    parents.push_back(t.weight);
  }
  if (bias) {
    if (bias->shape().rank != 1 || bias->shape()[0] != c_out) throw StructuralError("conv2d bias must be (C_out)");
    parents.push_back(*bias);
  }

  std::vector<S> out(c_out * hw, S(0));
  MapMat<S> out_m(out.data(), static_cast<Eigen::Index>(c_out), static_cast<Eigen::Index>(hw));
  auto& cols = scratch<S>();
  for (const auto& t : terms) {
    const std::size_t c_in = t.input.shape()[0];
    if (c_out <= kDirectMaxOut) {
      direct_forward(t.input.value().data(), t.weight.value().data(), c_out, c_in, h, w, out.data());
      continue;
    }
    const std::size_t k = c_in * kKernel * kKernel;
    const std::size_t rows = tile_rows<S>(k, w);
    cols.resize(k * rows * w);
    ConstMapMat<S> wm(t.weight.value().data(), static_cast<Eigen::Index>(c_out), static_cast<Eigen::Index>(k));
    for (std::size_t y0 = 0; y0 < h; y0 += rows) {
      const std::size_t y1 = std::min(h, y0 + rows);
      const auto n = static_cast<Eigen::Index>((y1 - y0) * w);
      im2col(t.input.value().data(), c_in, h, w, y0, y1, cols.data());
      ConstMapMat<S> cm(cols.data(), static_cast<Eigen::Index>(k), n);
      out_m.middleCols(static_cast<Eigen::Index>(y0 * w), n).noalias() += wm * cm;
    }
  }
  if (bias) {
    for (std::size_t o = 0; o < c_out; ++o) {
      const S b = bias->value()[o];
      S* row = out.data() + o * hw;
      for (std::size_t i = 0; i < hw; ++i) row[i] += b;
    }
  }

  const bool relu = act == Activation::relu;
  if (relu) {
    for (auto& v : out) v = v > S(0) ? v : S(0);
  }

  const std::size_t n_terms = terms.size();
  const bool has_bias = bias.has_value();
  return terms[0].input.tape()->record(
      Shape{c_out, h, w}, std::move(out), std::move(parents), [n_terms, has_bias, relu, c_out, h, w](Node<S>& self) {
        const std::size_t hw = h * w;
        // Gradient with respect to the pre-activation; output > 0 exactly where the input was.
        thread_local std::vector<S> masked;
        const S* gp = self.grad.data();
        if (relu) {
          masked.resize(c_out * hw);
          for (std::size_t i = 0; i < c_out * hw; ++i) masked[i] = self.value[i] > S(0) ? self.grad[i] : S(0);
          gp = masked.data();
        }
        ConstMapMat<S> g(gp, static_cast<Eigen::Index>(c_out), static_cast<Eigen::Index>(hw));
        auto& cols = scratch<S>();
        for (std::size_t i = 0; i < n_terms; ++i) {
          auto& x = *self.parents[2 * i];
          auto& wt = *self.parents[2 * i + 1];
          if (!x.requires_grad && !wt.requires_grad) continue;
          const std::size_t c_in = x.shape[0];
          if (c_out <= kDirectMaxOut) {
            if (wt.requires_grad) direct_grad_weight(gp, x.value.data(), c_out, c_in, h, w, wt.grad.data());
            if (x.requires_grad) direct_grad_input(gp, wt.value.data(), c_out, c_in, h, w, x.grad.data());
            continue;
          }
          const std::size_t k = c_in * kKernel * kKernel;
          const std::size_t rows = tile_rows<S>(k, w);
          cols.resize(k * rows * w);
          ConstMapMat<S> wm(wt.value.data(), static_cast<Eigen::Index>(c_out), static_cast<Eigen::Index>(k));
          MapMat<S> gw(wt.grad.data(), static_cast<Eigen::Index>(c_out), static_cast<Eigen::Index>(k));
          for (std::size_t y0 = 0; y0 < h; y0 += rows) {
            const std::size_t y1 = std::min(h, y0 + rows);
            const auto n = static_cast<Eigen::Index>((y1 - y0) * w);
            const auto gt = g.middleCols(static_cast<Eigen::Index>(y0 * w), n);
            MapMat<S> cm(cols.data(), static_cast<Eigen::Index>(k), n);
            if (wt.requires_grad) {
              im2col(x.value.data(), c_in, h, w, y0, y1, cols.data());
              gw.noalias() += gt * cm.transpose();
            }
            if (x.requires_grad) {
              cm.noalias() = wm.transpose() * gt;
              col2im_add(cols.data(), c_in, h, w, y0, y1, x.grad.data());
            }
          }
        }
        if (has_bias) {
          auto& b = *self.parents[2 * n_terms];
          if (b.requires_grad) {
            for (std::size_t o = 0; o < c_out; ++o) {
              S acc(0);
              const S* row = gp + o * hw;
              for (std::size_t i = 0; i < hw; ++i) acc += row[i];
              b.grad[o] += acc;
            }
          }
        }
      });
}

template <typename S>
Var<S> conv2d(const Var<S>& x, const Var<S>& weight, const std::optional<std::type_identity_t<Var<S>>>& bias, Activation act) {
  const ConvTerm<S> term{x, weight};
  return conv2d_sum<S>(std::span<const ConvTerm<S>>(&term, 1), bias, act);
}

template Var<float> conv2d_sum(std::span<const ConvTerm<float>>, const std::optional<Var<float>>&, Activation);
template Var<double> conv2d_sum(std::span<const ConvTerm<double>>, const std::optional<Var<double>>&, Activation);
template Var<float> conv2d(const Var<float>&, const Var<float>&, const std::optional<Var<float>>&, Activation);
template Var<double> conv2d(const Var<double>&, const Var<double>&, const std::optional<Var<double>>&, Activation);

}  // namespace cinerecon::ad

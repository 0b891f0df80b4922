#include "cinerecon/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "cinerecon/error.hpp"

namespace cinerecon::ad {

Shape::Shape(std::initializer_list<std::size_t> d) {
  if (d.size() == 0 || d.size() > 4) throw StructuralError("tensor rank must be 1..4");
  rank = d.size();
  std::copy(d.begin(), d.end(), dims.begin());
}

std::size_t Shape::numel() const noexcept {
  std::size_t n = 1;
  for (std::size_t i = 0; i < rank; ++i) n *= dims[i];
  return n;
}

std::string Shape::to_string() const {
  std::string s = "(";
  for (std::size_t i = 0; i < rank; ++i) {
    if (i) s += ", ";
    s += std::to_string(dims[i]);
  }
  return s + ")";
}

template <typename S>
S Var<S>::item() const {
  if (node_->value.size() != 1) throw StructuralError("item() on a tensor of shape " + node_->shape.to_string());
  return node_->value[0];
}

namespace {

template <typename S>
std::shared_ptr<Node<S>> make_node(Shape shape, std::vector<S> values, Tape<S>* tape) {
  if (shape.numel() != values.size()) {
    throw StructuralError("tensor of shape " + shape.to_string() + " given " + std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<Node<S>>();
  node->shape = shape;
  node->value = std::move(values);
  node->tape = tape;
  return node;
}

template <typename S>
void same_shape(const Var<S>& a, const Var<S>& b, const char* op) {
  if (!(a.shape() == b.shape())) {
    throw StructuralError(std::string(op) + ": shape " + a.shape().to_string() + " vs " + b.shape().to_string());
  }
}

}  // namespace

template <typename S>
Var<S> Tape<S>::parameter(Shape shape, std::vector<S> values) {
  auto node = make_node(shape, std::move(values), this);
  node->leaf = true;
  if (grad_enabled_) {
    node->requires_grad = true;
    node->id = nodes_.size();
    nodes_.push_back(node);
  }
  return Var<S>(std::move(node));
}

template <typename S>
Var<S> Tape<S>::constant(Shape shape, std::vector<S> values) {
  auto node = make_node(shape, std::move(values), this);
  node->leaf = true;
  return Var<S>(std::move(node));
}

template <typename S>
Var<S> Tape<S>::record(Shape shape, std::vector<S> value, std::vector<Var<S>> parents,
                       std::function<void(Node<S>&)> backward) {
  auto node = make_node(shape, std::move(value), this);
  bool needs = false;
  for (const auto& p : parents) {
    if (p.tape() != this) throw StructuralError("operation mixes tensors from different tapes");
    needs = needs || p.requires_grad();
  }
  if (grad_enabled_ && needs) {
    node->requires_grad = true;
    node->backward = std::move(backward);
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->id = nodes_.size();
    nodes_.push_back(node);
  }
  return Var<S>(std::move(node));
}

template <typename S>
void Tape<S>::backward(const Var<S>& loss) {
  if (!loss.valid() || loss.tape() != this) throw StructuralError("backward: loss belongs to a different tape");
  const auto& ln = loss.node();
  if (!ln->requires_grad || ln->id >= nodes_.size() || nodes_[ln->id] != ln) {
    throw StructuralError("backward: detached loss node (it does not depend on any parameter)");
  }
  if (ln->value.size() != 1) throw StructuralError("backward: loss must be scalar, got shape " + ln->shape.to_string());

  for (std::size_t i = 0; i <= ln->id; ++i) {
    auto& n = *nodes_[i];
    if (n.leaf) {
      if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), S(0));
    } else {
      n.grad.assign(n.value.size(), S(0));
    }
  }
  ln->grad[0] += S(1);
  for (std::size_t i = ln->id + 1; i-- > 0;) {
    auto& n = *nodes_[i];
    if (!n.leaf && n.backward) n.backward(n);
  }
}

template <typename S>
void Tape<S>::zero_grad() {
  for (auto& n : nodes_) std::fill(n->grad.begin(), n->grad.end(), S(0));
}

template <typename S>
void Tape<S>::clear() {
  nodes_.clear();
}

// -- elementwise ---------------------------------------------------------------

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  same_shape(a, b, "add");
  std::vector<S> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return a.tape()->record(a.shape(), std::move(out), {a, b}, [](Node<S>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

template <typename S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
  same_shape(a, b, "sub");
  std::vector<S> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return a.tape()->record(a.shape(), std::move(out), {a, b}, [](Node<S>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
    }
  });
}

template <typename S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
  same_shape(a, b, "mul");
  std::vector<S> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return a.tape()->record(a.shape(), std::move(out), {a, b}, [](Node<S>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.value[i];
    }
  });
}

template <typename S>
Var<S> affine(const Var<S>& a, S scale, S shift) {
  std::vector<S> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * a.value()[i] + shift;
  return a.tape()->record(a.shape(), std::move(out), {a}, [scale](Node<S>& self) {
    auto& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += scale * self.grad[i];
  });
}

template <typename S>
Var<S> relu(const Var<S>& x) {
  std::vector<S> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] > S(0) ? x.value()[i] : S(0);
  return x.tape()->record(x.shape(), std::move(out), {x}, [](Node<S>& self) {
    auto& p = *self.parents[0];
    // y > 0 exactly where x > 0; the subgradient at 0 is 0.
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (self.value[i] > S(0)) p.grad[i] += self.grad[i];
    }
  });
}

// -- reductions ----------------------------------------------------------------

template <typename S>
Var<S> sum(const Var<S>& x) {
  S acc(0);
  for (S v : x.value()) acc += v;
  return x.tape()->record(Shape{1}, {acc}, {x}, [](Node<S>& self) {
    auto& p = *self.parents[0];
    const S g = self.grad[0];
    for (auto& v : p.grad) v += g;
  });
}

template <typename S>
Var<S> mean(const Var<S>& x) {
  return affine(sum(x), S(1) / static_cast<S>(x.numel()));
}

// -- magnitude / SSIM ----------------------------------------------------------

template <typename S>
Var<S> magnitude(const Var<S>& x) {
  const Shape& s = x.shape();
  if (s.rank != 3 || s[0] != 2) throw StructuralError("magnitude expects (2, H, W), got " + s.to_string());
  const std::size_t n = s[1] * s[2];
  std::vector<S> out(n);
  auto v = x.value();
  const S eps = static_cast<S>(kMagnitudeEps);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::sqrt(v[i] * v[i] + v[n + i] * v[n + i] + eps);
  return x.tape()->record(Shape{s[1], s[2]}, std::move(out), {x}, [n](Node<S>& self) {
    auto& p = *self.parents[0];
    for (std::size_t i = 0; i < n; ++i) {
      const S g = self.grad[i] / self.value[i];
      p.grad[i] += g * p.value[i];
      p.grad[n + i] += g * p.value[n + i];
    }
  });
}

namespace {

// Window statistics for SSIM at every valid top-left position, accumulated in double.
struct SsimStats {
  std::size_t oh = 0, ow = 0;
  std::vector<double> mu_a, mu_b, var_a, var_b, cov;
};

template <typename S>
SsimStats window_stats(std::span<const S> a, std::span<const S> b, std::size_t h, std::size_t w, std::size_t win) {
  SsimStats st;
  st.oh = h - win + 1;
  st.ow = w - win + 1;
  const std::size_t n = st.oh * st.ow;
  st.mu_a.resize(n);
  st.mu_b.resize(n);
  st.var_a.resize(n);
  st.var_b.resize(n);
  st.cov.resize(n);
  const double inv = 1.0 / static_cast<double>(win * win);
  for (std::size_t py = 0; py < st.oh; ++py) {
    for (std::size_t px = 0; px < st.ow; ++px) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (std::size_t dy = 0; dy < win; ++dy) {
        for (std::size_t dx = 0; dx < win; ++dx) {
          const std::size_t q = (py + dy) * w + px + dx;
          const double va = a[q];
          const double vb = b[q];
          sa += va;
          sb += vb;
          saa += va * va;
          sbb += vb * vb;
          sab += va * vb;
        }
      }
      const std::size_t p = py * st.ow + px;
      st.mu_a[p] = sa * inv;
      st.mu_b[p] = sb * inv;
      st.var_a[p] = saa * inv - st.mu_a[p] * st.mu_a[p];
      st.var_b[p] = sbb * inv - st.mu_b[p] * st.mu_b[p];
      st.cov[p] = sab * inv - st.mu_a[p] * st.mu_b[p];
    }
  }
  return st;
}

}  // namespace

template <typename S>
Var<S> ssim(const Var<S>& a, std::span<const S> reference, const SsimParams& params) {
  const Shape& s = a.shape();
  if (s.rank != 2) throw StructuralError("ssim expects an (H, W) image, got " + s.to_string());
  if (reference.size() != s.numel()) throw StructuralError("ssim: reference size mismatch");
  const std::size_t h = s[0], w = s[1], win = params.window;
  if (h < win || w < win) throw StructuralError("ssim: image smaller than the window");
  const double c1 = (params.k1 * params.dynamic_range) * (params.k1 * params.dynamic_range);
  const double c2 = (params.k2 * params.dynamic_range) * (params.k2 * params.dynamic_range);

  std::vector<S> ref(reference.begin(), reference.end());
  const SsimStats st = window_stats<S>(a.value(), ref, h, w, win);
  double total = 0.0;
  for (std::size_t p = 0; p < st.mu_a.size(); ++p) {
    const double num = (2.0 * st.mu_a[p] * st.mu_b[p] + c1) * (2.0 * st.cov[p] + c2);
    const double den = (st.mu_a[p] * st.mu_a[p] + st.mu_b[p] * st.mu_b[p] + c1) * (st.var_a[p] + st.var_b[p] + c2);
    total += num / den;
  }
  const double value = total / static_cast<double>(st.mu_a.size());

  return a.tape()->record(Shape{1}, {static_cast<S>(value)}, {a},
                          [ref = std::move(ref), h, w, win, c1, c2](Node<S>& self) {
    auto& p = *self.parents[0];
    const SsimStats st = window_stats<S>(p.value, ref, h, w, win);
    const double nwin = static_cast<double>(win * win);
    const double g = static_cast<double>(self.grad[0]) / static_cast<double>(st.mu_a.size());
    // dS_p/da_q = c0_p + c1_p * b_q - c2_p * a_q for q inside window p.
    std::vector<double> acc0(h * w, 0.0), acc1(h * w, 0.0), acc2(h * w, 0.0);
    for (std::size_t py = 0; py < st.oh; ++py) {
      for (std::size_t px = 0; px < st.ow; ++px) {
        const std::size_t k = py * st.ow + px;
        const double ma = st.mu_a[k], mb = st.mu_b[k];
        const double a1 = 2.0 * ma * mb + c1;
        const double a2 = 2.0 * st.cov[k] + c2;
        const double b1 = ma * ma + mb * mb + c1;
        const double b2 = st.var_a[k] + st.var_b[k] + c2;
        const double sv = a1 * a2 / (b1 * b2);
        const double f = 2.0 / (nwin * b1 * b2);
        const double k0 = f * (mb * a2 - a1 * mb - sv * ma * b2 + sv * b1 * ma);
        const double k1 = f * a1;
        const double k2 = f * sv * b1;
        for (std::size_t dy = 0; dy < win; ++dy) {
          for (std::size_t dx = 0; dx < win; ++dx) {
            const std::size_t q = (py + dy) * w + px + dx;
            acc0[q] += k0;
            acc1[q] += k1;
            acc2[q] += k2;
          }
        }
      }
    }
    for (std::size_t q = 0; q < h * w; ++q) {
      const double d = acc0[q] + acc1[q] * ref[q] - acc2[q] * p.value[q];
      p.grad[q] += static_cast<S>(g * d);
    }
  });
}

#define CINERECON_AD_INSTANTIATE(S)                                                          \
  template class Var<S>;                                                                     \
  template class Tape<S>;                                                                    \
  template Var<S> add(const Var<S>&, const Var<S>&);                                         \
  template Var<S> sub(const Var<S>&, const Var<S>&);                                         \
  template Var<S> mul(const Var<S>&, const Var<S>&);                                         \
  template Var<S> affine(const Var<S>&, S, S);                                               \
  template Var<S> relu(const Var<S>&);                                                       \
  template Var<S> sum(const Var<S>&);                                                        \
  template Var<S> mean(const Var<S>&);                                                       \
  template Var<S> magnitude(const Var<S>&);                                                  \
  template Var<S> ssim(const Var<S>&, std::span<const S>, const SsimParams&);

CINERECON_AD_INSTANTIATE(float)
CINERECON_AD_INSTANTIATE(double)

#undef CINERECON_AD_INSTANTIATE

}  // namespace cinerecon::ad

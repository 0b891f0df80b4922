#pragma once

// Minimal tape-based reverse-mode automatic differentiation over real tensors of rank <= 4.
//
// Every operation that depends on a gradient-requiring input is appended to the tape in
// creation order, which is a topological order; backward() walks it in reverse. Leaf
// gradients accumulate across backward() calls until zero_grad(). Interior adjoints are
// reset at the start of each backward().

#include <array>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <type_traits>
#include <span>
#include <string>
#include <vector>

namespace cinerecon::ad {

struct Shape {
  std::array<std::size_t, 4> dims{};
  std::size_t rank = 0;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> d);

  std::size_t operator[](std::size_t i) const noexcept { return dims[i]; }
  std::size_t numel() const noexcept;
  std::string to_string() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

template <typename S>
class Tape;

template <typename S>
struct Node {
  Shape shape;
  std::vector<S> value;
  std::vector<S> grad;
  bool requires_grad = false;
  bool leaf = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Adds this node's adjoint into the adjoints of its gradient-requiring parents.
  std::function<void(Node&)> backward;
  Tape<S>* tape = nullptr;
  std::size_t id = 0;
};

template <typename S>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<S>> node) : node_(std::move(node)) {}

  bool valid() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->value.size(); }
  std::span<const S> value() const { return node_->value; }
  std::span<const S> grad() const { return node_->grad; }
  /// Value of a single-element tensor.
  S item() const;
  bool requires_grad() const { return node_->requires_grad; }
  Tape<S>* tape() const { return node_->tape; }
  const std::shared_ptr<Node<S>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<S>> node_;
};

template <typename S>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Trainable leaf. Acts as a constant while gradients are disabled.
  Var<S> parameter(Shape shape, std::vector<S> values);
  Var<S> constant(Shape shape, std::vector<S> values);

  /// Appends an operation result. `backward` is kept only if some parent requires a gradient
  /// and recording is enabled; otherwise the node is a plain value and parents are released.
  Var<S> record(Shape shape, std::vector<S> value, std::vector<Var<S>> parents, std::function<void(Node<S>&)> backward);

  /// Accumulates d(loss)/d(leaf) into every gradient-requiring leaf.
  /// Throws StructuralError for a non-scalar loss and for a loss that is not on this tape
  /// or does not depend on any parameter.
  void backward(const Var<S>& loss);

  void zero_grad();
  void clear();

  void set_grad_enabled(bool on) noexcept { grad_enabled_ = on; }
  bool grad_enabled() const noexcept { return grad_enabled_; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  std::vector<std::shared_ptr<Node<S>>> nodes_;
  bool grad_enabled_ = true;
};

// -- elementwise ---------------------------------------------------------------

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b);
template <typename S>
Var<S> sub(const Var<S>& a, const Var<S>& b);
template <typename S>
Var<S> mul(const Var<S>& a, const Var<S>& b);
/// scale * a + shift
template <typename S>
Var<S> affine(const Var<S>& a, S scale, S shift = S(0));
template <typename S>
Var<S> relu(const Var<S>& x);

// -- reductions ----------------------------------------------------------------

template <typename S>
Var<S> sum(const Var<S>& x);
template <typename S>
Var<S> mean(const Var<S>& x);

// -- convolution -----------------------------------------------------------------

inline constexpr std::size_t kKernel = 3;

template <typename S>
struct ConvTerm {
  Var<S> input;   // (C_in, H, W)
  Var<S> weight;  // (C_out, C_in, 3, 3)
};

enum class Activation { none, relu };

/// 3x3 cross-correlation with zero padding 1 ("same" size) plus per-channel bias,
/// optionally followed by a fused ReLU.
template <typename S>
Var<S> conv2d(const Var<S>& x, const Var<S>& weight, const std::optional<std::type_identity_t<Var<S>>>& bias,
              Activation act = Activation::none);

/// act(sum_i conv2d(x_i, w_i) + bias), stored as a single node.
template <typename S>
Var<S> conv2d_sum(std::span<const ConvTerm<S>> terms, const std::optional<Var<S>>& bias,
                  Activation act = Activation::none);

// -- image-quality terms -----------------------------------------------------------

inline constexpr double kMagnitudeEps = 1e-12;

/// (2, H, W) re/im channels -> (H, W) sqrt(re^2 + im^2 + 1e-12).
template <typename S>
Var<S> magnitude(const Var<S>& x);

struct SsimParams {
  std::size_t window = 7;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Mean SSIM over all fully-contained windows of a (H, W) image against a fixed reference.
/// Uniform window; population variances. Differentiable in `a` only.
template <typename S>
Var<S> ssim(const Var<S>& a, std::span<const S> reference, const SsimParams& params);

}  // namespace cinerecon::ad

#pragma once

// Res-CRNN: unrolled bidirectional convolutional-recurrent reconstruction network.
//
// Images travel through the network as two real channels (re, im) per frame. Each unrolled
// iteration applies n_bcrnn_layers bidirectional ConvRNN layers, a 3x3 projection back to two
// channels with an identity skip, and hard data consistency in k-space. The last iteration
// also adds the zero-filled input before its data-consistency step.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cinerecon/autodiff.hpp"
#include "cinerecon/params.hpp"
#include "cinerecon/sampling.hpp"
#include "cinerecon/tensor.hpp"

namespace cinerecon::crnn {

using sampling::SamplingMask;

struct ArchConfig {
  static constexpr std::size_t io_channels = 2;
  static constexpr std::size_t kernel = 3;

  std::size_t n_iters = 5;
  std::size_t n_bcrnn_layers = 3;
  std::size_t feat_channels = 48;
  std::size_t hidden_channels = 2;
  bool share_weights = false;

  /// Reduced configuration used for CPU training: k=16, three iterations.
  static ArchConfig desk();

  void validate() const;
  std::vector<std::pair<std::string, std::string>> to_key_values() const;
  static ArchConfig from_key_values(const std::map<std::string, std::string>& kv);

  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

struct ModelParams {
  ArchConfig arch;
  ad::ParamSet params;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Closed-form trainable parameter count.
std::size_t parameter_count(const ArchConfig& arch);

/// Parameter names: `<block>.bcrnn<l>.<fwd|bwd>.<w_x|w_h|b|w_r|b_r>` and `<block>.proj.<w|b>`,
/// where block is `iter<i>` (1-based) or `shared`.
std::string block_name(const ArchConfig& arch, std::size_t iter);

/// Fan-in uniform initialization U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every tensor except
/// the projection convolutions, which start at zero so the untrained network is identity + DC.
ModelParams init_model(const ArchConfig& arch, std::uint64_t seed);

template <typename S>
using Sequence = std::vector<ad::Var<S>>;

template <typename S>
struct BcrnnDirection {
  ad::Var<S> w_x, w_h, b, w_r, b_r;
};

template <typename S>
struct BcrnnLayerVars {
  BcrnnDirection<S> fwd, bwd;
};

template <typename S>
struct IterationVars {
  std::vector<BcrnnLayerVars<S>> layers;
  ad::Var<S> proj_w, proj_b;
};

template <typename S>
struct ModelVars {
  std::vector<IterationVars<S>> iters;  // one entry per unrolled iteration
  std::vector<ad::Var<S>> ordered;      // aligned with ModelParams::params.tensors()
};

/// Places every parameter on the tape (as trainable leaves while gradients are enabled).
template <typename S>
ModelVars<S> bind_params(ad::Tape<S>& tape, const ModelParams& model);

/// Bidirectional ConvRNN over frames (C_in, H, W) -> (k, H, W):
///   a_t = relu(conv(x_t; W_x) + conv(c_{t-1}; W_h) + b),  c_t = relu(conv(a_t; W_r) + b_r),  c_0 = 0
/// run forward and backward in time with separate weights; o_t = a_fwd_t + a_bwd_t.
template <typename S>
Sequence<S> bcrnn_layer(const Sequence<S>& x, const BcrnnLayerVars<S>& vars);

/// x + proj(bcrnn_L(...bcrnn_1(x))).
template <typename S>
Sequence<S> crnn_block(const Sequence<S>& x, const IterationVars<S>& vars);

/// Hard data consistency on one (2, H, W) frame: ifft2c(m * k_acq + (1 - m) * fft2c(x)).
template <typename S>
ad::Var<S> dc_layer(const ad::Var<S>& x, std::span<const cplx> k_acq_plane, std::span<const std::uint8_t> mask_row);

/// Single-coil cine (T, 1, H, W) -> per-frame (2, H, W) constants.
template <typename S>
Sequence<S> to_channels(ad::Tape<S>& tape, const ComplexCine& x);

template <typename S>
ComplexCine from_channels(const Sequence<S>& frames);

/// Full unrolled network on a single-coil acquisition. Throws NumericalError naming the
/// iteration when activations become non-finite.
template <typename S>
Sequence<S> forward_graph(ad::Tape<S>& tape, const ModelVars<S>& vars, const ComplexCine& k_acq,
                          const SamplingMask& mask);

/// Inference in double precision. `k_acq` is single-coil k-space, zero off-mask.
ComplexCine forward(const ModelParams& model, const ComplexCine& k_acq, const SamplingMask& mask);

/// Reconstructs each coil independently with the same weights and RSS-combines.
/// Coils are distributed over `n_threads` workers; the result does not depend on the count.
RealImageSequence recon_crnn(const ComplexCine& k_us, const SamplingMask& mask, const ModelParams& model,
                             std::size_t n_threads = 1);

struct LossConfig {
  double ssim_weight = 0.1;
  std::size_t ssim_window = 7;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// MSE(pred, target) + alpha * (1 - mean_t SSIM(|pred_t|, |target_t|)), with the SSIM dynamic
/// range set to the largest target magnitude in the sequence.
template <typename S>
ad::Var<S> loss(const Sequence<S>& pred, const Sequence<S>& target, const LossConfig& cfg);

// -- training -------------------------------------------------------------------

struct TrainSample {
  ComplexCine k_acq;   // (T, 1, H, W) k-space
  ComplexCine target;  // (T, 1, H, W) image
  SamplingMask mask;
};

/// Splits one multi-coil instance into per-coil samples with targets sens_c * gt.
std::vector<TrainSample> samples_from_instance(const ComplexCine& k_us, const CoilSensitivities& sens,
                                               const ComplexCine& gt, const SamplingMask& mask);

enum class Precision { f32, f64 };

struct StepInfo {
  std::uint64_t step = 0;  // global optimizer step, 1-based
  std::size_t epoch = 0;   // 0-based
  double loss = 0.0;
};

struct TrainOptions {
  LossConfig loss;
  ad::AdamHyper adam;
  std::size_t epochs = 10;
  std::uint64_t seed = 7;
  Precision precision = Precision::f32;
  std::function<void(const StepInfo&)> on_step;
};

struct TrainState {
  ModelParams model;
  ad::AdamState optimizer;
  std::size_t epochs_done = 0;
  std::vector<StepInfo> history;  // steps run by this process
};

TrainState init_train_state(const ArchConfig& arch, const TrainOptions& opts);

/// Runs `opts.epochs` further epochs of Adam over per-sample shuffled data. The shuffle of
/// epoch e depends only on (seed, e), so resuming from a saved state reproduces an
/// uninterrupted run bitwise.
void train(TrainState& state, std::span<const TrainSample> data, const TrainOptions& opts);

/// Loss of a model on one sample, evaluated in the given precision.
double evaluate_loss(const ModelParams& model, const TrainSample& sample, const LossConfig& cfg,
                     Precision precision = Precision::f64);

/// `<stem>.cxt` + `<stem>.hdr` (parameters and architecture), plus `<stem>.adam.cxt` holding the
/// optimizer moments (m then v).
void save_checkpoint(const std::filesystem::path& stem, const TrainState& state, std::uint64_t seed);
TrainState load_checkpoint(const std::filesystem::path& stem);
ModelParams load_model(const std::filesystem::path& stem);

}  // namespace cinerecon::crnn

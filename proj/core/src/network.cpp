#include "cinerecon/network.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <random>

#include "cinerecon/error.hpp"
#include "cinerecon/fft.hpp"
#include "cinerecon/random.hpp"

namespace cinerecon::crnn {

namespace {

std::size_t to_size(const std::map<std::string, std::string>& kv, const std::string& key, std::size_t fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw ParameterError(key + ": expected an unsigned integer, got '" + it->second + "'");
  }
}

std::size_t layer_input_channels(const ArchConfig& arch, std::size_t layer) {
  return layer == 0 ? ArchConfig::io_channels : arch.feat_channels;
}

}  // namespace

ArchConfig ArchConfig::desk() {
  ArchConfig a;
  a.n_iters = 3;
  a.feat_channels = 16;
  return a;
}

void ArchConfig::validate() const {
  if (n_iters < 1) throw ParameterError("arch.n_iters must be >= 1");
  if (n_bcrnn_layers < 1) throw ParameterError("arch.n_bcrnn_layers must be >= 1");
  if (hidden_channels < 1) throw ParameterError("arch.hidden_channels must be >= 1");
  if (feat_channels < hidden_channels) throw ParameterError("arch.feat_channels must be >= arch.hidden_channels");
}

std::vector<std::pair<std::string, std::string>> ArchConfig::to_key_values() const {
  return {{"arch.n_iters", std::to_string(n_iters)},
          {"arch.n_bcrnn_layers", std::to_string(n_bcrnn_layers)},
          {"arch.feat_channels", std::to_string(feat_channels)},
          {"arch.hidden_channels", std::to_string(hidden_channels)},
          {"arch.share_weights", share_weights ? "true" : "false"}};
}

ArchConfig ArchConfig::from_key_values(const std::map<std::string, std::string>& kv) {
  ArchConfig a;
  a.n_iters = to_size(kv, "arch.n_iters", a.n_iters);
  a.n_bcrnn_layers = to_size(kv, "arch.n_bcrnn_layers", a.n_bcrnn_layers);
  a.feat_channels = to_size(kv, "arch.feat_channels", a.feat_channels);
  a.hidden_channels = to_size(kv, "arch.hidden_channels", a.hidden_channels);
  if (auto it = kv.find("arch.share_weights"); it != kv.end()) {
    if (it->second != "true" && it->second != "false") throw ParameterError("arch.share_weights must be true or false");
    a.share_weights = it->second == "true";
  }
  a.validate();
  return a;
}

std::size_t parameter_count(const ArchConfig& arch) {
  arch.validate();
  const std::size_t k = arch.feat_channels;
  const std::size_t hid = arch.hidden_channels;
  const std::size_t kk = ArchConfig::kernel * ArchConfig::kernel;
  std::size_t per_iter = 0;
  for (std::size_t l = 0; l < arch.n_bcrnn_layers; ++l) {
    const std::size_t c_in = layer_input_channels(arch, l);
    per_iter += 2 * (k * c_in * kk + k * hid * kk + k + hid * k * kk + hid);
  }
  per_iter += ArchConfig::io_channels * k * kk + ArchConfig::io_channels;
  return per_iter * (arch.share_weights ? 1 : arch.n_iters);
}

std::string block_name(const ArchConfig& arch, std::size_t iter) {
  return arch.share_weights ? std::string("shared") : "iter" + std::to_string(iter + 1);
}

ModelParams init_model(const ArchConfig& arch, std::uint64_t seed) {
  arch.validate();
  ModelParams model{arch, {}};
  const std::size_t k = arch.feat_channels;
  const std::size_t hid = arch.hidden_channels;
  const std::size_t kk = ArchConfig::kernel * ArchConfig::kernel;
  std::uint64_t stream = 0;

  auto uniform = [&](const std::string& name, ad::Shape shape, std::size_t fan_in) {
    std::mt19937_64 rng(derive_seed(seed, stream++));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(shape.numel());
    for (auto& x : v) x = uniform_real(rng, -bound, bound);
    model.params.add(name, shape, std::move(v));
  };

  const std::size_t blocks = arch.share_weights ? 1 : arch.n_iters;
  for (std::size_t i = 0; i < blocks; ++i) {
    const std::string block = block_name(arch, i);
    for (std::size_t l = 0; l < arch.n_bcrnn_layers; ++l) {
      const std::size_t c_in = layer_input_channels(arch, l);
      for (const char* dir : {"fwd", "bwd"}) {
        const std::string p = block + ".bcrnn" + std::to_string(l + 1) + "." + dir + ".";
        uniform(p + "w_x", {k, c_in, 3, 3}, c_in * kk);
        uniform(p + "w_h", {k, hid, 3, 3}, hid * kk);
        uniform(p + "b", {k}, (c_in + hid) * kk);
        uniform(p + "w_r", {hid, k, 3, 3}, k * kk);
        uniform(p + "b_r", {hid}, k * kk);
      }
    }
    model.params.add(block + ".proj.w", {ArchConfig::io_channels, k, 3, 3},
                     std::vector<double>(ArchConfig::io_channels * k * kk, 0.0));
    model.params.add(block + ".proj.b", {ArchConfig::io_channels}, std::vector<double>(ArchConfig::io_channels, 0.0));
  }
  return model;
}

template <typename S>
ModelVars<S> bind_params(ad::Tape<S>& tape, const ModelParams& model) {
  const ArchConfig& arch = model.arch;
  ModelVars<S> vars;
  std::map<std::string, ad::Var<S>> by_name;
  for (const auto& t : model.params.tensors()) {
    ad::Var<S> v = tape.parameter(t.shape, std::vector<S>(t.values.begin(), t.values.end()));
    vars.ordered.push_back(v);
    by_name.emplace(t.name, v);
  }
  auto get = [&](const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw StructuralError("model is missing parameter " + name);
    return it->second;
  };
  for (std::size_t i = 0; i < arch.n_iters; ++i) {
    const std::string block = block_name(arch, i);
    IterationVars<S> it;
    for (std::size_t l = 0; l < arch.n_bcrnn_layers; ++l) {
      BcrnnLayerVars<S> layer;
      for (auto [dir, slot] : {std::pair{"fwd", &layer.fwd}, std::pair{"bwd", &layer.bwd}}) {
        const std::string p = block + ".bcrnn" + std::to_string(l + 1) + "." + dir + ".";
        *slot = {get(p + "w_x"), get(p + "w_h"), get(p + "b"), get(p + "w_r"), get(p + "b_r")};
      }
      it.layers.push_back(std::move(layer));
    }
    it.proj_w = get(block + ".proj.w");
    it.proj_b = get(block + ".proj.b");
    vars.iters.push_back(std::move(it));
  }
  return vars;
}

namespace {

template <typename S>
Sequence<S> run_direction(const Sequence<S>& x, const BcrnnDirection<S>& d, bool reverse) {
  const std::size_t n = x.size();
  Sequence<S> out(n);
  ad::Var<S> hidden;
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? n - 1 - step : step;
    ad::Var<S> a;
    if (hidden.valid()) {
      const std::array<ad::ConvTerm<S>, 2> terms{ad::ConvTerm<S>{x[t], d.w_x}, ad::ConvTerm<S>{hidden, d.w_h}};
      a = ad::conv2d_sum<S>(terms, d.b, ad::Activation::relu);
    } else {
      a = ad::conv2d<S>(x[t], d.w_x, d.b, ad::Activation::relu);
    }
    // The compressed hidden state of the final step would never be consumed.
    if (step + 1 < n) hidden = ad::conv2d<S>(a, d.w_r, d.b_r, ad::Activation::relu);
    out[t] = std::move(a);
  }
  return out;
}

}  // namespace

template <typename S>
Sequence<S> bcrnn_layer(const Sequence<S>& x, const BcrnnLayerVars<S>& vars) {
  if (x.empty()) throw StructuralError("bcrnn_layer needs at least one frame");
  const Sequence<S> f = run_direction(x, vars.fwd, false);
  const Sequence<S> b = run_direction(x, vars.bwd, true);
  Sequence<S> out(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) out[t] = ad::add(f[t], b[t]);
  return out;
}

template <typename S>
Sequence<S> crnn_block(const Sequence<S>& x, const IterationVars<S>& vars) {
  if (x.empty()) throw StructuralError("crnn_block needs at least one frame");
  for (const auto& f : x) {
    if (f.shape().rank != 3 || f.shape()[0] != ArchConfig::io_channels) {
      throw StructuralError("crnn_block expects (2, H, W) frames, got " + f.shape().to_string());
    }
  }
  Sequence<S> h = x;
  for (const auto& layer : vars.layers) h = bcrnn_layer(h, layer);
  Sequence<S> out(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    out[t] = ad::add(x[t], ad::conv2d<S>(h[t], vars.proj_w, vars.proj_b));
  }
  return out;
}

namespace {

template <typename S>
void to_complex(std::span<const S> ch, std::span<cplx> out) {
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out[i] = cplx(static_cast<double>(ch[i]), static_cast<double>(ch[n + i]));
}

template <typename S>
void to_channels_plane(std::span<const cplx> in, std::span<S> ch) {
  const std::size_t n = in.size();
  for (std::size_t i = 0; i < n; ++i) {
    ch[i] = static_cast<S>(in[i].real());
    ch[n + i] = static_cast<S>(in[i].imag());
  }
}

// ifft2c((1 - m) * fft2c(z)) on a plane; m selects columns.
void project_unsampled(std::span<cplx> z, std::span<const std::uint8_t> mask_row, std::size_t rows, std::size_t cols) {
  fft2c_plane(z, z, rows, cols);
  for (std::size_t h = 0; h < rows; ++h) {
    for (std::size_t w = 0; w < cols; ++w) {
      if (mask_row[w]) z[h * cols + w] = cplx{};
    }
  }
  ifft2c_plane(z, z, rows, cols);
}

}  // namespace

template <typename S>
ad::Var<S> dc_layer(const ad::Var<S>& x, std::span<const cplx> k_acq_plane, std::span<const std::uint8_t> mask_row) {
  const ad::Shape& s = x.shape();
  if (s.rank != 3 || s[0] != 2) throw StructuralError("dc_layer expects a (2, H, W) frame, got " + s.to_string());
  const std::size_t rows = s[1], cols = s[2];
  if (k_acq_plane.size() != rows * cols || mask_row.size() != cols) throw StructuralError("dc_layer: acquisition shape mismatch");

  std::vector<cplx> z(rows * cols);
  to_complex<S>(x.value(), z);
  fft2c_plane(z, z, rows, cols);
  for (std::size_t h = 0; h < rows; ++h) {
    for (std::size_t w = 0; w < cols; ++w) {
      if (mask_row[w]) z[h * cols + w] = k_acq_plane[h * cols + w];
    }
  }
  ifft2c_plane(z, z, rows, cols);
  std::vector<S> out(2 * rows * cols);
  to_channels_plane<S>(z, out);

  std::vector<std::uint8_t> mask(mask_row.begin(), mask_row.end());
  return x.tape()->record(s, std::move(out), {x}, [mask = std::move(mask), rows, cols](ad::Node<S>& self) {
    // The map is affine with self-adjoint linear part F^H (1 - M) F.
    std::vector<cplx> g(rows * cols);
    to_complex<S>(self.grad, g);
    project_unsampled(g, mask, rows, cols);
    auto& p = *self.parents[0];
    const std::size_t n = rows * cols;
    for (std::size_t i = 0; i < n; ++i) {
      p.grad[i] += static_cast<S>(g[i].real());
      p.grad[n + i] += static_cast<S>(g[i].imag());
    }
  });
}

template <typename S>
Sequence<S> to_channels(ad::Tape<S>& tape, const ComplexCine& x) {
  const auto& d = x.dims();
  if (d.coils != 1) throw StructuralError("to_channels expects a single-coil cine");
  Sequence<S> out;
  for (std::size_t t = 0; t < d.frames; ++t) {
    std::vector<S> ch(2 * d.slice_size());
    to_channels_plane<S>(x.slice(t, 0), ch);
    out.push_back(tape.constant({2, d.rows, d.cols}, std::move(ch)));
  }
  return out;
}

template <typename S>
ComplexCine from_channels(const Sequence<S>& frames) {
  if (frames.empty()) throw StructuralError("from_channels: empty sequence");
  const ad::Shape& s = frames[0].shape();
  ComplexCine out({frames.size(), 1, s[1], s[2]}, Domain::image);
  for (std::size_t t = 0; t < frames.size(); ++t) to_complex<S>(frames[t].value(), out.slice(t, 0));
  return out;
}

template <typename S>
Sequence<S> forward_graph(ad::Tape<S>& tape, const ModelVars<S>& vars, const ComplexCine& k_acq,
                          const SamplingMask& mask) {
  k_acq.expect_domain(Domain::kspace, "crnn forward");
  const auto& d = k_acq.dims();
  if (d.coils != 1) throw StructuralError("crnn forward reconstructs one coil at a time");
  if (mask.frames != d.frames || mask.lines != d.cols) {
    throw StructuralError("crnn forward: mask does not match k-space " + d.to_string());
  }
  const Sequence<S> zero_filled = to_channels(tape, ifft2c(k_acq));
  Sequence<S> x = zero_filled;
  const std::size_t n_iters = vars.iters.size();
  for (std::size_t i = 0; i < n_iters; ++i) {
    Sequence<S> y = crnn_block(x, vars.iters[i]);
    for (std::size_t t = 0; t < d.frames; ++t) {
      if (i + 1 == n_iters) y[t] = ad::add(y[t], zero_filled[t]);
      const std::span<const std::uint8_t> row(mask.bits.data() + t * mask.lines, mask.lines);
      x[t] = dc_layer(y[t], k_acq.slice(t, 0), row);
    }
    for (const auto& f : x) {
      for (S v : f.value()) {
        if (!std::isfinite(v)) throw NumericalError("non-finite activations in iteration " + std::to_string(i + 1));
      }
    }
  }
  return x;
}

ComplexCine forward(const ModelParams& model, const ComplexCine& k_acq, const SamplingMask& mask) {
  ad::Tape<double> tape;
  tape.set_grad_enabled(false);
  const ModelVars<double> vars = bind_params(tape, model);
  return from_channels(forward_graph(tape, vars, k_acq, mask));
}

RealImageSequence recon_crnn(const ComplexCine& k_us, const SamplingMask& mask, const ModelParams& model,
                             std::size_t n_threads) {
  k_us.expect_domain(Domain::kspace, "recon_crnn");
  const auto& d = k_us.dims();
  ComplexCine coils({d.frames, d.coils, d.rows, d.cols}, Domain::image);
  auto run = [&](std::size_t c) {
    const ComplexCine out = forward(model, k_us.coil(c), mask);
    for (std::size_t t = 0; t < d.frames; ++t) {
      auto src = out.slice(t, 0);
      std::copy(src.begin(), src.end(), coils.slice(t, c).begin());
    }
  };
  n_threads = std::clamp<std::size_t>(n_threads, 1, d.coils);
  if (n_threads == 1) {
    for (std::size_t c = 0; c < d.coils; ++c) run(c);
  } else {
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < n_threads; ++w) {
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t c = w; c < d.coils; c += n_threads) run(c);
      }));
    }
    for (auto& j : jobs) j.get();
  }
  return rss_combine(coils);
}

template <typename S>
ad::Var<S> loss(const Sequence<S>& pred, const Sequence<S>& target, const LossConfig& cfg) {
  if (pred.empty() || pred.size() != target.size()) throw StructuralError("loss: prediction and target lengths differ");
  if (!(cfg.ssim_weight >= 0.0)) throw ParameterError("ssim_weight must be >= 0");
  ad::Var<S> sq;
  std::size_t count = 0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    if (!(pred[t].shape() == target[t].shape())) throw StructuralError("loss: frame shape mismatch");
    const ad::Var<S> diff = ad::sub(pred[t], target[t]);
    const ad::Var<S> s = ad::sum(ad::mul(diff, diff));
    sq = sq.valid() ? ad::add(sq, s) : s;
    count += pred[t].numel();
  }
  ad::Var<S> total = ad::affine(sq, S(1) / static_cast<S>(count));
  if (cfg.ssim_weight == 0.0) return total;

  std::vector<ad::Var<S>> target_mag;
  double range = 0.0;
  for (const auto& f : target) {
    target_mag.push_back(ad::magnitude(f));
    for (S v : target_mag.back().value()) range = std::max(range, static_cast<double>(v));
  }
  const ad::SsimParams sp{cfg.ssim_window, cfg.k1, cfg.k2, range};
  ad::Var<S> ssim_sum;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const ad::Var<S> s = ad::ssim(ad::magnitude(pred[t]), target_mag[t].value(), sp);
    ssim_sum = ssim_sum.valid() ? ad::add(ssim_sum, s) : s;
  }
  const S alpha = static_cast<S>(cfg.ssim_weight);
  // alpha * (1 - mean SSIM)
  const ad::Var<S> ssim_term = ad::affine(ssim_sum, -alpha / static_cast<S>(pred.size()), alpha);
  return ad::add(total, ssim_term);
}

#define CINERECON_CRNN_INSTANTIATE(S)                                                                    \
  template ModelVars<S> bind_params(ad::Tape<S>&, const ModelParams&);                                   \
  template Sequence<S> bcrnn_layer(const Sequence<S>&, const BcrnnLayerVars<S>&);                        \
  template Sequence<S> crnn_block(const Sequence<S>&, const IterationVars<S>&);                          \
  template ad::Var<S> dc_layer(const ad::Var<S>&, std::span<const cplx>, std::span<const std::uint8_t>); \
  template Sequence<S> to_channels(ad::Tape<S>&, const ComplexCine&);                                    \
  template ComplexCine from_channels(const Sequence<S>&);                                                \
  template Sequence<S> forward_graph(ad::Tape<S>&, const ModelVars<S>&, const ComplexCine&,             \
                                     const SamplingMask&);                                               \
  template ad::Var<S> loss(const Sequence<S>&, const Sequence<S>&, const LossConfig&);

CINERECON_CRNN_INSTANTIATE(float)
CINERECON_CRNN_INSTANTIATE(double)

#undef CINERECON_CRNN_INSTANTIATE

}  // namespace cinerecon::crnn

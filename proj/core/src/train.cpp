#include <charconv>
#include <numeric>
#include <random>

#include "cinerecon/cxt.hpp"
#include "cinerecon/error.hpp"
#include "cinerecon/network.hpp"
#include "cinerecon/phantom.hpp"
#include "cinerecon/random.hpp"

namespace cinerecon::crnn {

namespace {

constexpr const char* kCheckpointKind = "res-crnn";

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw FormatError("checkpoint header lacks " + key, 0);
  double v = 0.0;
  const auto& s = it->second;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw FormatError("checkpoint header: bad value for " + key, 0);
  return v;
}

std::uint64_t parse_u64(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw FormatError("checkpoint header lacks " + key, 0);
  std::uint64_t v = 0;
  const auto& s = it->second;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw FormatError("checkpoint header: bad value for " + key, 0);
  return v;
}

std::filesystem::path adam_path(const std::filesystem::path& stem) {
  std::filesystem::path p = stem;
  p += ".adam.cxt";
  return p;
}

template <typename S>
ad::GradientSet step_gradients(const ModelParams& model, const TrainSample& sample, const LossConfig& cfg,
                               double& loss_value) {
  ad::Tape<S> tape;
  const ModelVars<S> vars = bind_params(tape, model);
  const Sequence<S> pred = forward_graph(tape, vars, sample.k_acq, sample.mask);
  const Sequence<S> target = to_channels<S>(tape, sample.target);
  const ad::Var<S> l = loss(pred, target, cfg);
  loss_value = static_cast<double>(l.item());
  tape.backward(l);
  ad::GradientSet grads;
  grads.reserve(vars.ordered.size());
  for (const auto& v : vars.ordered) grads.emplace_back(v.grad().begin(), v.grad().end());
  return grads;
}

template <typename S>
double loss_only(const ModelParams& model, const TrainSample& sample, const LossConfig& cfg) {
  ad::Tape<S> tape;
  tape.set_grad_enabled(false);
  const ModelVars<S> vars = bind_params(tape, model);
  const Sequence<S> pred = forward_graph(tape, vars, sample.k_acq, sample.mask);
  const Sequence<S> target = to_channels<S>(tape, sample.target);
  return static_cast<double>(loss(pred, target, cfg).item());
}

void check_sample(const TrainSample& s) {
  s.k_acq.expect_domain(Domain::kspace, "training sample k_acq");
  s.target.expect_domain(Domain::image, "training sample target");
  if (!(s.k_acq.dims() == s.target.dims()) || s.k_acq.dims().coils != 1) {
    throw StructuralError("training sample: k_acq " + s.k_acq.dims().to_string() + " and target " +
                          s.target.dims().to_string() + " must be matching single-coil cines");
  }
}

}  // namespace

std::vector<TrainSample> samples_from_instance(const ComplexCine& k_us, const CoilSensitivities& sens,
                                               const ComplexCine& gt, const SamplingMask& mask) {
  k_us.expect_domain(Domain::kspace, "samples_from_instance");
  const ComplexCine truth = phantom::coil_images(gt, sens);
  if (!(truth.dims() == k_us.dims())) {
    throw StructuralError("samples_from_instance: k-space " + k_us.dims().to_string() + " does not match coil images " +
                          truth.dims().to_string());
  }
  std::vector<TrainSample> out;
  for (std::size_t c = 0; c < k_us.dims().coils; ++c) out.push_back({k_us.coil(c), truth.coil(c), mask});
  return out;
}

TrainState init_train_state(const ArchConfig& arch, const TrainOptions& opts) {
  TrainState st;
  st.model = init_model(arch, opts.seed);
  st.optimizer = ad::AdamState::for_params(st.model.params, opts.adam);
  return st;
}

void train(TrainState& state, std::span<const TrainSample> data, const TrainOptions& opts) {
  if (data.empty()) throw ParameterError("train: no training samples");
  for (const auto& s : data) check_sample(s);
  state.optimizer.hyper = opts.adam;
  std::vector<std::size_t> order(data.size());
  for (std::size_t e = 0; e < opts.epochs; ++e) {
    const std::size_t epoch = state.epochs_done;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(opts.seed, 0x5eed0000ull + epoch));
    shuffle(order, rng);
    for (std::size_t idx : order) {
      double value = 0.0;
      const std::string step = std::to_string(state.optimizer.step_count + 1);
      ad::GradientSet grads;
      try {
        grads = opts.precision == Precision::f32 ? step_gradients<float>(state.model, data[idx], opts.loss, value)
                                                 : step_gradients<double>(state.model, data[idx], opts.loss, value);
      } catch (const NumericalError& e) {
        throw NumericalError("step " + step + ": " + e.what());
      }
      if (!std::isfinite(value)) throw NumericalError("non-finite loss at step " + step);
      ad::adam_step(state.model.params, grads, state.optimizer);
      const StepInfo info{state.optimizer.step_count, epoch, value};
      state.history.push_back(info);
      if (opts.on_step) opts.on_step(info);
    }
    ++state.epochs_done;
  }
}

double evaluate_loss(const ModelParams& model, const TrainSample& sample, const LossConfig& cfg, Precision precision) {
  check_sample(sample);
  return precision == Precision::f32 ? loss_only<float>(model, sample, cfg) : loss_only<double>(model, sample, cfg);
}

void save_checkpoint(const std::filesystem::path& stem, const TrainState& state, std::uint64_t seed) {
  std::vector<std::pair<std::string, std::string>> extra{{"kind", kCheckpointKind}};
  for (auto& kv : state.model.arch.to_key_values()) extra.push_back(std::move(kv));
  const auto& opt = state.optimizer;
  extra.insert(extra.end(), {{"seed", std::to_string(seed)},
                             {"epochs_done", std::to_string(state.epochs_done)},
                             {"adam.step", std::to_string(opt.step_count)},
                             {"adam.lr", format_double(opt.hyper.lr)},
                             {"adam.beta1", format_double(opt.hyper.beta1)},
                             {"adam.beta2", format_double(opt.hyper.beta2)},
                             {"adam.eps", format_double(opt.hyper.eps)}});
  ad::write_params(stem, state.model.params, extra);

  std::vector<double> moments;
  for (const auto& m : opt.m) moments.insert(moments.end(), m.begin(), m.end());
  for (const auto& v : opt.v) moments.insert(moments.end(), v.begin(), v.end());
  write_tensor(adam_path(stem), make_real64({moments.size()}, moments));
}

ModelParams load_model(const std::filesystem::path& stem) {
  ad::ParamFile file = ad::read_params(stem);
  auto kind = file.header.find("kind");
  if (kind == file.header.end() || kind->second != kCheckpointKind) {
    throw FormatError(ad::header_path(stem).string() + " is not a Res-CRNN checkpoint", 0);
  }
  ModelParams model{ArchConfig::from_key_values(file.header), std::move(file.params)};
  // The stored tensors must be exactly what the architecture declares.
  const ModelParams expected = init_model(model.arch, 0);
  const auto& want = expected.params.tensors();
  const auto& got = model.params.tensors();
  if (want.size() != got.size()) {
    throw StructuralError("checkpoint has " + std::to_string(got.size()) + " tensors, architecture expects " +
                          std::to_string(want.size()));
  }
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i].name != got[i].name || !(want[i].shape == got[i].shape)) {
      throw StructuralError("checkpoint tensor " + got[i].name + " " + got[i].shape.to_string() + " does not match " +
                            want[i].name + " " + want[i].shape.to_string());
    }
  }
  return model;
}

TrainState load_checkpoint(const std::filesystem::path& stem) {
  TrainState st;
  st.model = load_model(stem);
  const auto header = ad::read_params(stem).header;
  const ad::AdamHyper hyper{parse_double(header, "adam.lr"), parse_double(header, "adam.beta1"),
                            parse_double(header, "adam.beta2"), parse_double(header, "adam.eps")};
  st.optimizer = ad::AdamState::for_params(st.model.params, hyper);
  st.optimizer.step_count = parse_u64(header, "adam.step");
  st.epochs_done = parse_u64(header, "epochs_done");

  const std::vector<double> moments = real_values(read_tensor(adam_path(stem)));
  const std::size_t n = st.model.params.total_count();
  if (moments.size() != 2 * n) {
    throw FormatError(adam_path(stem).string() + ": expected " + std::to_string(2 * n) + " optimizer values, found " +
                          std::to_string(moments.size()),
                      0);
  }
  std::size_t off = 0;
  for (auto* set : {&st.optimizer.m, &st.optimizer.v}) {
    for (auto& t : *set) {
      std::copy(moments.begin() + off, moments.begin() + off + t.size(), t.begin());
      off += t.size();
    }
  }
  return st;
}

}  // namespace cinerecon::crnn

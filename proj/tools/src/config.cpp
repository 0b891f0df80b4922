#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

namespace cinerecon::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const KeySpec* find_spec(const std::string& key) {
  for (const auto& s : schema()) {
    if (s.key == key) return &s;
  }
  return nullptr;
}

void check_value(const KeySpec& spec, const std::string& value) {
  switch (spec.kind) {
    case ValueKind::uint:
      parse_uint(spec.key, value);
      break;
    case ValueKind::real:
      parse_real(spec.key, value);
      break;
    case ValueKind::boolean:
      if (value != "true" && value != "false") throw ConfigError(spec.key + ": expected true or false, got '" + value + "'");
      break;
    case ValueKind::choice:
      if (std::find(spec.choices.begin(), spec.choices.end(), value) == spec.choices.end()) {
        std::string all;
        for (const auto& c : spec.choices) all += (all.empty() ? "" : ", ") + c;
        throw ConfigError(spec.key + ": expected one of {" + all + "}, got '" + value + "'");
      }
      break;
  }
}

// Re-raises a library parameter error from a section check with the full key prefixed.
template <typename F>
auto with_prefix(const std::string& prefix, F&& f) {
  try {
    return f();
  } catch (const ParameterError& e) {
    throw ConfigError(prefix + e.what());
  }
}

}  // namespace

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || r.ec != std::errc{} || r.ptr != text.data() + text.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

double parse_real(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || r.ec != std::errc{} || r.ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ConfigError(key + ": expected a finite number, got '" + text + "'");
  }
  return v;
}

const std::vector<KeySpec>& schema() {
  using K = ValueKind;
  static const std::vector<KeySpec> s{
      {"seed", "7", K::uint, {}, "master seed for data, masks, initialization and shuffling"},
      {"phantom.h", "64", K::uint, {}, "image rows"},
      {"phantom.w", "64", K::uint, {}, "image columns (phase-encode lines)"},
      {"phantom.t", "12", K::uint, {}, "frames per cardiac cycle"},
      {"phantom.n_coils", "8", K::uint, {}, "receive coils"},
      {"phantom.r_inner", "0.12", K::real, {}, "blood-pool radius, fraction of min(h, w)"},
      {"phantom.r_outer", "0.2", K::real, {}, "myocardium outer radius, fraction of min(h, w)"},
      {"phantom.beat_amplitude", "0.1", K::real, {}, "relative radial oscillation of the blood pool"},
      {"phantom.n_beats", "1", K::real, {}, "cardiac cycles over the frames"},
      {"phantom.noise_sigma", "0.01", K::real, {}, "complex noise std relative to peak coil signal"},
      {"dataset.n_train", "40", K::uint, {}, "training instances"},
      {"dataset.n_test", "8", K::uint, {}, "held-out instances"},
      {"dataset.jitter", "0.1", K::real, {}, "relative jitter of radii and beat amplitude per instance"},
      {"mask.r", "12", K::real, {}, "acceleration"},
      {"mask.n_acs", "4", K::uint, {}, "always-sampled centre lines"},
      {"mask.density_decay", "2", K::real, {}, "variable-density exponent"},
      {"arch.n_iters", "3", K::uint, {}, "unrolled iterations"},
      {"arch.n_bcrnn_layers", "3", K::uint, {}, "bidirectional ConvRNN layers per iteration"},
      {"arch.feat_channels", "16", K::uint, {}, "feature channels k"},
      {"arch.hidden_channels", "2", K::uint, {}, "compressed recurrent state channels"},
      {"arch.share_weights", "false", K::boolean, {}, "reuse one block for every iteration"},
      {"loss.ssim_weight", "0.1", K::real, {}, "weight of (1 - SSIM) added to the MSE"},
      {"train.epochs", "10", K::uint, {}, "total epochs; a resumed run continues up to this count"},
      {"train.lr", "0.001", K::real, {}, "Adam learning rate"},
      {"train.beta1", "0.9", K::real, {}, "Adam beta1"},
      {"train.beta2", "0.999", K::real, {}, "Adam beta2"},
      {"train.eps", "1e-8", K::real, {}, "Adam epsilon"},
      {"train.precision", "single", K::choice, {"single", "double"}, "arithmetic of forward/backward passes"},
      {"cs.lambda_t_rel", "0.02", K::real, {}, "temporal TV weight relative to max |E^H y|"},
      {"cs.lambda_w_rel", "0.005", K::real, {}, "wavelet weight relative to max |E^H y|"},
      {"cs.rho", "0.1", K::real, {}, "ADMM penalty"},
      {"cs.max_admm_iters", "100", K::uint, {}, "ADMM iterations"},
      {"cs.cg_tol", "1e-6", K::real, {}, "CG relative residual tolerance"},
      {"cs.cg_max_iters", "20", K::uint, {}, "CG iterations per x-update"},
      {"cs.wavelet_levels", "2", K::uint, {}, "Haar decomposition levels"},
      {"cs.wavelet", "haar", K::choice, {"haar"}, "wavelet family"},
      {"cs.acs_width", "4", K::uint, {}, "centre columns used for sensitivity estimation"},
      {"cs.maps", "estimated", K::choice, {"estimated", "reference"},
       "ACS-estimated coil maps, or the maps stored with the dataset"},
      {"recon.threads", "1", K::uint, {}, "worker threads for per-coil network inference"},
  };
  return s;
}

RunConfig::RunConfig() {
  for (const auto& s : schema()) values_[s.key] = s.default_value;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  RunConfig cfg;
  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (auto it = seen.find(key); it != seen.end()) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + key + " already set on line " +
                        std::to_string(it->second));
    }
    seen[key] = lineno;
    try {
      cfg.set(key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const KeySpec* spec = find_spec(key);
  if (!spec) throw ConfigError("unknown config key '" + key + "'");
  check_value(*spec, value);
  values_[key] = value;
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::uint64_t RunConfig::get_uint(const std::string& key) const { return parse_uint(key, get(key)); }
double RunConfig::get_real(const std::string& key) const { return parse_real(key, get(key)); }
bool RunConfig::get_bool(const std::string& key) const { return get(key) == "true"; }

std::vector<std::pair<std::string, std::string>> RunConfig::items() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : schema()) out.emplace_back(s.key, values_.at(s.key));
  return out;
}

void RunConfig::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& [k, v] : items()) out << k << " = " << v << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

phantom::PhantomConfig RunConfig::phantom() const {
  phantom::PhantomConfig p;
  p.h = get_uint("phantom.h");
  p.w = get_uint("phantom.w");
  p.t = get_uint("phantom.t");
  p.n_coils = get_uint("phantom.n_coils");
  p.r_inner = get_real("phantom.r_inner");
  p.r_outer = get_real("phantom.r_outer");
  p.beat_amplitude = get_real("phantom.beat_amplitude");
  p.n_beats = get_real("phantom.n_beats");
  p.noise_sigma = get_real("phantom.noise_sigma");
  p.seed = get_uint("seed");
  with_prefix("phantom.", [&] { p.validate(); });
  return p;
}

sampling::MaskParams RunConfig::mask(std::size_t lines, std::size_t frames) const {
  sampling::MaskParams m;
  m.lines = lines;
  m.frames = frames;
  m.acceleration = get_real("mask.r");
  m.n_acs = get_uint("mask.n_acs");
  m.density_decay = get_real("mask.density_decay");
  m.seed = get_uint("seed");
  // Feasibility is a property of the whole parameter set; generating is cheap.
  with_prefix("mask: ", [&] { sampling::generate_lh_mask(m); });
  return m;
}

crnn::ArchConfig RunConfig::arch() const {
  crnn::ArchConfig a;
  a.n_iters = get_uint("arch.n_iters");
  a.n_bcrnn_layers = get_uint("arch.n_bcrnn_layers");
  a.feat_channels = get_uint("arch.feat_channels");
  a.hidden_channels = get_uint("arch.hidden_channels");
  a.share_weights = get_bool("arch.share_weights");
  with_prefix("", [&] { a.validate(); });
  return a;
}

crnn::LossConfig RunConfig::loss() const {
  crnn::LossConfig l;
  l.ssim_weight = get_real("loss.ssim_weight");
  if (l.ssim_weight < 0.0) throw ConfigError("loss.ssim_weight must be >= 0");
  return l;
}

crnn::TrainOptions RunConfig::train_options() const {
  crnn::TrainOptions o;
  o.loss = loss();
  o.adam.lr = get_real("train.lr");
  o.adam.beta1 = get_real("train.beta1");
  o.adam.beta2 = get_real("train.beta2");
  o.adam.eps = get_real("train.eps");
  if (!(o.adam.lr > 0.0)) throw ConfigError("train.lr must be > 0");
  if (!(o.adam.beta1 >= 0.0 && o.adam.beta1 < 1.0)) throw ConfigError("train.beta1 must be in [0, 1)");
  if (!(o.adam.beta2 >= 0.0 && o.adam.beta2 < 1.0)) throw ConfigError("train.beta2 must be in [0, 1)");
  if (!(o.adam.eps > 0.0)) throw ConfigError("train.eps must be > 0");
  o.epochs = get_uint("train.epochs");
  o.seed = get_uint("seed");
  o.precision = get("train.precision") == "double" ? crnn::Precision::f64 : crnn::Precision::f32;
  return o;
}

cs::CsConfig RunConfig::cs(double max_abs_adjoint) const {
  cs::CsConfig c;
  c.lambda_t = get_real("cs.lambda_t_rel") * max_abs_adjoint;
  c.lambda_w = get_real("cs.lambda_w_rel") * max_abs_adjoint;
  c.rho = get_real("cs.rho");
  c.max_admm_iters = get_uint("cs.max_admm_iters");
  c.cg_tol = get_real("cs.cg_tol");
  c.cg_max_iters = get_uint("cs.cg_max_iters");
  c.wavelet_levels = get_uint("cs.wavelet_levels");
  c.wavelet = cs::Wavelet::haar;
  with_prefix("cs.", [&] { c.validate(); });
  if (get_real("cs.lambda_t_rel") < 0.0) throw ConfigError("cs.lambda_t_rel must be >= 0");
  if (get_real("cs.lambda_w_rel") < 0.0) throw ConfigError("cs.lambda_w_rel must be >= 0");
  return c;
}

void RunConfig::validate() const {
  const auto p = phantom();
  mask(p.w, p.t);
  arch();
  train_options();
  cs(1.0);
  if (get_uint("dataset.n_test") < 1) throw ConfigError("dataset.n_test must be >= 1");
  const double jitter = get_real("dataset.jitter");
  if (!(jitter >= 0.0 && jitter < 0.5)) throw ConfigError("dataset.jitter must be in [0, 0.5)");
  if (get_uint("cs.acs_width") < 1) throw ConfigError("cs.acs_width must be >= 1");
  if (get_uint("cs.acs_width") > get_uint("mask.n_acs")) {
    throw ConfigError("cs.acs_width must not exceed mask.n_acs (only those lines are sampled in every frame)");
  }
  const std::size_t div = std::size_t{1} << get_uint("cs.wavelet_levels");
  if (p.h % div != 0 || p.w % div != 0) {
    throw ConfigError("cs.wavelet_levels: phantom.h and phantom.w must be divisible by " + std::to_string(div));
  }
}

}  // namespace cinerecon::cli

#include "dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>

#include "cinerecon/cxt.hpp"
#include "cinerecon/fft.hpp"
#include "cinerecon/phantom.hpp"
#include "cinerecon/random.hpp"

namespace cinerecon::cli {

namespace {

constexpr const char* kManifest = "manifest.txt";

// Stream ids under the master seed.
constexpr std::uint64_t kInstanceStream = 1000;
constexpr std::uint64_t kCoilStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kJitterStream = 3;

std::uint64_t instance_seed(std::uint64_t seed, std::size_t index) { return derive_seed(seed, kInstanceStream + index); }

}  // namespace

std::vector<std::size_t> DatasetInfo::train_ids() const {
  std::vector<std::size_t> v(n_train);
  for (std::size_t i = 0; i < n_train; ++i) v[i] = i;
  return v;
}

std::vector<std::size_t> DatasetInfo::test_ids() const {
  std::vector<std::size_t> v(n_test);
  for (std::size_t i = 0; i < n_test; ++i) v[i] = n_train + i;
  return v;
}

std::string instance_file(const std::string& prefix, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%03zu.cxt", index);
  return prefix + buf;
}

phantom::PhantomConfig instance_config(const RunConfig& cfg, std::size_t index) {
  phantom::PhantomConfig p = cfg.phantom();
  const double j = cfg.get_real("dataset.jitter");
  std::mt19937_64 rng(derive_seed(instance_seed(p.seed, index), kJitterStream));
  p.r_inner *= uniform_real(rng, 1.0 - j, 1.0 + j);
  p.r_outer *= uniform_real(rng, 1.0 - j, 1.0 + j);
  p.r_outer = std::min(p.r_outer, 0.49);
  p.beat_amplitude *= uniform_real(rng, 1.0 - j, 1.0 + j);
  p.beat_amplitude = std::min(p.beat_amplitude, 0.9 * p.r_inner);
  p.seed = instance_seed(p.seed, index);
  try {
    p.validate();
  } catch (const ParameterError& e) {
    throw ConfigError("dataset.jitter makes instance " + std::to_string(index) + " invalid: " + e.what());
  }
  return p;
}

DatasetInfo write_dataset(const RunConfig& cfg, const std::filesystem::path& dir) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  const phantom::PhantomConfig base = cfg.phantom();
  const sampling::SamplingMask mask = sampling::generate_lh_mask(cfg.mask(base.w, base.t));
  DatasetInfo info;
  info.n_train = cfg.get_uint("dataset.n_train");
  info.n_test = cfg.get_uint("dataset.n_test");
  info.manifest = cfg.items();
  info.manifest.emplace_back("effective_acceleration", std::to_string(sampling::effective_acceleration(mask)));

  const std::size_t total = info.n_train + info.n_test;
  for (std::size_t i = 0; i < total; ++i) {
    const phantom::PhantomConfig p = instance_config(cfg, i);
    const ComplexCine gt = phantom::generate_cine(p);
    const CoilSensitivities sens = phantom::generate_coil_maps(p.h, p.w, p.n_coils, derive_seed(p.seed, kCoilStream));
    const phantom::Acquisition acq =
        phantom::simulate_acquisition(gt, sens, mask, p.noise_sigma, derive_seed(p.seed, kNoiseStream));
    write_tensor(dir / instance_file("gt", i), to_cxt(gt));
    write_tensor(dir / instance_file("sens", i), to_cxt(sens));
    write_tensor(dir / instance_file("kus", i), to_cxt(acq.k_us));
    write_tensor(dir / instance_file("mask", i), sampling::to_cxt(mask));
    const std::string split = i < info.n_train ? "train" : "test";
    char key[32];
    std::snprintf(key, sizeof key, "instance.%03zu", i);
    info.manifest.emplace_back(key, split + " " + instance_file("gt", i) + " " + instance_file("sens", i) + " " +
                                        instance_file("kus", i) + " " + instance_file("mask", i));
  }

  std::ofstream out(dir / kManifest, std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / kManifest).string());
  out << "n_train = " << info.n_train << "\nn_test = " << info.n_test << '\n';
  for (const auto& [k, v] : info.manifest) out << k << " = " << v << '\n';
  if (!out) throw IoError("failed writing " + (dir / kManifest).string());
  return info;
}

DatasetInfo read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / kManifest);
  if (!in) throw IoError("no dataset manifest at " + (dir / kManifest).string());
  DatasetInfo info;
  bool have_train = false, have_test = false;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), value = line.substr(eq + 3);
    if (key == "n_train") {
      info.n_train = parse_uint("n_train", value);
      have_train = true;
    } else if (key == "n_test") {
      info.n_test = parse_uint("n_test", value);
      have_test = true;
    } else {
      info.manifest.emplace_back(key, value);
    }
  }
  if (!have_train || !have_test) throw FormatError((dir / kManifest).string() + " lacks n_train/n_test", 0);
  return info;
}

Instance load_instance(const std::filesystem::path& dir, std::size_t index) {
  Instance inst{cine_from_cxt(read_tensor(dir / instance_file("gt", index)), Domain::image),
                sensitivities_from_cxt(read_tensor(dir / instance_file("sens", index))),
                cine_from_cxt(read_tensor(dir / instance_file("kus", index)), Domain::kspace),
                sampling::mask_from_cxt(read_tensor(dir / instance_file("mask", index)))};
  const auto& g = inst.gt.dims();
  const auto& k = inst.k_us.dims();
  if (g.coils != 1 || g.frames != k.frames || g.rows != k.rows || g.cols != k.cols || inst.sens.coils != k.coils ||
      inst.sens.rows != k.rows || inst.sens.cols != k.cols || inst.mask.frames != k.frames ||
      inst.mask.lines != k.cols) {
    throw StructuralError("instance " + std::to_string(index) + " in " + dir.string() + " has inconsistent shapes");
  }
  return inst;
}

RealImageSequence reference_image(const Instance& inst) { return rss_combine(phantom::coil_images(inst.gt, inst.sens)); }

}  // namespace cinerecon::cli

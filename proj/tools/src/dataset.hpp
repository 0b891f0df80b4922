#pragma once

// On-disk phantom dataset: gt_###.cxt (T,1,H,W image), sens_###.cxt (C,H,W), kus_###.cxt
// (T,C,H,W undersampled k-space), mask_###.cxt (T,W) and manifest.txt. Instances
// [0, n_train) are for training, the next n_test are held out. All instances share one mask.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "cinerecon/sampling.hpp"
#include "cinerecon/tensor.hpp"
#include "config.hpp"

namespace cinerecon::cli {

struct Instance {
  ComplexCine gt;
  CoilSensitivities sens;
  ComplexCine k_us;
  sampling::SamplingMask mask;
};

struct DatasetInfo {
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::vector<std::pair<std::string, std::string>> manifest;

  std::vector<std::size_t> train_ids() const;
  std::vector<std::size_t> test_ids() const;
};

/// Phantom parameters of instance `index`: radii and beat amplitude jittered around the
/// configured values, the amplitude kept below the jittered inner radius.
phantom::PhantomConfig instance_config(const RunConfig& cfg, std::size_t index);

/// Writes the full dataset; returns the manifest.
DatasetInfo write_dataset(const RunConfig& cfg, const std::filesystem::path& dir);
DatasetInfo read_manifest(const std::filesystem::path& dir);
Instance load_instance(const std::filesystem::path& dir, std::size_t index);

std::string instance_file(const std::string& prefix, std::size_t index);

/// Noise-free coil-combined magnitude reference rss(sens * gt).
RealImageSequence reference_image(const Instance& inst);

}  // namespace cinerecon::cli

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cinerecon/autodiff.hpp"

namespace cinerecon::ad {

struct ParamTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;

  friend bool operator==(const ParamTensor&, const ParamTensor&) = default;
};

/// Ordered, named collection of trainable tensors (double-precision master copy).
class ParamSet {
 public:
  ParamTensor& add(std::string name, Shape shape, std::vector<double> values);

  const ParamTensor& at(const std::string& name) const;
  ParamTensor& at(const std::string& name);
  bool contains(const std::string& name) const { return index_.contains(name); }

  std::size_t size() const noexcept { return tensors_.size(); }
  std::size_t total_count() const noexcept;
  const std::vector<ParamTensor>& tensors() const noexcept { return tensors_; }
  std::vector<ParamTensor>& tensors() noexcept { return tensors_; }

  friend bool operator==(const ParamSet& a, const ParamSet& b) { return a.tensors_ == b.tensors_; }

 private:
  std::vector<ParamTensor> tensors_;
  std::map<std::string, std::size_t> index_;
};

/// Gradients aligned with ParamSet::tensors().
using GradientSet = std::vector<std::vector<double>>;

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamHyper&, const AdamHyper&) = default;
};

struct AdamState {
  AdamHyper hyper;
  GradientSet m;
  GradientSet v;
  std::uint64_t step_count = 0;

  static AdamState for_params(const ParamSet& params, AdamHyper hyper = {});

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Bias-corrected Adam. Validates every gradient before touching any parameter;
/// a non-finite entry raises NumericalError naming the parameter.
void adam_step(ParamSet& params, const GradientSet& grads, AdamState& state);

/// Writes `<stem>.cxt` (all parameters concatenated as one real64 vector) and the text header
/// `<stem>.hdr` listing `param <name> <d0>x<d1>... <offset> <count>` per tensor. `extra` lines
/// are emitted verbatim as `key=value` before the parameter table.
void write_params(const std::filesystem::path& stem, const ParamSet& params,
                  const std::vector<std::pair<std::string, std::string>>& extra = {});

struct ParamFile {
  ParamSet params;
  std::map<std::string, std::string> header;
};

ParamFile read_params(const std::filesystem::path& stem);

std::filesystem::path payload_path(const std::filesystem::path& stem);
std::filesystem::path header_path(const std::filesystem::path& stem);

}  // namespace cinerecon::ad

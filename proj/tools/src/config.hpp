#pragma once

// Flat key=value run configuration with a fixed schema. Every key has a default; unknown keys
// and unparsable values are rejected with ConfigError. Values keep the spelling they were given
// so the resolved file diffs cleanly against its source.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cinerecon/cs.hpp"
#include "cinerecon/error.hpp"
#include "cinerecon/network.hpp"
#include "cinerecon/phantom.hpp"
#include "cinerecon/sampling.hpp"

namespace cinerecon::cli {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class ValueKind { uint, real, boolean, choice };

struct KeySpec {
  std::string key;
  std::string default_value;
  ValueKind kind;
  std::vector<std::string> choices;  // for ValueKind::choice
  std::string help;
};

const std::vector<KeySpec>& schema();

class RunConfig {
 public:
  RunConfig();

  /// Reads `key = value` lines; `#` starts a comment. Duplicate keys are an error.
  static RunConfig from_file(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  /// Parses `key=value`.
  void set_assignment(const std::string& assignment);

  const std::string& get(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  double get_real(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  /// Schema order.
  std::vector<std::pair<std::string, std::string>> items() const;
  void write(const std::filesystem::path& path) const;

  /// Section views. Each validates its section and reports the failing key with its full name.
  phantom::PhantomConfig phantom() const;
  sampling::MaskParams mask(std::size_t lines, std::size_t frames) const;
  crnn::ArchConfig arch() const;
  crnn::LossConfig loss() const;
  crnn::TrainOptions train_options() const;
  /// Scaled weights need max |E^H y| of the data at hand.
  cs::CsConfig cs(double max_abs_adjoint) const;

  /// Runs every section check.
  void validate() const;

 private:
  std::map<std::string, std::string> values_;
};

std::uint64_t parse_uint(const std::string& key, const std::string& text);
double parse_real(const std::string& key, const std::string& text);

}  // namespace cinerecon::cli

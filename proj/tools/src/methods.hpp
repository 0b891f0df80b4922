#pragma once

#include <optional>
#include <string>

#include "cinerecon/cs.hpp"
#include "cinerecon/network.hpp"
#include "dataset.hpp"

namespace cinerecon::cli {

struct Recon {
  RealImageSequence image;
  double seconds = 0.0;           // wall clock of the reconstruction itself, no I/O
  cs::ObjectiveTrace trace;       // cs only
};

/// rss_combine(ifft2c(k_us)).
Recon recon_zf(const Instance& inst);
/// |x| of the SENSE-ADMM solution, with maps chosen by cs.maps.
Recon recon_cs(const Instance& inst, const RunConfig& cfg);
Recon recon_crnn(const Instance& inst, const crnn::ModelParams& model, std::size_t threads);

/// Dispatch on "zf", "cs", "crnn"; crnn requires a model.
Recon run_method(const std::string& method, const Instance& inst, const RunConfig& cfg,
                 const std::optional<crnn::ModelParams>& model);

}  // namespace cinerecon::cli

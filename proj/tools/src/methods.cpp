#include "methods.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "cinerecon/fft.hpp"

namespace cinerecon::cli {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

}  // namespace

Recon recon_zf(const Instance& inst) {
  const auto start = Clock::now();
  RealImageSequence img = rss_combine(ifft2c(inst.k_us));
  return {std::move(img), since(start), {}};
}

Recon recon_cs(const Instance& inst, const RunConfig& cfg) {
  const auto start = Clock::now();
  const CoilSensitivities sens = cfg.get("cs.maps") == "reference"
                                     ? inst.sens
                                     : cs::estimate_sensitivities(inst.k_us, inst.mask, cfg.get_uint("cs.acs_width"));
  const ComplexCine aty = cs::sense_adjoint(inst.k_us, sens, inst.mask);
  double max_abs = 0.0;
  for (const cplx& v : aty.data()) max_abs = std::max(max_abs, std::abs(v));
  cs::CsResult r = cs::admm_recon(inst.k_us, inst.mask, sens, cfg.cs(max_abs));
  RealImageSequence img = magnitude(r.image);
  return {std::move(img), since(start), std::move(r.trace)};
}

Recon recon_crnn(const Instance& inst, const crnn::ModelParams& model, std::size_t threads) {
  const auto start = Clock::now();
  RealImageSequence img = crnn::recon_crnn(inst.k_us, inst.mask, model, threads);
  return {std::move(img), since(start), {}};
}

Recon run_method(const std::string& method, const Instance& inst, const RunConfig& cfg,
                 const std::optional<crnn::ModelParams>& model) {
  if (method == "zf") return recon_zf(inst);
  if (method == "cs") return recon_cs(inst, cfg);
  if (method == "crnn") {
    if (!model) throw ConfigError("method crnn needs --checkpoint");
    return recon_crnn(inst, *model, std::max<std::uint64_t>(1, cfg.get_uint("recon.threads")));
  }
  throw ConfigError("unknown method '" + method + "' (expected zf, cs or crnn)");
}

}  // namespace cinerecon::cli

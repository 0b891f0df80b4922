#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "cinerecon/cxt.hpp"
#include "cinerecon/metrics.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "methods.hpp"
#include "pgm.hpp"

namespace cinerecon::cli {

namespace {

namespace fs = std::filesystem;

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool out_required = true) {
  cmd->add_option("--config", a.config, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", a.seed, "overrides the seed key");
  auto* out = cmd->add_option("--out", a.out, "output directory");
  if (out_required) out->required();
  cmd->add_option("--set", a.sets, "key=value override (repeatable)")->allow_extra_args(false);
}

RunConfig resolve(const CommonArgs& a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : RunConfig::from_file(a.config);
  if (a.seed) cfg.set("seed", std::to_string(*a.seed));
  for (const auto& s : a.sets) cfg.set_assignment(s);
  cfg.validate();
  return cfg;
}

fs::path prepare_out(const std::string& dir, const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  cfg.write(fs::path(dir) / "resolved_config.txt");
  return fs::path(dir);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string numbered(const std::string& prefix, std::size_t index, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%03zu", index);
  return prefix + buf + ext;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write " + p.string());
  f << std::setprecision(10);
  return f;
}

void write_trace(const fs::path& p, const cs::ObjectiveTrace& tr) {
  auto f = open_out(p);
  f << std::setprecision(17) << "iteration,objective,primal_residual,dual_residual\n";
  for (std::size_t i = 0; i < tr.size(); ++i) {
    f << i + 1 << ',' << tr.objective[i] << ',' << tr.primal_residual[i] << ',' << tr.dual_residual[i] << '\n';
  }
}

std::optional<crnn::ModelParams> maybe_model(const std::string& checkpoint) {
  if (checkpoint.empty()) return std::nullopt;
  return crnn::load_model(checkpoint);
}

std::size_t default_instance(const fs::path& data, std::optional<std::size_t> requested) {
  const DatasetInfo info = read_manifest(data);
  const std::size_t total = info.n_train + info.n_test;
  const std::size_t idx = requested.value_or(info.n_train);
  if (idx >= total) {
    throw ConfigError("--instance " + std::to_string(idx) + " out of range; dataset has " + std::to_string(total));
  }
  return idx;
}

// -- phantom -----------------------------------------------------------------

int cmd_phantom(const CommonArgs& a, std::ostream& out) {
  const RunConfig cfg = resolve(a);
  const fs::path dir = prepare_out(a.out, cfg);
  const DatasetInfo info = write_dataset(cfg, dir);
  out << "wrote " << info.n_train << " training and " << info.n_test << " held-out instances to " << dir.string()
      << '\n';
  return kOk;
}

// -- mask --------------------------------------------------------------------

int cmd_mask(const CommonArgs& a, std::ostream& out) {
  const RunConfig cfg = resolve(a);
  const fs::path dir = prepare_out(a.out, cfg);
  const auto p = cfg.phantom();
  const sampling::SamplingMask m = sampling::generate_lh_mask(cfg.mask(p.w, p.t));
  write_tensor(dir / "mask.cxt", sampling::to_cxt(m));
  out << "mask " << m.frames << " x " << m.lines << ": " << m.count(0) << " lines/frame, effective acceleration "
      << sampling::effective_acceleration(m) << '\n';
  for (std::size_t t = 0; t < m.frames; ++t) {
    for (std::size_t l = 0; l < m.lines; ++l) out << (m.at(t, l) ? '#' : '.');
    out << '\n';
  }
  return kOk;
}

// -- train -------------------------------------------------------------------

int cmd_train(const CommonArgs& a, const std::string& data, const std::string& resume, std::ostream& out) {
  const RunConfig cfg = resolve(a);
  const fs::path dir = prepare_out(a.out, cfg);
  const crnn::TrainOptions base = cfg.train_options();
  const DatasetInfo info = read_manifest(data);

  std::vector<crnn::TrainSample> samples;
  for (std::size_t i : info.train_ids()) {
    const Instance inst = load_instance(data, i);
    auto s = crnn::samples_from_instance(inst.k_us, inst.sens, inst.gt, inst.mask);
    std::move(s.begin(), s.end(), std::back_inserter(samples));
  }

  crnn::TrainState state;
  if (resume.empty()) {
    state = crnn::init_train_state(cfg.arch(), base);
  } else {
    state = crnn::load_checkpoint(resume);
    if (!(state.model.arch == cfg.arch())) throw ConfigError("--resume checkpoint architecture differs from arch.* keys");
    const auto header = ad::read_params(resume).header;
    if (header.at("seed") != cfg.get("seed")) throw ConfigError("--resume checkpoint was trained with seed " + header.at("seed"));
  }

  crnn::TrainOptions opts = base;
  opts.epochs = base.epochs > state.epochs_done ? base.epochs - state.epochs_done : 0;
  auto curve = open_out(dir / "loss.csv");
  curve << std::setprecision(17) << "step,epoch,loss\n";
  const auto start = std::chrono::steady_clock::now();
  double epoch_sum = 0.0;
  std::size_t epoch_n = 0;
  opts.on_step = [&](const crnn::StepInfo& s) {
    curve << s.step << ',' << s.epoch << ',' << s.loss << '\n';
    epoch_sum += s.loss;
    if (++epoch_n == samples.size()) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      out << "epoch " << s.epoch + 1 << "/" << base.epochs << "  mean loss " << epoch_sum / epoch_n << "  ("
          << std::fixed << std::setprecision(1) << secs << " s)" << std::defaultfloat << std::setprecision(6) << '\n'
          << std::flush;
      epoch_sum = 0.0;
      epoch_n = 0;
    }
  };
  out << "training on " << samples.size() << " sequences, " << crnn::parameter_count(state.model.arch)
      << " parameters, epochs " << state.epochs_done << " -> " << state.epochs_done + opts.epochs << '\n';
  crnn::train(state, samples, opts);
  crnn::save_checkpoint(dir / "model", state, cfg.get_uint("seed"));
  out << "checkpoint " << (dir / "model").string() << '\n';
  return kOk;
}

// -- recon -------------------------------------------------------------------

int cmd_recon(const CommonArgs& a, const std::string& data, const std::string& method,
              std::optional<std::size_t> instance, const std::string& checkpoint, std::ostream& out) {
  const RunConfig cfg = resolve(a);
  const std::size_t idx = default_instance(data, instance);
  const auto model = maybe_model(checkpoint);
  if (method == "crnn" && !model) throw ConfigError("method crnn needs --checkpoint");
  const Instance inst = load_instance(data, idx);
  const fs::path dir = prepare_out(a.out, cfg);

  const Recon r = run_method(method, inst, cfg, model);
  write_tensor(dir / numbered("recon_" + method, idx, ".cxt"), to_cxt(r.image));
  const metrics::MetricReport rep = metrics::evaluate(method, r.image, reference_image(inst), r.seconds);
  auto csv = open_out(dir / numbered("metrics_" + method, idx, ".csv"));
  metrics::write_csv_header(csv);
  metrics::write_csv_rows(csv, rep);
  if (method == "cs") write_trace(dir / numbered("trace_cs", idx, ".csv"), r.trace);
  out << method << " instance " << idx << ": SSIM " << rep.mean_ssim() << "  PSNR " << rep.mean_psnr_db()
      << " dB  NMSE " << rep.mean_nmse() << "  " << r.seconds << " s\n";
  return kOk;
}

// -- eval --------------------------------------------------------------------

int cmd_eval(const CommonArgs& a, const std::string& data, const std::string& recon_path,
             std::optional<std::size_t> instance, const std::string& label, std::ostream& out) {
  const RunConfig cfg = resolve(a);
  const std::size_t idx = default_instance(data, instance);
  const Instance inst = load_instance(data, idx);
  const RealImageSequence img = images_from_cxt(read_tensor(recon_path));
  const fs::path dir = prepare_out(a.out, cfg);
  const metrics::MetricReport rep = metrics::evaluate(label, img, reference_image(inst), 0.0);
  auto csv = open_out(dir / numbered("metrics_" + label, idx, ".csv"));
  metrics::write_csv_header(csv);
  metrics::write_csv_rows(csv, rep);
  out << label << " instance " << idx << ": SSIM " << rep.mean_ssim() << "  PSNR " << rep.mean_psnr_db()
      << " dB  NMSE " << rep.mean_nmse() << '\n';
  return kOk;
}

// -- compare -----------------------------------------------------------------

int cmd_compare(const CommonArgs& a, const std::string& data, const std::string& methods_arg,
                const std::string& instances_arg, const std::string& checkpoint, std::ostream& out) {
  const RunConfig cfg = resolve(a);
  const DatasetInfo info = read_manifest(data);
  const std::vector<std::string> methods = split_list(methods_arg);
  if (methods.empty()) throw ConfigError("--methods is empty");
  for (const auto& m : methods) {
    if (m != "zf" && m != "cs" && m != "crnn" && m != "ref") throw ConfigError("unknown method '" + m + "'");
  }
  std::vector<std::size_t> ids;
  if (instances_arg.empty()) {
    ids = info.test_ids();
  } else {
    for (const auto& s : split_list(instances_arg)) ids.push_back(parse_uint("--instances", s));
  }
  for (std::size_t id : ids) {
    if (id >= info.n_train + info.n_test) throw ConfigError("instance " + std::to_string(id) + " out of range");
  }
  const auto model = maybe_model(checkpoint);
  if (std::find(methods.begin(), methods.end(), "crnn") != methods.end() && !model) {
    throw ConfigError("method crnn needs --checkpoint");
  }
  const fs::path dir = prepare_out(a.out, cfg);

  struct Acc {
    std::vector<double> ssim, psnr, nmse, seconds;
  };
  std::vector<Acc> acc(methods.size());
  for (std::size_t n = 0; n < ids.size(); ++n) {
    const Instance inst = load_instance(data, ids[n]);
    const RealImageSequence ref = reference_image(inst);
    std::vector<RealImageSequence> images;
    auto csv = open_out(dir / numbered("metrics", ids[n], ".csv"));
    metrics::write_csv_header(csv);
    for (std::size_t m = 0; m < methods.size(); ++m) {
      Recon r = methods[m] == "ref" ? Recon{ref, 0.0, {}} : run_method(methods[m], inst, cfg, model);
      const metrics::MetricReport rep = metrics::evaluate(methods[m], r.image, ref, r.seconds);
      metrics::write_csv_rows(csv, rep);
      acc[m].ssim.insert(acc[m].ssim.end(), rep.ssim.begin(), rep.ssim.end());
      acc[m].psnr.insert(acc[m].psnr.end(), rep.psnr_db.begin(), rep.psnr_db.end());
      acc[m].nmse.insert(acc[m].nmse.end(), rep.nmse.begin(), rep.nmse.end());
      acc[m].seconds.push_back(r.seconds);
      out << "instance " << ids[n] << " " << methods[m] << ": PSNR " << rep.mean_psnr_db() << " dB, SSIM "
          << rep.mean_ssim() << ", " << r.seconds << " s\n";
      images.push_back(std::move(r.image));
    }
    if (n == 0) {
      std::vector<const RealImageSequence*> panels;
      for (const auto& im : images) panels.push_back(&im);
      const double white = ref.max() > 0.0 ? ref.max() : 1.0;
      for (std::size_t t = 0; t < ref.frames(); ++t) {
        write_pgm(dir / numbered("frame", t, ".pgm"), montage(panels, t, white));
      }
    }
  }

  auto summary = open_out(dir / "summary.csv");
  summary << "method,n_instances,ssim_mean,ssim_std,psnr_db_mean,psnr_db_std,nmse_mean,nmse_std,seconds_mean,"
             "seconds_std\n";
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const Acc& s = acc[m];
    summary << methods[m] << ',' << ids.size() << ',' << metrics::mean(s.ssim) << ',' << metrics::stddev(s.ssim) << ','
            << metrics::mean(s.psnr) << ',' << metrics::stddev(s.psnr) << ',' << metrics::mean(s.nmse) << ','
            << metrics::stddev(s.nmse) << ',' << metrics::mean(s.seconds) << ',' << metrics::stddev(s.seconds)
            << '\n';
    out << methods[m] << ": time " << metrics::mean(s.seconds) << " (" << metrics::stddev(s.seconds) << ") s\n";
  }
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dynamic cine MRI reconstruction: phantoms, CS-ADMM and Res-CRNN", "cinerecon"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string data, method = "zf", checkpoint, resume, methods = "zf,cs,crnn", instances, recon_path, label = "recon";
  std::optional<std::size_t> instance;

  auto* phantom = app.add_subcommand("phantom", "generate the synthetic multi-coil dataset");
  add_common(phantom, common);

  auto* mask = app.add_subcommand("mask", "generate and print the sampling mask");
  add_common(mask, common);

  auto* train = app.add_subcommand("train", "train Res-CRNN on the training split");
  add_common(train, common);
  train->add_option("--data", data, "dataset directory")->required();
  train->add_option("--resume", resume, "checkpoint stem to continue from");

  auto* recon = app.add_subcommand("recon", "reconstruct one instance");
  add_common(recon, common);
  recon->add_option("--data", data, "dataset directory")->required();
  recon->add_option("--method", method, "zf, cs or crnn")->check(CLI::IsMember({"zf", "cs", "crnn"}));
  recon->add_option("--instance", instance, "instance index (default: first held-out)");
  recon->add_option("--checkpoint", checkpoint, "model checkpoint stem (crnn)");

  auto* eval = app.add_subcommand("eval", "score a saved reconstruction against the reference");
  add_common(eval, common);
  eval->add_option("--data", data, "dataset directory")->required();
  eval->add_option("--recon", recon_path, "reconstruction .cxt (real, T x H x W)")->required();
  eval->add_option("--instance", instance, "instance index (default: first held-out)");
  eval->add_option("--label", label, "method label for the CSV");

  auto* compare = app.add_subcommand("compare", "side-by-side montages, metrics and timing");
  add_common(compare, common);
  compare->add_option("--data", data, "dataset directory")->required();
  compare->add_option("--methods", methods, "comma-separated subset of zf,cs,crnn,ref");
  compare->add_option("--instances", instances, "comma-separated indices (default: held-out split)");
  compare->add_option("--checkpoint", checkpoint, "model checkpoint stem (crnn)");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    if (phantom->parsed()) return cmd_phantom(common, out);
    if (mask->parsed()) return cmd_mask(common, out);
    if (train->parsed()) return cmd_train(common, data, resume, out);
    if (recon->parsed()) return cmd_recon(common, data, method, instance, checkpoint, out);
    if (eval->parsed()) return cmd_eval(common, data, recon_path, instance, label, out);
    if (compare->parsed()) return cmd_compare(common, data, methods, instances, checkpoint, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ParameterError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const Error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUnexpected;
  }
  return kUnexpected;
}

}  // namespace cinerecon::cli

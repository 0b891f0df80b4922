#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cinerecon/cxt.hpp"
#include "cinerecon/tensor.hpp"
#include "commands.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "pgm.hpp"

namespace cr = cinerecon;
namespace cli = cinerecon::cli;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "cinerecon_cli" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// 16x16, 4 frames, 2 coils, 2x: fast enough for every command. `extra` lines replace
// base lines with the same key.
fs::path small_config(const fs::path& dir, const std::string& extra = "") {
  std::vector<std::pair<std::string, std::string>> kv = {
      {"phantom.h", "16"},     {"phantom.w", "16"},      {"phantom.t", "4"},
      {"phantom.n_coils", "2"}, {"dataset.n_train", "3"}, {"dataset.n_test", "2"},
      {"mask.r", "2"},         {"arch.n_iters", "2"},    {"arch.feat_channels", "4"},
      {"train.epochs", "1"},   {"cs.max_admm_iters", "5"}};
  std::istringstream in(extra);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 3);
    auto it = std::find_if(kv.begin(), kv.end(), [&](const auto& p) { return p.first == key; });
    if (it == kv.end()) kv.emplace_back(key, value);
    else it->second = value;
  }
  const fs::path p = dir / "small.cfg";
  std::ofstream out(p);
  out << "# tiny pipeline\n";
  for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t count_ext(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext;
  return n;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST(Config, DefaultsParseAndValidate) {
  cli::RunConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.get_uint("seed"), 7u);
  EXPECT_EQ(c.arch().feat_channels, 16u);
  EXPECT_EQ(c.arch().n_iters, 3u);
  EXPECT_EQ(c.train_options().epochs, 10u);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  cli::RunConfig c;
  EXPECT_THROW(c.set("phantom.radius", "1"), cli::ConfigError);
  EXPECT_THROW(c.set("phantom.h", "-3"), cli::ConfigError);
  EXPECT_THROW(c.set("train.lr", "fast"), cli::ConfigError);
  EXPECT_THROW(c.set("train.precision", "half"), cli::ConfigError);
  EXPECT_THROW(c.set_assignment("no_equals_sign"), cli::ConfigError);
  c.set("phantom.r_inner", "0.3");
  try {
    c.validate();
    FAIL();
  } catch (const cli::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("phantom.r_inner"), std::string::npos) << e.what();
  }
}

TEST(Config, FileRoundtripAndDuplicates) {
  const fs::path d = fresh("cfgfile");
  cli::RunConfig c;
  c.set("mask.r", "8");
  c.set("arch.share_weights", "true");
  c.write(d / "a.cfg");
  const auto back = cli::RunConfig::from_file(d / "a.cfg");
  EXPECT_EQ(back.items(), c.items());
  std::ofstream(d / "dup.cfg") << "seed = 1\nseed = 2\n";
  EXPECT_THROW(cli::RunConfig::from_file(d / "dup.cfg"), cli::ConfigError);
}

TEST(Pgm, MontageLayoutAndRoundtrip) {
  const cr::RealImageSequence a(2, 5, 3, std::vector<double>(30, 0.5));
  const cr::RealImageSequence b(2, 5, 3, std::vector<double>(30, 2.0));
  const auto g = cli::montage({&a, &b, &a}, 1, 1.0);
  EXPECT_EQ(g.width, 3 * 3 + 2 * cli::kSeparatorPx);
  EXPECT_EQ(g.height, 5u);
  EXPECT_EQ(g.pixels[0], 32768);                          // round(0.5 * 65535)
  EXPECT_EQ(g.pixels[3], 0);                              // separator
  EXPECT_EQ(g.pixels[3 + cli::kSeparatorPx], 65535);      // clipped
  const fs::path p = fresh("pgm") / "m.pgm";
  cli::write_pgm(p, g);
  EXPECT_EQ(cli::read_pgm(p), g);
  const std::string raw = slurp(p);
  EXPECT_EQ(raw.rfind("P5\n", 0), 0u);
  EXPECT_NE(raw.find("65535\n"), std::string::npos);
  // big-endian: first sample 32768 = 0x80 0x00
  const std::size_t body = raw.size() - g.pixels.size() * 2;
  EXPECT_EQ(static_cast<unsigned char>(raw[body]), 0x80);
  EXPECT_EQ(static_cast<unsigned char>(raw[body + 1]), 0x00);
}

TEST(Cli, HelpAndParseErrors) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({}).code, cli::kConfigError);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kConfigError);
  EXPECT_EQ(run({"phantom"}).code, cli::kConfigError);  // --out is required
  EXPECT_EQ(run({"phantom", "--out", "x", "--config", "/no/such/file"}).code, cli::kConfigError);
}

TEST(Cli, InvalidRadiiExitTwoNamingKey) {
  const fs::path d = fresh("radii");
  const CliRun r = run({"phantom", "--out", (d / "data").string(), "--set", "phantom.r_inner=0.3"});
  EXPECT_EQ(r.code, cli::kConfigError);
  EXPECT_NE(r.err.find("r_inner"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(d / "data" / "manifest.txt"));
}

TEST(Cli, MissingDatasetIsDataError) {
  const fs::path d = fresh("nodata");
  EXPECT_EQ(run({"recon", "--data", (d / "none").string(), "--out", (d / "o").string(), "--method", "zf"}).code,
            cli::kDataError);
}

TEST(Cli, DefaultSplitWritesFortyEightInstances) {
  const fs::path d = fresh("split");
  const fs::path cfg = small_config(d);
  const CliRun r = run({"phantom", "--config", cfg.string(), "--out", (d / "data").string(), "--set",
                     "dataset.n_train=40", "--set", "dataset.n_test=8"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* ext : {"gt_", "sens_", "kus_", "mask_"}) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(d / "data")) n += e.path().filename().string().rfind(ext, 0) == 0;
    EXPECT_EQ(n, 48u) << ext;
  }
  const auto info = cli::read_manifest(d / "data");
  EXPECT_EQ(info.train_ids().size(), 40u);
  EXPECT_EQ(info.test_ids().front(), 40u);
  const std::string manifest = slurp(d / "data" / "manifest.txt");
  EXPECT_NE(manifest.find("kus_047.cxt"), std::string::npos);
}

TEST(Cli, ResolvedConfigReproducesRun) {
  const fs::path d = fresh("resolved");
  const fs::path cfg = small_config(d);
  ASSERT_EQ(run({"phantom", "--config", cfg.string(), "--seed", "11", "--set", "phantom.t=3", "--out",
                 (d / "a").string()})
                .code,
            0);
  ASSERT_EQ(run({"phantom", "--config", (d / "a" / "resolved_config.txt").string(), "--out", (d / "b").string()})
                .code,
            0);
  for (const auto& e : fs::directory_iterator(d / "a")) {
    EXPECT_EQ(slurp(e.path()), slurp(d / "b" / e.path().filename())) << e.path();
  }
  const std::string resolved = slurp(d / "a" / "resolved_config.txt");
  EXPECT_NE(resolved.find("seed = 11"), std::string::npos) << resolved;
  EXPECT_NE(resolved.find("phantom.t = 3"), std::string::npos) << resolved;
}

TEST(Cli, ZeroFilledOnFullMaskMatchesReference) {
  const fs::path d = fresh("fullmask");
  const fs::path cfg = small_config(d, "mask.r = 1\nphantom.noise_sigma = 0\n");
  ASSERT_EQ(run({"phantom", "--config", cfg.string(), "--out", (d / "data").string()}).code, 0);
  const CliRun r = run({"recon", "--config", cfg.string(), "--data", (d / "data").string(), "--method", "zf", "--out",
                     (d / "zf").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto vals = cr::real_values(cr::read_tensor(d / "zf" / "recon_zf_003.cxt"));
  const auto ref = cli::reference_image(cli::load_instance(d / "data", 3));
  ASSERT_EQ(vals.size(), ref.data().size());
  for (std::size_t i = 0; i < vals.size(); ++i) EXPECT_NEAR(vals[i], ref.data()[i], 1e-10);
  const auto rows = read_csv(d / "zf" / "metrics_zf_003.csv");
  ASSERT_EQ(rows.size(), 5u);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GT(std::stod(rows[i][5]), 0.0);
}

TEST(Cli, PipelineEndToEnd) {
  const fs::path d = fresh("pipeline");
  const fs::path cfg = small_config(d);
  const std::string data = (d / "data").string();
  ASSERT_EQ(run({"phantom", "--config", cfg.string(), "--out", data}).code, 0);

  const CliRun m = run({"mask", "--config", cfg.string(), "--out", (d / "mask").string()});
  ASSERT_EQ(m.code, 0) << m.err;
  EXPECT_TRUE(fs::exists(d / "mask" / "mask.cxt"));

  const CliRun tr = run({"train", "--config", cfg.string(), "--data", data, "--out", (d / "train").string()});
  ASSERT_EQ(tr.code, 0) << tr.err;
  const auto curve = read_csv(d / "train" / "loss.csv");
  ASSERT_EQ(curve.size(), 1u + 3 * 2);  // header + 3 instances x 2 coils
  EXPECT_EQ(curve[0], (std::vector<std::string>{"step", "epoch", "loss"}));
  const std::string ckpt = (d / "train" / "model").string();

  for (const char* method : {"zf", "cs", "crnn"}) {
    const CliRun r = run({"recon", "--config", cfg.string(), "--data", data, "--method", method, "--checkpoint", ckpt,
                       "--out", (d / "recon").string()});
    ASSERT_EQ(r.code, 0) << method << ": " << r.err;
  }
  EXPECT_TRUE(fs::exists(d / "recon" / "trace_cs_003.csv"));
  EXPECT_EQ(run({"recon", "--config", cfg.string(), "--data", data, "--method", "crnn", "--out",
                 (d / "nockpt").string()})
                .code,
            cli::kConfigError);

  const CliRun ev = run({"eval", "--config", cfg.string(), "--data", data, "--recon",
                      (d / "recon" / "recon_cs_003.cxt").string(), "--label", "cs", "--out", (d / "eval").string()});
  ASSERT_EQ(ev.code, 0) << ev.err;
  EXPECT_EQ(slurp(d / "eval" / "metrics_cs_003.csv").substr(0, 40),
            slurp(d / "recon" / "metrics_cs_003.csv").substr(0, 40));

  const CliRun cmp = run({"compare", "--config", cfg.string(), "--data", data, "--methods", "zf,cs", "--out",
                       (d / "cmp").string()});
  ASSERT_EQ(cmp.code, 0) << cmp.err;
  EXPECT_EQ(count_ext(d / "cmp", ".pgm"), 4u);
  EXPECT_TRUE(fs::exists(d / "cmp" / "summary.csv"));
  const auto img = cli::read_pgm(d / "cmp" / "frame_000.pgm");
  EXPECT_EQ(img.width, 2 * 16 + cli::kSeparatorPx);
  EXPECT_EQ(img.height, 16u);
  const auto summary = read_csv(d / "cmp" / "summary.csv");
  ASSERT_EQ(summary.size(), 3u);
  EXPECT_EQ(summary[0][8], "seconds_mean");
  EXPECT_EQ(summary[0][9], "seconds_std");
  EXPECT_EQ(summary[1][0], "zf");
  EXPECT_EQ(summary[2][0], "cs");
  EXPECT_EQ(summary[1][1], "2");
  EXPECT_GT(std::stod(summary[2][8]), 0.0);
}

TEST(Cli, TrainZeroEpochsWritesInitialCheckpoint) {
  const fs::path d = fresh("zeroepochs");
  const fs::path cfg = small_config(d, "train.epochs = 0\n");
  ASSERT_EQ(run({"phantom", "--config", cfg.string(), "--out", (d / "data").string()}).code, 0);
  const CliRun r = run({"train", "--config", cfg.string(), "--data", (d / "data").string(), "--out", (d / "t").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto c = cli::RunConfig::from_file(cfg);
  EXPECT_EQ(cr::crnn::load_model(d / "t" / "model"), cr::crnn::init_model(c.arch(), c.train_options().seed));
  EXPECT_EQ(read_csv(d / "t" / "loss.csv").size(), 1u);
}

TEST(Cli, DivergentTrainingIsNumericalFailure) {
  const fs::path d = fresh("diverge");
  const fs::path cfg = small_config(d, "train.lr = 1e200\ntrain.epochs = 3\n");
  ASSERT_EQ(run({"phantom", "--config", cfg.string(), "--out", (d / "data").string()}).code, 0);
  const CliRun r = run({"train", "--config", cfg.string(), "--data", (d / "data").string(), "--out", (d / "t").string()});
  EXPECT_EQ(r.code, cli::kNumericalError);
  EXPECT_NE(r.err.find("step"), std::string::npos) << r.err;
}

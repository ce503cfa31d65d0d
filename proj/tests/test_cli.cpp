#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "gpe/experiment.hpp"
#include "gpe/io.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace gpe {
namespace {

const char* kSmallEncoder = R"(kind = "encoder-train"
seed = 3

[dataset]
kind = "gaussian-mixture"
components = 3
ambient_dim = 10
n = 40
manifold_sigma = 0.15
noise_sigma = 0.01

[encoder]
latent_dim = 2
max_iters = 60
)";

fs::path write_file(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const fs::path& config, const fs::path& out, std::ostream* log = nullptr,
        std::optional<std::uint64_t> seed = {}) {
  RunOptions o;
  o.config = config;
  o.out = out;
  o.seed = seed;
  o.log = log;
  return run_experiment(o);
}

TEST(Cli, EncoderRunWritesOutputsAndManifest) {
  testing::TempDir tmp;
  const fs::path cfg = write_file(tmp / "enc.toml", kSmallEncoder);
  std::ostringstream log;
  ASSERT_EQ(run(cfg, tmp / "out", &log), kExitOk);
  for (const char* f : {"points.bin", "labels.csv", "codes.csv", "trace.csv", "encoder_report.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(tmp / "out" / f)) << f;
  const auto manifest = read_json(tmp / "out" / "manifest.json");
  EXPECT_EQ(manifest["kind"], "encoder-train");
  EXPECT_EQ(manifest["status"], "ok");
  EXPECT_EQ(manifest["exit_code"], 0);
  EXPECT_EQ(manifest["seed"], 3);
  EXPECT_EQ(manifest["code_version"], kCodeVersion);
  EXPECT_EQ(manifest["config_hash"].get<std::string>().size(), 16u);
  EXPECT_TRUE(manifest.contains("started_at"));
  EXPECT_TRUE(manifest.contains("finished_at"));
  const auto outputs = manifest["outputs"].get<std::vector<std::string>>();
  EXPECT_TRUE(std::is_sorted(outputs.begin(), outputs.end()));
  EXPECT_EQ(outputs.size(), 5u);
  const auto report = read_json(tmp / "out" / "encoder_report.json");
  EXPECT_TRUE(report["descent"]["telescoping_holds"].get<bool>());
  EXPECT_TRUE(report["descent"]["monotone"].get<bool>());
  EXPECT_TRUE(report.contains("schema"));
  // structured log: one JSON object per line
  std::istringstream lines(log.str());
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    EXPECT_NO_THROW((void)nlohmann::json::parse(line)) << line;
    ++n;
  }
  EXPECT_EQ(n, 2);
}

TEST(Cli, SameSeedGivesIdenticalOutputs) {
  testing::TempDir tmp;
  const fs::path cfg = write_file(tmp / "enc.toml", kSmallEncoder);
  ASSERT_EQ(run(cfg, tmp / "a"), kExitOk);
  ASSERT_EQ(run(cfg, tmp / "b"), kExitOk);
  int compared = 0;
  for (const auto& entry : fs::directory_iterator(tmp / "a")) {
    const std::string name = entry.path().filename().string();
    if (name == "manifest.json") continue;
    EXPECT_EQ(slurp(entry.path()), slurp(tmp / "b" / name)) << name;
    ++compared;
  }
  EXPECT_EQ(compared, 5);
  const auto ma = read_json(tmp / "a" / "manifest.json"), mb = read_json(tmp / "b" / "manifest.json");
  EXPECT_EQ(ma["outputs"], mb["outputs"]);
}

TEST(Cli, SeedOverrideChangesData) {
  testing::TempDir tmp;
  const fs::path cfg = write_file(tmp / "enc.toml", kSmallEncoder);
  ASSERT_EQ(run(cfg, tmp / "a"), kExitOk);
  ASSERT_EQ(run(cfg, tmp / "b", nullptr, 99), kExitOk);
  EXPECT_EQ(read_json(tmp / "b" / "manifest.json")["seed"], 99);
  EXPECT_NE(slurp(tmp / "a" / "points.bin"), slurp(tmp / "b" / "points.bin"));
  EXPECT_NE(read_json(tmp / "a" / "manifest.json")["config_hash"], read_json(tmp / "b" / "manifest.json")["config_hash"]);
}

TEST(Cli, ConfigErrorsExitBeforeWriting) {
  testing::TempDir tmp;
  const std::string base = kSmallEncoder;
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"negative_tol", base + "tol = -1.0\n"},
      {"unknown_key", base + "colour = \"red\"\n"},
      {"unknown_kind", "kind = \"nope\"\n"},
      {"bad_syntax", "kind = \n"},
      {"missing_input", "kind = \"decoder-train\"\n[input]\npoints = \"/nonexistent.bin\"\ncodes = \"/nonexistent.csv\"\n"},
      {"decoder_auto", "kind = \"decoder-train\"\n[input]\nencoder_run = \"" + (tmp / "none").string() +
                           "\"\n[decoder]\nstep_size = \"auto\"\n"},
  };
  for (const auto& [name, text] : cases) {
    const fs::path cfg = write_file(tmp / (name + ".toml"), text);
    std::ostringstream log;
    EXPECT_EQ(run(cfg, tmp / ("out_" + name), &log), kExitConfigError) << name;
    EXPECT_FALSE(fs::exists(tmp / ("out_" + name))) << name;
    EXPECT_NE(log.str().find("config_error"), std::string::npos) << name;
  }
  EXPECT_EQ(run(tmp / "absent.toml", tmp / "out_absent"), kExitConfigError);
}

TEST(Cli, OutputRootFromEnvironment) {
  testing::TempDir tmp;
  const fs::path cfg = write_file(tmp / "small_run.toml", kSmallEncoder);
  ::setenv(kOutputRootEnv, (tmp / "root").c_str(), 1);
  RunOptions o;
  o.config = cfg;
  const int code = run_experiment(o);
  ::unsetenv(kOutputRootEnv);
  ASSERT_EQ(code, kExitOk);
  EXPECT_TRUE(fs::exists(tmp / "root" / "small_run" / "manifest.json"));
}

TEST(Cli, DecoderDivergenceExitsThree) {
  testing::TempDir tmp;
  ASSERT_EQ(run(write_file(tmp / "enc.toml", kSmallEncoder), tmp / "enc"), kExitOk);
  const fs::path cfg = write_file(tmp / "dec.toml", "kind = \"decoder-train\"\n[input]\nencoder_run = \"" +
                                                        (tmp / "enc").string() +
                                                        "\"\n[decoder]\nstep_size = 50.0\nhidden = [8]\n");
  EXPECT_EQ(run(cfg, tmp / "dec"), kExitDiverged);
  const auto manifest = read_json(tmp / "dec" / "manifest.json");
  EXPECT_EQ(manifest["status"], "diverged");
  EXPECT_EQ(manifest["exit_code"], 3);
  EXPECT_TRUE(fs::exists(tmp / "dec" / "trace.csv"));
}

TEST(Cli, DecoderRunFromEncoderOutputs) {
  testing::TempDir tmp;
  ASSERT_EQ(run(write_file(tmp / "enc.toml", kSmallEncoder), tmp / "enc"), kExitOk);
  const fs::path cfg = write_file(tmp / "dec.toml", "kind = \"decoder-train\"\n[input]\nencoder_run = \"" +
                                                        (tmp / "enc").string() +
                                                        "\"\n[decoder]\nmax_iters = 200\nhidden = [8]\n");
  ASSERT_EQ(run(cfg, tmp / "dec"), kExitOk);
  const MlpMap dec = read_mlp_json(tmp / "dec" / "decoder.json");
  EXPECT_EQ(dec.input_dim(), 2);
  EXPECT_EQ(dec.output_dim(), 10);
  const auto rep = read_json(tmp / "dec" / "decoder_report.json");
  EXPECT_GT(rep["reconstruction_p2"].get<double>(), 0.0);
}

TEST(Cli, AuditRunChecksMarkovBounds) {
  testing::TempDir tmp;
  ASSERT_EQ(run(write_file(tmp / "enc.toml", kSmallEncoder), tmp / "enc"), kExitOk);
  const fs::path cfg = write_file(tmp / "audit.toml", "kind = \"audit\"\n[input]\nencoder_run = \"" +
                                                          (tmp / "enc").string() + "\"\n");
  ASSERT_EQ(run(cfg, tmp / "audit"), kExitOk);
  EXPECT_TRUE(fs::exists(tmp / "audit" / "audit.json"));
}

int shell(const std::string& args) {
  const int status = std::system((std::string(GPE_CLI_PATH) + " " + args + " 2>/dev/null").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(CliBinary, ArgumentErrorsExitTwo) {
  EXPECT_EQ(shell(""), 2);
  EXPECT_EQ(shell("run"), 2);
  EXPECT_EQ(shell("frobnicate x.toml"), 2);
  EXPECT_EQ(shell("run x.toml --threads 0"), 2);
  EXPECT_EQ(shell("run x.toml --seed abc"), 2);
  EXPECT_EQ(shell("run /nonexistent/config.toml"), 2);
}

TEST(CliBinary, RunsAConfig) {
  testing::TempDir tmp;
  const fs::path cfg = write_file(tmp / "enc.toml", kSmallEncoder);
  EXPECT_EQ(shell("run " + cfg.string() + " --out " + (tmp / "out").string() + " --threads 1 --seed 5"), 0);
  EXPECT_EQ(read_json(tmp / "out" / "manifest.json")["seed"], 5);
}

}  // namespace
}  // namespace gpe

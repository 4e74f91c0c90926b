#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace {

namespace fs = std::filesystem;

struct Result {
  int exit_code = -1;
  std::string out;
};

// Runs the CLI with stderr discarded; returns its exit status and stdout.
Result run_cli(const std::string& args) {
  const std::string cmd = std::string(SHRINKREC_CLI) + " " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string config(const std::string& name) { return std::string(SHRINKREC_SOURCE_DIR) + "/configs/" + name; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("shrinkrec-cli-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name) << text;
    return (path_ / name).string();
  }

 private:
  fs::path path_;
};

TEST(Cli, MeasurePrintsExactRow) {
  TempDir dir;
  const Result r = run_cli("measure -c " + config("measure_doubling.json") + " -o " + dir.path().string());
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.out.find("recurrence,1,1/2,0.5"), std::string::npos) << r.out;
}

TEST(Cli, MixingHandValue) {
  TempDir dir;
  const Result r = run_cli("mixing -c " + config("mixing_doubling.json") + " -o " + dir.path().string());
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.out.find("1/12"), std::string::npos) << r.out;
}

TEST(Cli, IntersectHandValue) {
  TempDir dir;
  const Result r = run_cli("intersect -c " + config("intersect_doubling.json") + " -o " + dir.path().string());
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.out.find("1/12"), std::string::npos) << r.out;
}

TEST(Cli, ForcedCountRows) {
  TempDir dir;
  const Result r = run_cli("count -c " + config("count_forced.json") + " -o " + dir.path().string());
  EXPECT_EQ(r.exit_code, 0);
  std::istringstream lines(r.out);
  std::string header, line;
  std::getline(lines, header);
  std::vector<std::string> last_fields;
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    ++rows;
    last_fields.clear();
    std::stringstream fields(line);
    std::string f;
    while (std::getline(fields, f, ',')) last_fields.push_back(f);
  }
  EXPECT_EQ(rows, 4u);
  // Columns of the count table are looked up by name to stay layout-agnostic.
  std::vector<std::string> names;
  std::stringstream hs(header);
  std::string h;
  while (std::getline(hs, h, ',')) names.push_back(h);
  const auto col = std::find(names.begin(), names.end(), "R") - names.begin();
  ASSERT_LT(static_cast<std::size_t>(col), last_fields.size()) << header;
  EXPECT_EQ(last_fields[col], "1");
}

TEST(Cli, InvalidConfigExitsOne) {
  TempDir dir;
  const std::string path = dir.write(
      "bad.json", R"({"mode": "count", "map": "doubling", "rate": "constant c=1/10", "n_max": 10, "samples": 0})");
  EXPECT_EQ(run_cli("count -c " + path + " -o " + dir.path().string()).exit_code, 1);
  const std::string garbage = dir.write("garbage.json", "{not json");
  EXPECT_EQ(run_cli("count -c " + garbage).exit_code, 1);
  EXPECT_NE(run_cli("count -c " + dir.path().string() + "/missing.json").exit_code, 0);
}

TEST(Cli, ThresholdFailureExitsTwo) {
  TempDir dir;
  const std::string path = dir.write("strict.json", R"({"mode": "experiment", "map": "doubling",
      "rate": "power c=1/2 p=1/2", "n_max": 2000, "samples": 20, "seed": 1,
      "thresholds": {"relative_error": 0}})");
  EXPECT_EQ(run_cli("experiment -q -c " + path + " -o " + dir.path().string() + " --no-svg").exit_code, 2);
}

TEST(Cli, ArtifactsAndDeterministicReport) {
  TempDir dir;
  const std::string path = dir.write("small.json", R"({"mode": "experiment", "map": "tent",
      "rate": "power c=1/2 p=1/2", "n_max": 5000, "samples": 8, "seed": 9,
      "thresholds": {"relative_error": 1}})");
  const fs::path a = dir.path() / "a", b = dir.path() / "b";
  const Result ra = run_cli("experiment -q -c " + path + " -o " + a.string() + " -j 1");
  const Result rb = run_cli("experiment -q -c " + path + " -o " + b.string() + " -j 2");
  EXPECT_EQ(ra.exit_code, rb.exit_code);
  ASSERT_TRUE(fs::exists(a / "report.json"));
  ASSERT_TRUE(fs::exists(a / "manifest.json"));
  EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));

  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  EXPECT_EQ(manifest["config_hash"].get<std::string>().size(), 64u);
  EXPECT_TRUE(manifest.contains("started_at"));
  for (const auto& artifact : manifest["artifacts"]) {
    EXPECT_TRUE(fs::exists(a / artifact.get<std::string>())) << artifact;
  }
  const auto report = nlohmann::json::parse(slurp(a / "report.json"));
  EXPECT_EQ(report["mode"], "experiment");
  EXPECT_EQ(report["config_hash"], manifest["config_hash"]);
}

TEST(Cli, SeedOverrideChangesHash) {
  TempDir dir;
  const fs::path a = dir.path() / "a", b = dir.path() / "b";
  run_cli("target -q -c " + config("target_forced.json") + " -o " + a.string());
  run_cli("target -q -c " + config("target_forced.json") + " -o " + b.string() + " --seed 5");
  const auto ha = nlohmann::json::parse(slurp(a / "manifest.json"))["config_hash"];
  const auto hb = nlohmann::json::parse(slurp(b / "manifest.json"))["config_hash"];
  EXPECT_NE(ha, hb);
}

TEST(Cli, JsonFormatPrintsReport) {
  TempDir dir;
  const Result r = run_cli("measure --format json -c " + config("measure_doubling.json") + " -o " + dir.path().string());
  EXPECT_EQ(r.exit_code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["mode"], "measure");
}

}  // namespace

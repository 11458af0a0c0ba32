#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const std::string g_cli_path = CLI_BINARY_PATH;

int run_cli(const std::string& args) {
  std::string cmd = g_cli_path + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  if (status < 0) return -1;
  return WEXITSTATUS(status);
}

fs::path make_workdir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("eimtrng_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string small_campaign_config() {
  return "rows = 5\n"
         "cols = 256\n"
         "vulnerable_fraction = 0.05\n"
         "threshold_median = 400000\n"
         "steepness_median = 40000\n"
         "victim_row = 2\n"
         "aggressor1 = 1\n"
         "aggressor2 = 3\n"
         "hammer_count = 250000\n"
         "start_hc = 100000\n"
         "end_hc = 300000\n"
         "step = 100000\n"
         "sets = 3\n"
         "iterations_per_set = 50\n";
}

}  // namespace

TEST_CASE("cli: --help succeeds and --version prints") {
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("--version") == 0);
}

TEST_CASE("cli: no subcommand is a usage error") {
  CHECK(run_cli("") == 2);
  CHECK(run_cli("no-such-subcommand") == 2);
}

TEST_CASE("cli: missing config file exits 2") {
  fs::path dir = make_workdir("missing_config");
  CHECK(run_cli("characterize --config " + (dir / "nope.cfg").string() +
                " --out " + dir.string()) == 2);
}

TEST_CASE("cli: unknown config key exits 2") {
  fs::path dir = make_workdir("bad_key");
  write_file(dir / "bad.cfg", small_campaign_config() + "no_such_key = 1\n");
  CHECK(run_cli("characterize --config " + (dir / "bad.cfg").string() +
                " --out " + dir.string()) == 2);
}

TEST_CASE("cli: characterize writes parseable outputs and a manifest") {
  fs::path dir = make_workdir("characterize");
  write_file(dir / "run.cfg", small_campaign_config());
  REQUIRE(run_cli("characterize --config " + (dir / "run.cfg").string() + " --seed 42 --out " +
                  dir.string()) == 0);

  for (const char* name : {"probability.json", "counts.csv", "probability.csv", "manifest.json"})
    CHECK(fs::exists(dir / name));

  std::ifstream in(dir / "probability.json");
  nlohmann::json report = nlohmann::json::parse(in);
  CHECK(report.contains("consistent"));
  CHECK(report.contains("probability"));

  std::ifstream min(dir / "manifest.json");
  nlohmann::json manifest = nlohmann::json::parse(min);
  CHECK(manifest["subcommand"] == "characterize");
  CHECK(manifest["master_seed"] == 42);
}

TEST_CASE("cli: characterize is reproducible for a fixed seed") {
  fs::path a = make_workdir("repro_a");
  fs::path b = make_workdir("repro_b");
  for (const fs::path& dir : {a, b}) {
    write_file(dir / "run.cfg", small_campaign_config());
    REQUIRE(run_cli("characterize --config " + (dir / "run.cfg").string() + " --seed 7 --out " +
                    dir.string()) == 0);
  }
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  CHECK(slurp(a / "probability.json") == slurp(b / "probability.json"));
  CHECK(slurp(a / "counts.csv") == slurp(b / "counts.csv"));
}

TEST_CASE("cli: sweep writes sweep.json and sweep.csv") {
  fs::path dir = make_workdir("sweep");
  write_file(dir / "run.cfg", small_campaign_config());
  REQUIRE(run_cli("sweep --config " + (dir / "run.cfg").string() + " --seed 9 --out " +
                  dir.string()) == 0);
  CHECK(fs::exists(dir / "sweep.json"));
  CHECK(fs::exists(dir / "sweep.csv"));
  std::ifstream in(dir / "sweep.json");
  nlohmann::json report = nlohmann::json::parse(in);
  CHECK(report.contains("points"));
}

TEST_CASE("cli: recover on a truncated bundle exits 3") {
  fs::path dir = make_workdir("bad_bundle");
  write_file(dir / "junk.eimb", "EI");
  write_file(dir / "meta", "4\n10\n");
  CHECK(run_cli("recover --bundle " + (dir / "junk.eimb").string() + " --keys " +
                (dir / "junk.eimb").string() + " --meta " + (dir / "meta").string()) == 3);
}

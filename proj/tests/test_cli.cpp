#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "faultbin/array.hpp"
#include "faultbin/cli.hpp"

using namespace faultbin;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch() {
  static const fs::path dir = [] {
    const auto d = fs::temp_directory_path() / "faultbin_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "faultbin");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

}  // namespace

TEST_CASE("parameters resolve over defaults") {
  const auto p = resolve_params("array build", {{"fr", 10}});
  CHECK(p["fr"].get<double>() == 10.0);
  CHECK(p["rows"] == 128);
  CHECK(p["chip_id"] == "chip-0");
  CHECK_THROWS_AS(resolve_params("array build", {{"nope", 1}}), CliError);
  CHECK_THROWS_AS(resolve_params("array build", {{"rows", "many"}}), CliError);
  CHECK_THROWS_AS(resolve_params("array build", {{"rows", 2.5}}), CliError);
  CHECK_THROWS_AS(resolve_params("bogus", json::object()), CliError);
  try {
    resolve_params("partition", json::object());
    FAIL("missing --netlist accepted");
  } catch (const CliError& e) {
    CHECK(e.code() == kExitUsage);
  }
}

TEST_CASE("flags override the config file") {
  const auto cfg = scratch() / "build.json";
  write(cfg, R"({"fr": 10, "rows": 16, "cols": 8, "seed": 4})");
  const auto out = scratch() / "build";
  REQUIRE(run({"array", "build", "--config", cfg.string(), "--rows", "32", "--out", out.string()}) == 0);
  const auto fsr = fsr_from_json(json::parse(slurp(out / "fsr.json")));
  CHECK(fsr.map.rows() == 32);
  CHECK(fsr.map.cols() == 8);
  CHECK(fsr.fr_max_non_crit == 10.0);
  const auto manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["command"] == "array build");
  CHECK(manifest["params"]["rows"] == 32);
  CHECK(manifest["params"]["seed"] == 4);
  CHECK(fs::exists(out / "run.log"));
}

TEST_CASE("manifest re-run reproduces outputs") {
  const auto a = scratch() / "gen_a";
  const auto b = scratch() / "gen_b";
  REQUIRE(run({"gen", "--kind", "cla", "--width", "8", "--out", a.string()}) == 0);
  REQUIRE(run({"run", (a / "manifest.json").string(), "--out", b.string(), "--threads", "2"}) == 0);
  CHECK(slurp(a / "netlist.txt") == slurp(b / "netlist.txt"));
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
}

TEST_CASE("build then deactivate at the same rate is a no-op") {
  const auto a = scratch() / "noop_build";
  const auto b = scratch() / "noop_deact";
  REQUIRE(run({"array", "build", "--fr", "5", "--rows", "64", "--cols", "16", "--out", a.string()}) == 0);
  REQUIRE(run({"array", "deactivate", "--fsr", (a / "fsr.json").string(), "--out", b.string()}) == 0);
  CHECK(slurp(a / "fsr.json") == slurp(b / "fsr.json"));
}

TEST_CASE("generated adder carries all carry annotations") {
  const auto out = scratch() / "cla";
  REQUIRE(run({"gen", "--kind", "cla", "--width", "16", "--out", out.string()}) == 0);
  const auto nl = parse_netlist(slurp(out / "netlist.txt"));
  for (int bit = 0; bit < 16; ++bit) CHECK(nl.carry_in_of_bit(bit).has_value());
}

TEST_CASE("exit codes") {
  const auto out = (scratch() / "err").string();
  CHECK(run({}) == kExitUsage);
  CHECK(run({"gen", "--width", "wide", "--out", out}) == kExitUsage);
  CHECK(run({"partition", "--out", out}) == kExitUsage);
  CHECK(run({"gen", "--kind", "divider", "--out", out}) == kExitValidation);
  CHECK(run({"partition", "--netlist", (scratch() / "missing.txt").string(), "--out", out}) == kExitIo);
  const auto bad = scratch() / "bad.txt";
  write(bad, "gate 1 and x y\n");
  CHECK(run({"partition", "--netlist", bad.string(), "--out", out}) == kExitParse);
  const auto bad_json = scratch() / "bad.json";
  write(bad_json, "{");
  CHECK(run({"gen", "--config", bad_json.string(), "--out", out}) == kExitParse);
  CHECK(run({"run", bad_json.string(), "--out", out}) == kExitParse);
  write(bad_json, R"({"format": "faultbin-fsr"})");
  CHECK(run({"array", "deactivate", "--fsr", bad_json.string(), "--out", out}) == kExitValidation);
  // Without a carry annotation the carry-in net must be named.
  const auto ripple = scratch() / "ripple";
  REQUIRE(run({"gen", "--kind", "ripple", "--out", ripple.string()}) == 0);
  std::istringstream lines(slurp(ripple / "netlist.txt"));
  std::string stripped;
  for (std::string line; std::getline(lines, line);) {
    if (line.rfind("annot carry_in_of_bit", 0) != 0) stripped += line + "\n";
  }
  const auto bare = scratch() / "bare.txt";
  write(bare, stripped);
  CHECK(run({"partition", "--netlist", bare.string(), "--out", out}) == kExitValidation);
  CHECK(run({"partition", "--netlist", bare.string(), "--carry-net", "nosuchnet", "--out", out}) == kExitValidation);
  CHECK(run({"partition", "--netlist", bare.string(), "--carry-net", "n4", "--out", out}) == kExitOk);
}

TEST_CASE("atpg report and pattern files") {
  const auto gen = scratch() / "mac";
  const auto out = scratch() / "atpg";
  REQUIRE(run({"gen", "--out", gen.string()}) == 0);
  REQUIRE(run({"atpg", "--netlist", (gen / "netlist.txt").string(), "--out", out.string()}) == 0);
  const auto report = json::parse(slurp(out / "report.json"));
  REQUIRE(report["rows"].size() == 3);
  for (const auto& row : report["rows"]) {
    CHECK(row["coverage"].get<double>() == 1.0);
    CHECK(row["resimulation_agrees"] == true);
  }
  const auto fsim = scratch() / "fsim";
  REQUIRE(run({"fsim", "--netlist", (gen / "netlist.txt").string(), "--patterns", (out / "patterns_noncrit.hex").string(),
               "--class", "noncrit", "--out", fsim.string()}) == 0);
  CHECK(json::parse(slurp(fsim / "fsim.json"))["coverage"].get<double>() == 1.0);
}

TEST_CASE("throughput recomputes from the fsr") {
  const auto a = scratch() / "tp_build";
  const auto b = scratch() / "tp";
  REQUIRE(run({"array", "build", "--fr", "10", "--rows", "32", "--cols", "8", "--out", a.string()}) == 0);
  CHECK(run({"array", "throughput", "--fsr", (a / "fsr.json").string(), "--out", b.string()}) == kExitValidation);
  REQUIRE(run({"array", "throughput", "--fsr", (a / "fsr.json").string(), "--steps", "7", "--out", b.string()}) == 0);
  const auto t = json::parse(slurp(b / "throughput.json"));
  // Nothing deactivated yet: every PE is live.
  CHECK(t["n_remaining_pe"] == 256);
  CHECK(t["systolic_extra_macs"] == 0);
}

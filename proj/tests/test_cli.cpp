#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <sys/wait.h>

#include "scenarios.hpp"

using namespace mfgnum::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mfgnum_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Json manifest(const fs::path& dir) { return Json::parse(slurp(dir / "manifest.json")); }

std::vector<std::vector<double>> numeric_rows(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

int run_binary(const std::string& args) {
  const int status = std::system((std::string(MFGNUM_BINARY) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("registry listing is stable and complete") {
  const auto a = format_listing();
  CHECK(a == format_listing());
  const auto names = list_scenarios();
  CHECK(names.size() == 18);
  std::set<std::string> unique;
  for (const auto& s : names) {
    unique.insert(s.name);
    CHECK(a.find(s.name) != std::string::npos);
    CHECK_FALSE(s.description.empty());
  }
  CHECK(unique.size() == names.size());
  for (const std::string n : {"lq-test1", "lq-test2", "fdm-smooth", "var-smooth-admm", "var-smooth-cp",
                              "sl-concentration-0.5", "mono-tc1", "cyber-mfg-m0=e4", "cyber-mfc-q"})
    CHECK(unique.count(n) == 1);
  CHECK_THROWS_AS(default_config("no-such-scenario"), ConfigError);
}

TEST_CASE("overrides keep the type of the default") {
  for (const auto& s : list_scenarios()) {
    auto cfg = default_config(s.name);
    REQUIRE(cfg.is_object());
    REQUIRE_FALSE(cfg.empty());
    // Re-applying every default as a string is the identity.
    const auto before = cfg;
    for (const auto& [k, v] : before.items()) {
      const auto text = v.is_string() ? v.get<std::string>() : v.dump();
      apply_override(cfg, k + "=" + text);
    }
    CHECK(cfg == before);
    merge_config(cfg, before);
    CHECK(cfg == before);
  }
  auto cfg = default_config("fdm-smooth");
  apply_override(cfg, "n_space=17");
  CHECK(cfg["n_space"].is_number_integer());
  CHECK(cfg["n_space"].get<int>() == 17);
  CHECK_THROWS_AS(apply_override(cfg, "n_space=1.5"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "n_space"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "bogus=1"), ConfigError);
  CHECK_THROWS_AS(merge_config(cfg, Json{{"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(merge_config(cfg, Json::array()), ConfigError);
}

TEST_CASE("validation failures name the field and exit with 1") {
  const auto root = scratch("invalid");
  auto cfg = default_config("fdm-smooth");
  cfg["n_space"] = -4;
  const auto r = run_scenario("fdm-smooth", cfg, root);
  CHECK(r.exit_code == kError);
  CHECK(r.status == "invalid_config");
  CHECK(r.message.find("n_space") != std::string::npos);
  CHECK(manifest(root / "fdm-smooth")["exit_code"] == 1);

  auto lq = default_config("lq-test1");
  lq["method"] = "gradient";
  const auto r2 = run_scenario("lq-test1", lq, root);
  CHECK(r2.exit_code == kError);
  CHECK(r2.message.find("method") != std::string::npos);
}

TEST_CASE("lq-test1 converges with decaying history") {
  const auto root = scratch("lq1");
  const auto r = run_scenario("lq-test1", default_config("lq-test1"), root);
  REQUIRE(r.exit_code == kOk);
  const auto m = manifest(root / "lq-test1");
  CHECK(m["manifest"] == "mfgnum-run v1");
  CHECK(m["status"] == "converged");
  CHECK(m["results"]["converged"] == true);
  CHECK(m["outputs"].size() == 2);
  const auto rows = numeric_rows(root / "lq-test1" / "history.csv");
  REQUIRE(rows.size() > 3);
  for (std::size_t k = 1; k < rows.size(); ++k) CHECK(rows[k][1] <= rows[k - 1][1]);
  CHECK(slurp(root / "lq-test1" / "history.csv").rfind("# schema: lq-history v1\n", 0) == 0);
}

TEST_CASE("declared divergence exits with 2") {
  const auto root = scratch("diverge");
  auto cfg = default_config("lq-test1");
  cfg["T"] = 10.0;
  cfg["damping"] = 0.0;
  cfg["max_iter"] = 2000;
  const auto r = run_scenario("lq-test1", cfg, root);
  CHECK(r.exit_code == kDiverged);
  CHECK(r.status == "diverged");
  const auto m = manifest(root / "lq-test1");
  CHECK(m["results"]["diverged"] == true);
  CHECK(m["exit_code"] == 2);
}

TEST_CASE("identical runs write identical bytes") {
  const auto a = scratch("det_a"), b = scratch("det_b");
  for (const std::string name : {"lq-test4", "cyber-mfg-m0=e1", "entropy-oracle"}) {
    REQUIRE(run_scenario(name, default_config(name), a).exit_code == kOk);
    REQUIRE(run_scenario(name, default_config(name), b).exit_code == kOk);
    for (const auto& f : manifest(a / name)["outputs"]) {
      const auto file = f.get<std::string>();
      CHECK_MESSAGE(slurp(a / name / file) == slurp(b / name / file), name << "/" << file);
    }
  }
}

TEST_CASE("binary exit statuses") {
  const auto root = scratch("binary");
  const auto out = " --out " + root.string();
  CHECK(run_binary("list") == 0);
  CHECK(run_binary("run lq-test1" + out) == 0);
  CHECK(run_binary("run lq-test1 --T 10 --damping 0 --max_iter=2000" + out) == 2);
  CHECK(run_binary("run fdm-smooth --set n_space=-4" + out) == 1);
  CHECK(run_binary("run fdm-smooth --bogus 1" + out) == 1);
  CHECK(run_binary("run no-such-scenario" + out) == 1);
  CHECK(run_binary("run lq-test1 lq-test3 --jobs 2" + out) == 0);
  CHECK(fs::exists(root / "lq-test3" / "poa.csv"));
  CHECK(run_binary("frobnicate") == 1);
}

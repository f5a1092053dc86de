#include <spawn.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scenarios.hpp"

extern char** environ;

namespace {

using namespace mfgnum::cli;

// After `run`, an unrecognized `--key value` or `--key=value` is shorthand for `--set key=value`.
std::vector<std::string> expand_shorthand(int argc, char** argv) {
  static const std::vector<std::string> known{"--set", "--config", "--out", "--jobs", "--help"};
  std::vector<std::string> out{argv[0]};
  bool in_run = false;
  for (int i = 1; i < argc; ++i) {
    std::string tok = argv[i];
    if (!in_run || tok.rfind("--", 0) != 0 || tok.size() < 3) {
      in_run = in_run || tok == "run";
      out.push_back(tok);
      continue;
    }
    const auto eq = tok.find('=');
    const std::string flag = tok.substr(0, eq);
    if (std::find(known.begin(), known.end(), flag) != known.end()) {
      out.push_back(tok);
    } else if (eq != std::string::npos) {
      out.insert(out.end(), {"--set", tok.substr(2)});
    } else if (i + 1 < argc) {
      out.insert(out.end(), {"--set", tok.substr(2) + "=" + argv[++i]});
    } else {
      throw ConfigError(tok.substr(2) + ": missing value");
    }
  }
  return out;
}

int run_one(const std::string& name, const std::vector<std::string>& sets, const std::string& config_file,
            const std::string& out_dir) {
  Json cfg;
  try {
    cfg = default_config(name);
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw ConfigError("config: cannot read " + config_file);
      Json file;
      try {
        file = Json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
      merge_config(cfg, file);
    }
    for (const auto& s : sets) apply_override(cfg, s);
  } catch (const ConfigError& e) {
    std::cerr << name << ": invalid configuration: " << e.what() << '\n';
    return kError;
  }
  const auto r = run_scenario(name, cfg, out_dir);
  std::cerr << name << ": " << r.status;
  if (!r.message.empty()) std::cerr << " (" << r.message << ")";
  std::cerr << '\n';
  return r.exit_code;
}

int combine(int a, int b) {
  if (a == kError || b == kError) return kError;
  return std::max(a, b);
}

// One child process per scenario, at most `jobs` at a time.
int run_parallel(const std::vector<std::string>& names, const std::vector<std::string>& sets,
                 const std::string& config_file, const std::string& out_dir, int jobs) {
  int status = kOk;
  std::size_t next = 0, running = 0;
  while (next < names.size() || running > 0) {
    while (running < static_cast<std::size_t>(jobs) && next < names.size()) {
      std::vector<std::string> args{"/proc/self/exe", "run", names[next++], "--out", out_dir};
      for (const auto& s : sets) args.insert(args.end(), {"--set", s});
      if (!config_file.empty()) args.insert(args.end(), {"--config", config_file});
      std::vector<char*> argv;
      for (auto& a : args) argv.push_back(a.data());
      argv.push_back(nullptr);
      pid_t pid = 0;
      if (posix_spawn(&pid, "/proc/self/exe", nullptr, nullptr, argv.data(), environ) != 0) {
        std::cerr << names[next - 1] << ": could not start a worker process\n";
        status = kError;
        continue;
      }
      ++running;
    }
    if (running == 0) break;
    int ws = 0;
    if (wait(&ws) < 0) break;
    --running;
    status = combine(status, WIFEXITED(ws) ? WEXITSTATUS(ws) : kError);
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean field game and mean field control solvers"};
  app.require_subcommand(1);
  std::string out_dir = "out";
  int jobs = 1;

  auto* list = app.add_subcommand("list", "Print the scenario registry");
  auto* run = app.add_subcommand("run", "Run one or more scenarios");
  std::vector<std::string> names, sets;
  std::string config_file;
  run->add_option("scenario", names, "Scenario names (see list)")->required();
  run->add_option("--set", sets, "Override a parameter, key=value (repeatable)");
  run->add_option("--config", config_file, "Flat JSON file of overrides");
  run->add_option("--out", out_dir, "Output root; each scenario writes to OUT/<scenario>");
  run->add_option("--jobs", jobs, "Scenarios run in parallel processes")->check(CLI::Range(1, 256));

  try {
    auto args = expand_shorthand(argc, argv);
    std::reverse(args.begin(), args.end());
    args.pop_back();
    app.parse(args);
  } catch (const ConfigError& e) {
    std::cerr << "invalid arguments: " << e.what() << '\n';
    return kError;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kError;
  }
  if (list->parsed()) {
    std::cout << format_listing();
    return kOk;
  }
  if (names.size() == 1) return run_one(names.front(), sets, config_file, out_dir);
  if (jobs == 1) {
    int status = kOk;
    for (const auto& n : names) status = combine(status, run_one(n, sets, config_file, out_dir));
    return status;
  }
  return run_parallel(names, sets, config_file, out_dir, jobs);
}

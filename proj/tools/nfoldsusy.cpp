#include <chrono>
#include <ctime>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nfoldsusy/runner.hpp"

namespace {

std::string utc_now() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Build and verify type-A N-fold supersymmetric models.\n"
               "Commands: check intertwine mother chain spectrum kernels, or `presets`."};
  std::vector<std::string> commands;
  std::string config_path, out_path;
  std::uint64_t seed = 0;
  app.add_option("commands", commands, "commands to run (or `presets`)")->required();
  app.add_option("--config", config_path, "TOML run configuration");
  app.add_option("--out", out_path, "write the JSON report here (default: stdout)");
  auto* seed_opt = app.add_option("--seed", seed, "override verify.seed");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  std::optional<std::uint64_t> seed_override;
  if (seed_opt->count() > 0) seed_override = seed;
  return nfs::cli::execute(commands, config_path, seed_override, out_path, std::cout, std::cerr, utc_now());
}

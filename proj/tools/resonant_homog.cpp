// resonant-homog <command> --config <path> [--seed N] [--force] [--out DIR]

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rh/app.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Effective permittivity and permeability of random dielectric rod media"};
  app.require_subcommand(1, 1);

  std::string config;
  std::uint64_t seed = 0;
  bool force = false;
  std::string out = ".";
  for (const auto& name : rh::known_commands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "JSON run description")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override numerics.seed");
    sub->add_flag("--force", force, "Proceed through hypothesis violations; resonant points become NaN");
    sub->add_option("--out", out, "Output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? rh::kExitOk : rh::kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  rh::RunOptions options;
  if (app.get_subcommands().front()->count("--seed") > 0) options.seed = seed;
  options.force = force;
  options.out_dir = out;

  const rh::RunResult result = rh::run_file(command, config, options);
  for (const auto& f : result.files) std::cout << f.string() << '\n';
  if (result.exit_code != rh::kExitOk) std::cerr << "resonant-homog: " << result.message << '\n';
  return result.exit_code;
}

// daeflow: run, validate and list the bundled experiments.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "flowlab/experiment.hpp"

namespace {

flowlab::Json load_config(const std::string& source) {
  // A preset name or a path to a JSON file.
  if (std::filesystem::exists(source)) {
    std::ifstream is(source);
    if (!is) throw std::runtime_error("cannot open " + source);
    return flowlab::Json::parse(is);
  }
  return flowlab::preset_config(source);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shallow-autoencoder interpolant laboratory"};
  app.require_subcommand(1);

  std::string config_source, out_dir = "out";
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "Run an experiment config or preset");
  run->add_option("config", config_source, "Preset name or JSON config path")
      ->required();
  run->add_option("--out", out_dir, "Output directory");
  std::uint64_t seed_value = 0;
  auto* seed_opt = run->add_option("--seed", seed_value, "Override the config seed");

  std::string validate_source;
  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("config", validate_source, "Preset name or JSON config path")
      ->required();

  std::string dump_dir;
  auto* presets = app.add_subcommand("presets", "List the bundled presets");
  presets->add_option("--write", dump_dir, "Also write each preset JSON to this dir");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*presets) {
      for (const auto& [name, blurb] : flowlab::list_presets())
        std::cout << name << "\t" << blurb << "\n";
      if (!dump_dir.empty()) {
        std::filesystem::create_directories(dump_dir);
        for (const auto& [name, blurb] : flowlab::list_presets()) {
          std::ofstream os(dump_dir + "/" + name + ".json");
          os << flowlab::preset_config(name).dump(2) << "\n";
        }
      }
      return 0;
    }

    if (*validate) {
      const std::string err = flowlab::validate_config(load_config(validate_source));
      if (err.empty()) {
        std::cout << "ok\n";
        return 0;
      }
      std::cerr << err << "\n";
      return 2;
    }

    if (*run) {
      if (seed_opt->count() > 0) seed = seed_value;
      const flowlab::RunResult res =
          flowlab::run_experiment(load_config(config_source), out_dir, seed);
      if (res.status != 0) {
        std::cerr << res.message << "\n";
        return res.status;
      }
      for (const auto& a : res.artifacts) std::cout << out_dir << "/" << a << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

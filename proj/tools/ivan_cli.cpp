#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ivan/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "ivan: builds value-added trade networks from world input-output tables,\n"
      "detects flow communities, decomposes them into potential and circular\n"
      "flows, and reports structural metrics plus an economic integration index."};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  bool force = false;
  bool strict = false;
  app.add_option("--config", config_path, "run configuration JSON")->required();
  app.add_option("--out", out_dir, "output directory (overrides config out_dir)");
  app.add_flag("--force", force, "recompute outputs even when cached");
  app.add_flag("--strict", strict, "treat accounting identity violations as errors");

  app.add_subcommand("build", "Leontief system and GVAN/IVAN networks per year");
  app.add_subcommand("communities", "threshold scan and community detection per year");
  app.add_subcommand("decompose", "potential/circular decomposition per community");
  app.add_subcommand("metrics", "structural reports and strength distributions");
  app.add_subcommand("integrate", "economic integration index time series");
  app.add_subcommand("all", "full pipeline, all stages in order");

  CLI11_PARSE(app, argc, argv);

  try {
    const std::string stage = app.get_subcommands().front()->get_name();
    const auto config = ivan::RunConfig::load(
        config_path, out_dir.empty() ? std::nullopt : std::make_optional(out_dir), strict);
    const auto result = ivan::run_pipeline(config, stage, force);
    if (!result.ok()) {
      for (const auto& failure : result.failures)
        std::cerr << "failed: year " << failure.year << " [" << failure.stage
                  << "]: " << failure.message << "\n";
      return 1;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

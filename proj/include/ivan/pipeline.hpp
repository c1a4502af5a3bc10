#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ivan/analysis.hpp"
#include "ivan/metrics.hpp"
#include "ivan/types.hpp"

namespace ivan {

/// Effective run configuration. Analysis keys are echoed canonically into
/// every output and hashed for stage caching; out_dir and workers are runtime
/// placement knobs and stay out of both, so identical configs produce
/// identical bytes wherever and however parallel they run.
struct RunConfig {
  std::vector<std::pair<int, std::filesystem::path>> year_manifests;  // ascending years
  std::vector<std::string> manifest_entries;  // as written in the config file
  std::filesystem::path regions_csv;          // empty when not configured
  std::string regions_entry;
  std::set<std::string> drop_countries;
  double rel_tol = 1e-6;
  bool strict = false;
  AnalysisParams params;
  LogBase log_base = LogBase::natural;
  std::filesystem::path out_dir = "out";
  int workers = 1;

  std::string config_echo;  // canonical one-line JSON of the analysis keys
  std::string config_hash;  // fnv1a-64 of config_echo, hex

  /// Parses the config JSON; relative input paths resolve against the config
  /// file's directory, out_dir against the working directory. Worker count
  /// comes from the IVAN_WORKERS environment variable (default 1).
  static RunConfig load(const std::filesystem::path& config_path,
                        const std::optional<std::string>& out_override, bool strict_override);
};

struct StageFailure {
  int year = 0;
  std::string stage;
  std::string message;
};

struct PipelineResult {
  std::vector<StageFailure> failures;
  bool ok() const { return failures.empty(); }
};

/// Runs one stage ("build", "communities", "decompose", "metrics",
/// "integrate") or "all". Per-year outputs already on disk with the current
/// config hash are skipped unless force is set.
PipelineResult run_pipeline(const RunConfig& config, const std::string& stage, bool force);

}  // namespace ivan

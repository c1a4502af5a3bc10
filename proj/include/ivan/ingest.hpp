#pragma once

#include <filesystem>
#include <set>
#include <string>

#include "ivan/types.hpp"

namespace ivan {

/// Accounting-identity check result. Residuals are |lhs - rhs| relative to
/// |T| (floored at 1 so zero-output rows are judged on absolute error).
struct ValidationReport {
  Eigen::VectorXd row_residual;  // T_i vs Z row sum + FD row sum
  Eigen::VectorXd col_residual;  // T_j vs Z column sum + VA_j
  double max_residual = 0.0;
  std::size_t worst_row = 0;
  std::size_t worst_col = 0;
  bool pass = true;
  std::string summary() const;
};

ValidationReport validate_accounting(const IOTable<double>& table, double rel_tol);

struct LoadOptions {
  double rel_tol = 1e-6;
  bool strict = false;  // strict: identity violations are errors, else warnings
};

/// Loads a table from a JSON manifest referencing Z/FD/VA (and optionally T)
/// CSV files. Relative paths resolve against the manifest's directory. The
/// manifest's drop_countries, if present, are applied after validation.
/// FD columns sharing a country label are summed into that country's column.
IOTable<double> load_io_table(const std::filesystem::path& manifest_path,
                              const LoadOptions& options = {});

/// Writes manifest + CSV files, inverse of load_io_table. Values are printed
/// in shortest round-trip form, so reloading reproduces them bit for bit.
void write_io_table(const IOTable<double>& table, const std::filesystem::path& dir,
                    const std::string& stem);

/// Removes the given countries' rows, columns and demand columns. Dropping
/// breaks global balance by construction, so identities are rechecked only
/// into `recheck` (when non-null), never enforced.
IOTable<double> drop_regions(const IOTable<double>& table,
                             const std::set<std::string>& codes,
                             ValidationReport* recheck = nullptr);

/// Two-column CSV (country, region); header row optional.
RegionMap load_region_map(const std::filesystem::path& path);

}  // namespace ivan

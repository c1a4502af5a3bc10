#include "ivan/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "csv_util.hpp"

namespace ivan {

namespace {

using nlohmann::json;

double identity_denominator(double total) { return std::max(std::abs(total), 1.0); }

/// Z CSV: header row of node labels, then one labeled row per node.
Matrix<double> read_labeled_matrix(const std::filesystem::path& path,
                                   const std::vector<std::string>& expected_rows,
                                   const std::vector<std::string>& expected_cols) {
  csv::Table t = csv::read_csv(path);
  if (t.rows.empty()) throw std::runtime_error(path.string() + ": empty file");
  const auto& header = t.rows.front();
  if (header.size() != expected_cols.size() + 1)
    throw std::runtime_error(path.string() + ": expected " +
                             std::to_string(expected_cols.size() + 1) + " columns, found " +
                             std::to_string(header.size()));
  for (std::size_t j = 0; j < expected_cols.size(); ++j)
    if (header[j + 1] != expected_cols[j])
      throw std::runtime_error(path.string() + ": column label '" + header[j + 1] +
                               "' does not match expected '" + expected_cols[j] + "'");
  if (t.rows.size() != expected_rows.size() + 1)
    throw std::runtime_error(path.string() + ": expected " +
                             std::to_string(expected_rows.size()) + " data rows, found " +
                             std::to_string(t.rows.size() - 1));
  Matrix<double> m(expected_rows.size(), expected_cols.size());
  for (std::size_t i = 0; i < expected_rows.size(); ++i) {
    const auto& row = t.rows[i + 1];
    if (row.size() != expected_cols.size() + 1)
      throw std::runtime_error(path.string() + ": row " + std::to_string(i + 2) +
                               " has " + std::to_string(row.size()) + " fields");
    if (row[0] != expected_rows[i])
      throw std::runtime_error(path.string() + ": row label '" + row[0] +
                               "' does not match expected '" + expected_rows[i] + "'");
    for (std::size_t j = 0; j < expected_cols.size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          csv::parse_double(row[j + 1], path, i + 1, j + 1);
  }
  return m;
}

/// FD CSV: like a labeled matrix, but duplicate column labels are summed
/// into the declared country order.
Matrix<double> read_final_demand(const std::filesystem::path& path,
                                 const std::vector<std::string>& expected_rows,
                                 const std::vector<std::string>& countries) {
  csv::Table t = csv::read_csv(path);
  if (t.rows.empty()) throw std::runtime_error(path.string() + ": empty file");
  const auto& header = t.rows.front();
  if (header.size() < 2) throw std::runtime_error(path.string() + ": no demand columns");
  std::map<std::string, std::size_t> country_index;
  for (std::size_t c = 0; c < countries.size(); ++c) country_index[countries[c]] = c;
  std::vector<std::size_t> col_target(header.size() - 1);
  for (std::size_t j = 1; j < header.size(); ++j) {
    auto it = country_index.find(header[j]);
    if (it == country_index.end())
      throw std::runtime_error(path.string() + ": demand column '" + header[j] +
                               "' is not a declared country");
    col_target[j - 1] = it->second;
  }
  if (t.rows.size() != expected_rows.size() + 1)
    throw std::runtime_error(path.string() + ": expected " +
                             std::to_string(expected_rows.size()) + " data rows, found " +
                             std::to_string(t.rows.size() - 1));
  Matrix<double> fd = Matrix<double>::Zero(static_cast<Eigen::Index>(expected_rows.size()),
                                           static_cast<Eigen::Index>(countries.size()));
  for (std::size_t i = 0; i < expected_rows.size(); ++i) {
    const auto& row = t.rows[i + 1];
    if (row.size() != header.size())
      throw std::runtime_error(path.string() + ": row " + std::to_string(i + 2) +
                               " has " + std::to_string(row.size()) + " fields");
    if (row[0] != expected_rows[i])
      throw std::runtime_error(path.string() + ": row label '" + row[0] +
                               "' does not match expected '" + expected_rows[i] + "'");
    for (std::size_t j = 1; j < row.size(); ++j)
      fd(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col_target[j - 1])) +=
          csv::parse_double(row[j], path, i + 1, j);
  }
  return fd;
}

/// Vector CSV: header row, then (node_label, value) rows.
Vector<double> read_labeled_vector(const std::filesystem::path& path,
                                   const std::vector<std::string>& expected_rows) {
  csv::Table t = csv::read_csv(path);
  if (t.rows.size() != expected_rows.size() + 1)
    throw std::runtime_error(path.string() + ": expected " +
                             std::to_string(expected_rows.size()) + " data rows, found " +
                             std::to_string(t.rows.empty() ? 0 : t.rows.size() - 1));
  Vector<double> v(expected_rows.size());
  for (std::size_t i = 0; i < expected_rows.size(); ++i) {
    const auto& row = t.rows[i + 1];
    if (row.size() != 2)
      throw std::runtime_error(path.string() + ": row " + std::to_string(i + 2) +
                               " must have exactly (label, value)");
    if (row[0] != expected_rows[i])
      throw std::runtime_error(path.string() + ": row label '" + row[0] +
                               "' does not match expected '" + expected_rows[i] + "'");
    v(static_cast<Eigen::Index>(i)) = csv::parse_double(row[1], path, i + 1, 1);
  }
  return v;
}

std::vector<std::string> node_codes(const std::vector<std::string>& countries,
                                    const std::vector<std::string>& sectors) {
  std::vector<std::string> codes;
  codes.reserve(countries.size() * sectors.size());
  for (const auto& c : countries)
    for (const auto& s : sectors) codes.push_back(c + ":" + s);
  return codes;
}

}  // namespace

std::string ValidationReport::summary() const {
  std::ostringstream os;
  os << (pass ? "pass" : "fail") << ", max residual " << max_residual << " (row "
     << worst_row << ", col " << worst_col << ")";
  return os.str();
}

ValidationReport validate_accounting(const IOTable<double>& table, double rel_tol) {
  if (rel_tol <= 0) throw std::invalid_argument("rel_tol must be positive");
  const auto n = static_cast<Eigen::Index>(table.node_count());
  ValidationReport report;
  report.row_residual.resize(n);
  report.col_residual.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double supply = table.intermediate.row(i).sum() + table.final_demand.row(i).sum();
    report.row_residual(i) =
        std::abs(table.total_output(i) - supply) / identity_denominator(table.total_output(i));
    const double cost = table.intermediate.col(i).sum() + table.value_added(i);
    report.col_residual(i) =
        std::abs(table.total_output(i) - cost) / identity_denominator(table.total_output(i));
  }
  double worst_row_value = 0.0, worst_col_value = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (report.row_residual(i) > worst_row_value) {
      worst_row_value = report.row_residual(i);
      report.worst_row = static_cast<std::size_t>(i);
    }
    if (report.col_residual(i) > worst_col_value) {
      worst_col_value = report.col_residual(i);
      report.worst_col = static_cast<std::size_t>(i);
    }
  }
  report.max_residual = std::max(worst_row_value, worst_col_value);
  report.pass = report.max_residual <= rel_tol;
  return report;
}

IOTable<double> load_io_table(const std::filesystem::path& manifest_path,
                              const LoadOptions& options) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open manifest: " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw std::runtime_error(manifest_path.string() + ": invalid JSON: " + e.what());
  }

  IOTable<double> table;
  try {
    table.year = manifest.at("year").get<int>();
    table.countries = manifest.at("countries").get<std::vector<std::string>>();
    table.sectors = manifest.at("sectors").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw std::runtime_error(manifest_path.string() + ": " + e.what());
  }
  if (table.countries.empty() || table.sectors.empty())
    throw std::runtime_error(manifest_path.string() + ": countries and sectors must be non-empty");

  const auto base = manifest_path.parent_path();
  auto resolve = [&](const std::string& key) {
    std::filesystem::path p = manifest.at(key).get<std::string>();
    return p.is_absolute() ? p : base / p;
  };

  const auto codes = node_codes(table.countries, table.sectors);
  table.intermediate = read_labeled_matrix(resolve("z_csv"), codes, codes);
  table.final_demand = read_final_demand(resolve("fd_csv"), codes, table.countries);
  table.value_added = read_labeled_vector(resolve("va_csv"), codes);
  if (manifest.contains("t_csv")) {
    table.total_output = read_labeled_vector(resolve("t_csv"), codes);
  } else {
    table.total_output = table.intermediate.rowwise().sum() + table.final_demand.rowwise().sum();
  }

  ValidationReport report = validate_accounting(table, options.rel_tol);
  if (!report.pass) {
    const std::string msg = "accounting identities violated: " + report.summary() +
                            " (worst row '" + codes[report.worst_row] + "', worst col '" +
                            codes[report.worst_col] + "')";
    if (options.strict) throw std::runtime_error(manifest_path.string() + ": " + msg);
    std::cerr << "warning: " << manifest_path.string() << ": " << msg << "\n";
  }

  if (manifest.contains("drop_countries")) {
    const auto drops = manifest.at("drop_countries").get<std::vector<std::string>>();
    if (!drops.empty())
      table = drop_regions(table, std::set<std::string>(drops.begin(), drops.end()));
  }
  return table;
}

void write_io_table(const IOTable<double>& table, const std::filesystem::path& dir,
                    const std::string& stem) {
  std::filesystem::create_directories(dir);
  const auto codes = node_codes(table.countries, table.sectors);
  const auto n = static_cast<Eigen::Index>(table.node_count());

  auto open = [&](const std::string& suffix) {
    std::ofstream out(dir / (stem + suffix));
    if (!out) throw std::runtime_error("cannot write " + (dir / (stem + suffix)).string());
    return out;
  };

  {
    auto out = open("_z.csv");
    out << "node";
    for (const auto& c : codes) out << "," << c;
    out << "\n";
    for (Eigen::Index i = 0; i < n; ++i) {
      out << codes[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < n; ++j)
        out << "," << csv::format_double(table.intermediate(i, j));
      out << "\n";
    }
  }
  {
    auto out = open("_fd.csv");
    out << "node";
    for (const auto& c : table.countries) out << "," << c;
    out << "\n";
    for (Eigen::Index i = 0; i < n; ++i) {
      out << codes[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(table.country_count()); ++j)
        out << "," << csv::format_double(table.final_demand(i, j));
      out << "\n";
    }
  }
  auto write_vector = [&](const std::string& suffix, const Vector<double>& v,
                          const std::string& column) {
    auto out = open(suffix);
    out << "node," << column << "\n";
    for (Eigen::Index i = 0; i < n; ++i)
      out << codes[static_cast<std::size_t>(i)] << "," << csv::format_double(v(i)) << "\n";
  };
  write_vector("_va.csv", table.value_added, "value_added");
  write_vector("_t.csv", table.total_output, "total_output");

  json manifest;
  manifest["year"] = table.year;
  manifest["countries"] = table.countries;
  manifest["sectors"] = table.sectors;
  manifest["z_csv"] = stem + "_z.csv";
  manifest["fd_csv"] = stem + "_fd.csv";
  manifest["va_csv"] = stem + "_va.csv";
  manifest["t_csv"] = stem + "_t.csv";
  std::ofstream out(dir / (stem + ".json"));
  if (!out) throw std::runtime_error("cannot write manifest");
  out << manifest.dump(2) << "\n";
}

IOTable<double> drop_regions(const IOTable<double>& table, const std::set<std::string>& codes,
                             ValidationReport* recheck) {
  for (const auto& code : codes)
    if (std::find(table.countries.begin(), table.countries.end(), code) ==
        table.countries.end())
      throw std::runtime_error("drop_regions: unknown country code '" + code + "'");
  if (codes.empty()) {
    if (recheck) *recheck = validate_accounting(table, 1e-6);
    return table;
  }

  IOTable<double> out;
  out.year = table.year;
  out.sectors = table.sectors;
  std::vector<std::size_t> keep_countries;
  for (std::size_t c = 0; c < table.country_count(); ++c)
    if (!codes.count(table.countries[c])) {
      keep_countries.push_back(c);
      out.countries.push_back(table.countries[c]);
    }

  const std::size_t n_s = table.sector_count();
  std::vector<Eigen::Index> keep_nodes;
  for (std::size_t c : keep_countries)
    for (std::size_t s = 0; s < n_s; ++s)
      keep_nodes.push_back(static_cast<Eigen::Index>(table.node_index(c, s)));

  const auto m = static_cast<Eigen::Index>(keep_nodes.size());
  out.intermediate.resize(m, m);
  out.final_demand.resize(m, static_cast<Eigen::Index>(keep_countries.size()));
  out.value_added.resize(m);
  out.total_output.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j)
      out.intermediate(i, j) = table.intermediate(keep_nodes[i], keep_nodes[j]);
    for (std::size_t c = 0; c < keep_countries.size(); ++c)
      out.final_demand(i, static_cast<Eigen::Index>(c)) =
          table.final_demand(keep_nodes[i], static_cast<Eigen::Index>(keep_countries[c]));
    out.value_added(i) = table.value_added(keep_nodes[i]);
    out.total_output(i) = table.total_output(keep_nodes[i]);
  }
  if (recheck) *recheck = validate_accounting(out, 1e-6);
  return out;
}

RegionMap load_region_map(const std::filesystem::path& path) {
  csv::Table t = csv::read_csv(path);
  RegionMap map;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    if (row.size() != 2)
      throw std::runtime_error(path.string() + ": row " + std::to_string(i + 1) +
                               ": expected (country, region)");
    if (i == 0 && (row[0] == "country" || row[0] == "Country")) continue;
    map.region_of[row[0]] = row[1];
  }
  return map;
}

}  // namespace ivan

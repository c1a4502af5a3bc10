#include "ivan/exports.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "csv_util.hpp"

namespace ivan {

namespace {

using nlohmann::json;

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

json metadata_json(const Metadata& meta) {
  json m;
  m["stage"] = meta.stage;
  m["stage_version"] = meta.stage_version;
  m["config_hash"] = meta.config_hash;
  if (!meta.config_echo.empty()) m["config"] = json::parse(meta.config_echo);
  for (const auto& [key, value] : meta.extra) m[key] = value;
  return m;
}

}  // namespace

std::string Metadata::csv_header() const {
  std::ostringstream os;
  os << "# ivan output\n";
  os << "# stage: " << stage << "/" << stage_version << "\n";
  os << "# config_hash: " << config_hash << "\n";
  if (!config_echo.empty()) os << "# config: " << config_echo << "\n";
  for (const auto& [key, value] : extra) os << "# " << key << ": " << value << "\n";
  return os.str();
}

std::string Metadata::gexf_description() const {
  std::ostringstream os;
  os << "stage=" << stage << "/" << stage_version << "; config_hash=" << config_hash;
  for (const auto& [key, value] : extra) os << "; " << key << "=" << value;
  if (!config_echo.empty()) os << "; config=" << config_echo;
  return os.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

std::string sniff_config_hash(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return {};
  std::string line;
  for (int i = 0; i < 50 && std::getline(in, line); ++i) {
    const std::string key = "config_hash";
    const auto pos = line.find(key);
    if (pos == std::string::npos) continue;
    auto start = line.find_first_of(":=", pos + key.size());
    if (start == std::string::npos) continue;
    ++start;
    while (start < line.size() &&
           (line[start] == ' ' || line[start] == '"' || line[start] == ':'))
      ++start;
    std::string hash;
    while (start < line.size() && std::isxdigit(static_cast<unsigned char>(line[start])))
      hash += line[start++];
    if (hash.size() == 16) return hash;
  }
  return {};
}

// --- network exports ---------------------------------------------------------

void write_edge_csv(const FlowNetwork<double>& net, const std::filesystem::path& path,
                    const Metadata& meta) {
  std::ostringstream os;
  os << meta.csv_header();
  os << "source_country,source_sector,target_country,target_sector,weight\n";
  const auto n = static_cast<Eigen::Index>(net.size());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double w = net.weights(i, j);
      if (w <= 0.0) continue;
      const auto& a = net.nodes[static_cast<std::size_t>(i)];
      const auto& b = net.nodes[static_cast<std::size_t>(j)];
      os << a.country << "," << a.sector << "," << b.country << "," << b.sector << ","
         << csv::format_double(w) << "\n";
    }
  write_file_atomic(path, os.str());
}

namespace {

void write_gexf_links(std::ostringstream& os, const std::vector<NodeLabel>& nodes,
                      const std::vector<std::tuple<std::size_t, std::size_t, double>>& links,
                      const Metadata& meta) {
  // degree within the exported link set drives the size attribute
  std::map<std::size_t, std::size_t> degree;
  for (const auto& [s, t, w] : links) {
    ++degree[s];
    ++degree[t];
  }
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<gexf xmlns=\"http://www.gexf.net/1.2draft\" version=\"1.2\">\n";
  os << "  <meta><creator>ivan</creator><description>"
     << xml_escape(meta.gexf_description()) << "</description></meta>\n";
  os << "  <graph defaultedgetype=\"directed\">\n";
  os << "    <attributes class=\"node\">\n";
  os << "      <attribute id=\"0\" title=\"size_sqrt_degree\" type=\"double\"/>\n";
  os << "    </attributes>\n";
  os << "    <nodes>\n";
  for (const auto& [id, deg] : degree) {
    os << "      <node id=\"" << id << "\" label=\"" << xml_escape(nodes[id].name())
       << "\"><attvalues><attvalue for=\"0\" value=\""
       << csv::format_double(std::sqrt(static_cast<double>(deg)))
       << "\"/></attvalues></node>\n";
  }
  os << "    </nodes>\n";
  os << "    <edges>\n";
  std::size_t edge_id = 0;
  for (const auto& [s, t, w] : links)
    os << "      <edge id=\"" << edge_id++ << "\" source=\"" << s << "\" target=\"" << t
       << "\" weight=\"" << csv::format_double(w) << "\"/>\n";
  os << "    </edges>\n";
  os << "  </graph>\n";
  os << "</gexf>\n";
}

}  // namespace

void write_gexf(const FlowNetwork<double>& net, const std::filesystem::path& path,
                const Metadata& meta) {
  std::vector<std::tuple<std::size_t, std::size_t, double>> links;
  const auto n = static_cast<Eigen::Index>(net.size());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (net.weights(i, j) > 0.0)
        links.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j),
                           net.weights(i, j));
  std::ostringstream os;
  write_gexf_links(os, net.nodes, links, meta);
  write_file_atomic(path, os.str());
}

void write_topk_circular_gexf(const HodgeDecomposition<double>& dec, std::size_t k,
                              const std::filesystem::path& path, const Metadata& meta) {
  using Link = std::tuple<double, Eigen::Index, Eigen::Index>;  // (|flow|, from, to)
  std::vector<Link> pairs;
  const Eigen::Index n = dec.circular.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double c = dec.circular(i, j);
      if (c > 0.0)
        pairs.emplace_back(c, i, j);
      else if (c < 0.0)
        pairs.emplace_back(-c, j, i);
    }
  std::sort(pairs.begin(), pairs.end(), [](const Link& a, const Link& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });
  if (pairs.size() > k) pairs.resize(k);
  std::vector<std::tuple<std::size_t, std::size_t, double>> links;
  for (const auto& [w, s, t] : pairs)
    links.emplace_back(static_cast<std::size_t>(s), static_cast<std::size_t>(t), w);
  std::ostringstream os;
  write_gexf_links(os, dec.nodes, links, meta);
  write_file_atomic(path, os.str());
}

// --- community exports --------------------------------------------------------

void write_partition_csv(const std::vector<int>& assignment,
                         const std::vector<NodeLabel>& nodes,
                         const std::vector<CommunityRegionInfo>& regions,
                         const std::filesystem::path& path, const Metadata& meta) {
  std::map<int, std::size_t> sizes;
  for (int community : assignment)
    if (community >= 0) ++sizes[community];
  std::ostringstream os;
  os << meta.csv_header();
  for (const auto& info : regions)
    os << "# community_" << info.community << ": size=" << info.size << " region="
       << info.dominant_region << " purity=" << csv::format_double(info.purity) << "\n";
  os << "node_country,node_sector,community_id,community_size\n";
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    const int community = assignment[a];
    os << nodes[a].country << "," << nodes[a].sector << "," << community << ","
       << (community >= 0 ? sizes[community] : 0) << "\n";
  }
  write_file_atomic(path, os.str());
}

PartitionFile load_partition_csv(const std::filesystem::path& path) {
  const auto table = csv::read_csv(path);
  if (table.rows.empty()) throw std::runtime_error(path.string() + ": empty partition file");
  PartitionFile out;
  for (std::size_t r = 1; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != 4)
      throw std::runtime_error(path.string() + ": malformed partition row " +
                               std::to_string(r + 1));
    out.nodes.push_back({row[0], row[1]});
    out.assignment.push_back(static_cast<int>(
        csv::parse_double(row[2], path, r, 2)));
  }
  return out;
}

void write_scan_csv(const ScanResult& scan, const std::filesystem::path& path,
                    const Metadata& meta) {
  std::ostringstream os;
  os << meta.csv_header();
  os << "# selection_rule: largest k with at least 2 communities above size_floor\n";
  os << "# size_floor: " << scan.size_floor << "\n";
  if (scan.selected_k)
    os << "# selected_k: " << *scan.selected_k << "\n";
  else
    os << "# selected_k: none\n";
  os << "k,num_large_communities,codelength\n";
  for (const auto& entry : scan.entries)
    os << entry.k << "," << entry.large_communities << ","
       << csv::format_double(entry.codelength) << "\n";
  write_file_atomic(path, os.str());
}

std::optional<std::size_t> load_scan_selected_k(const std::filesystem::path& path) {
  const auto table = csv::read_csv(path);
  for (const auto& comment : table.comments) {
    const std::string key = "# selected_k:";
    if (comment.rfind(key, 0) == 0) {
      std::string value = comment.substr(key.size());
      while (!value.empty() && value.front() == ' ') value.erase(value.begin());
      if (value == "none") return std::nullopt;
      return static_cast<std::size_t>(std::stoull(value));
    }
  }
  return std::nullopt;
}

void write_sankey_json(const std::vector<SankeyPair>& pairs, const std::filesystem::path& path,
                       const Metadata& meta) {
  json doc;
  doc["metadata"] = metadata_json(meta);
  doc["year_pairs"] = json::array();
  for (const auto& pair : pairs) {
    json entry;
    entry["year_a"] = pair.year_a;
    entry["year_b"] = pair.year_b;
    entry["links"] = json::array();
    for (const auto& link : pair.links)
      entry["links"].push_back({{"community_a", link.community_a},
                                {"community_b", link.community_b},
                                {"node_overlap", link.overlap}});
    doc["year_pairs"].push_back(std::move(entry));
  }
  write_file_atomic(path, doc.dump(2) + "\n");
}

// --- decomposition exports ------------------------------------------------------

void write_potentials_csv(const HodgeDecomposition<double>& dec,
                          const std::filesystem::path& path, const Metadata& meta) {
  const auto strength = dec.circular_strength();
  std::ostringstream os;
  os << meta.csv_header();
  os << "group_label,phi,circular_strength\n";
  for (std::size_t i = 0; i < dec.nodes.size(); ++i)
    os << dec.nodes[i].name() << ","
       << csv::format_double(dec.phi(static_cast<Eigen::Index>(i))) << ","
       << csv::format_double(strength(static_cast<Eigen::Index>(i))) << "\n";
  write_file_atomic(path, os.str());
}

void write_circular_csv(const HodgeDecomposition<double>& dec, const Matrix<double>* bilateral,
                        const std::filesystem::path& path, const Metadata& meta) {
  std::ostringstream os;
  os << meta.csv_header();
  os << "source,target,circular_flow,bilateral_circulation\n";
  const Eigen::Index n = dec.circular.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (dec.pair_weight(i, j) <= 0.0) continue;
      const double c = dec.circular(i, j);
      const Eigen::Index from = c >= 0.0 ? i : j;
      const Eigen::Index to = c >= 0.0 ? j : i;
      const double loop = bilateral ? (*bilateral)(i, j) : 0.0;
      os << dec.nodes[static_cast<std::size_t>(from)].name() << ","
         << dec.nodes[static_cast<std::size_t>(to)].name() << ","
         << csv::format_double(std::abs(c)) << "," << csv::format_double(loop) << "\n";
    }
  write_file_atomic(path, os.str());
}

std::vector<CircularEdge> load_circular_csv(const std::filesystem::path& path) {
  const auto table = csv::read_csv(path);
  if (table.rows.empty()) throw std::runtime_error(path.string() + ": empty circular file");
  std::vector<CircularEdge> out;
  for (std::size_t r = 1; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != 4)
      throw std::runtime_error(path.string() + ": malformed circular row " +
                               std::to_string(r + 1));
    CircularEdge edge;
    edge.source = row[0];
    edge.target = row[1];
    edge.circular = csv::parse_double(row[2], path, r, 2);
    edge.bilateral = csv::parse_double(row[3], path, r, 3);
    out.push_back(std::move(edge));
  }
  return out;
}

void write_rankings_csv(const PotentialRanking& potentials,
                        const std::vector<RankedEntry>& circulation,
                        const std::filesystem::path& path, const Metadata& meta) {
  std::ostringstream os;
  os << meta.csv_header();
  os << "rank,highest_potential,highest_phi,lowest_potential,lowest_phi,"
        "highest_circulation,circular_strength\n";
  const std::size_t rows = std::max({potentials.highest.size(), potentials.lowest.size(),
                                     circulation.size()});
  for (std::size_t r = 0; r < rows; ++r) {
    os << (r + 1) << ",";
    if (r < potentials.highest.size())
      os << potentials.highest[r].label << "," << csv::format_double(potentials.highest[r].value);
    else
      os << ",";
    os << ",";
    if (r < potentials.lowest.size())
      os << potentials.lowest[r].label << "," << csv::format_double(potentials.lowest[r].value);
    else
      os << ",";
    os << ",";
    if (r < circulation.size())
      os << circulation[r].label << "," << csv::format_double(circulation[r].value);
    else
      os << ",";
    os << "\n";
  }
  write_file_atomic(path, os.str());
}

// --- metrics and integration exports ----------------------------------------------

void write_ccdf_csv(const std::vector<std::pair<double, double>>& points,
                    const std::filesystem::path& path, const Metadata& meta) {
  std::ostringstream os;
  os << meta.csv_header();
  os << "strength,ccdf\n";
  for (const auto& [strength, ccdf] : points)
    os << csv::format_double(strength) << "," << csv::format_double(ccdf) << "\n";
  write_file_atomic(path, os.str());
}

void write_series_csv(const std::vector<SeriesRow>& rows, const std::filesystem::path& path,
                      const Metadata& meta) {
  std::ostringstream os;
  os << meta.csv_header();
  os << "year,community,region_label,size,E,numerator,denominator,mode\n";
  for (const auto& row : rows) {
    os << row.year << "," << row.community << "," << row.region << "," << row.size << ",";
    if (row.index) os << csv::format_double(*row.index);
    os << "," << csv::format_double(row.numerator) << ","
       << csv::format_double(row.denominator) << "," << row.mode << "\n";
  }
  write_file_atomic(path, os.str());
}

void write_sectoral_csv(const std::vector<SectoralRow>& rows,
                        const std::filesystem::path& path, const Metadata& meta) {
  std::ostringstream os;
  os << meta.csv_header();
  os << "year,community,sector,E_k,mode\n";
  for (const auto& row : rows)
    os << row.year << "," << row.community << "," << row.sector << ","
       << csv::format_double(row.index) << "," << row.mode << "\n";
  write_file_atomic(path, os.str());
}

// --- binary network cache -----------------------------------------------------------

namespace {

constexpr char kBinMagic[8] = {'I', 'V', 'A', 'N', 'B', 'I', 'N', '2'};

void put_u32(std::string& out, uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::string& out, uint64_t v) { out.append(reinterpret_cast<const char*>(&v), 8); }
void put_i32(std::string& out, int32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }
void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out.append(s);
}

struct BinReader {
  const std::string& data;
  std::size_t pos = 0;
  explicit BinReader(const std::string& d) : data(d) {}
  void need(std::size_t bytes) const {
    if (pos + bytes > data.size()) throw std::runtime_error("truncated network cache");
  }
  uint32_t u32() {
    need(4);
    uint32_t v;
    std::memcpy(&v, data.data() + pos, 4);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v;
    std::memcpy(&v, data.data() + pos, 8);
    pos += 8;
    return v;
  }
  int32_t i32() {
    need(4);
    int32_t v;
    std::memcpy(&v, data.data() + pos, 4);
    pos += 4;
    return v;
  }
  std::string str() {
    const uint32_t len = u32();
    need(len);
    std::string s = data.substr(pos, len);
    pos += len;
    return s;
  }
};

}  // namespace

void save_network_bin(const FlowNetwork<double>& net, int year,
                      const std::filesystem::path& path, const std::string& config_hash) {
  std::string out;
  out.append(kBinMagic, sizeof(kBinMagic));
  put_u32(out, 1);  // version
  put_i32(out, year);
  put_u32(out, static_cast<uint32_t>(net.kind));
  put_str(out, config_hash);
  put_str(out, net.tag);
  put_u64(out, net.size());
  for (const auto& node : net.nodes) {
    put_str(out, node.country);
    put_str(out, node.sector);
  }
  const auto n = static_cast<Eigen::Index>(net.size());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double v = net.weights(i, j);
      out.append(reinterpret_cast<const char*>(&v), sizeof(double));
    }
  write_file_atomic(path, out);
}

std::string read_network_bin_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::string head(256, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  if (head.size() < sizeof(kBinMagic) + 20 ||
      std::memcmp(head.data(), kBinMagic, sizeof(kBinMagic)) != 0)
    return {};
  try {
    BinReader reader(head);
    reader.pos = sizeof(kBinMagic);
    reader.u32();  // version
    reader.i32();  // year
    reader.u32();  // kind
    return reader.str();
  } catch (const std::exception&) {
    return {};
  }
}

CachedNetwork load_network_bin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing network cache: " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < sizeof(kBinMagic) ||
      std::memcmp(data.data(), kBinMagic, sizeof(kBinMagic)) != 0)
    throw std::runtime_error(path.string() + ": not a network cache file");
  BinReader reader(data);
  reader.pos = sizeof(kBinMagic);
  const uint32_t version = reader.u32();
  if (version != 1)
    throw std::runtime_error(path.string() + ": unsupported cache version " +
                             std::to_string(version));
  CachedNetwork cached;
  cached.year = reader.i32();
  cached.net.kind = static_cast<NetworkKind>(reader.u32());
  cached.config_hash = reader.str();
  cached.net.tag = reader.str();
  const uint64_t n = reader.u64();
  cached.net.nodes.resize(n);
  for (uint64_t i = 0; i < n; ++i) {
    cached.net.nodes[i].country = reader.str();
    cached.net.nodes[i].sector = reader.str();
  }
  cached.net.weights.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  reader.need(n * n * sizeof(double));
  for (uint64_t i = 0; i < n; ++i) {
    for (uint64_t j = 0; j < n; ++j) {
      double v;
      std::memcpy(&v, data.data() + reader.pos + j * sizeof(double), sizeof(double));
      cached.net.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
    reader.pos += n * sizeof(double);
  }
  return cached;
}

}  // namespace ivan

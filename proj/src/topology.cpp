#include "lfbench/topology.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lfbench/errors.hpp"

namespace lfb::topo {

namespace detail {
const char* preset_text(int size);  // generated from data/topologies
}

DeviceTopology DeviceTopology::make(int qubit_count, std::vector<Edge> edges,
                                    std::string name) {
  if (qubit_count <= 0)
    throw DataError("qubit count must be positive, got " +
                    std::to_string(qubit_count));
  for (auto& [a, b] : edges) {
    if (a == b)
      throw DataError("self-loop on qubit " + std::to_string(a));
    if (a > b) std::swap(a, b);
    if (a < 0 || b >= qubit_count)
      throw DataError("edge " + std::to_string(a) + "-" + std::to_string(b) +
                      " references a qubit outside [0, " +
                      std::to_string(qubit_count) + ")");
  }
  std::sort(edges.begin(), edges.end());
  auto dup = std::adjacent_find(edges.begin(), edges.end());
  if (dup != edges.end())
    throw DataError("duplicate edge " + std::to_string(dup->first) + "-" +
                    std::to_string(dup->second));

  DeviceTopology t;
  t.qubit_count_ = qubit_count;
  t.edges_ = std::move(edges);
  t.name_ = std::move(name);
  t.adj_.assign(qubit_count, {});
  for (const auto& [a, b] : t.edges_) {
    t.adj_[a].push_back(b);
    t.adj_[b].push_back(a);
  }
  for (auto& nbrs : t.adj_) std::sort(nbrs.begin(), nbrs.end());
  return t;
}

bool DeviceTopology::has_edge(int a, int b) const {
  if (a < 0 || a >= qubit_count_ || b < 0 || b >= qubit_count_ || a == b)
    return false;
  const auto& nbrs = adj_[a];
  return std::binary_search(nbrs.begin(), nbrs.end(), b);
}

namespace {

struct Line {
  int number;
  std::string text;
};

[[noreturn]] void parse_fail(int line, const std::string& what) {
  throw DataError("topology line " + std::to_string(line) + ": " + what);
}

int parse_int(std::string_view s, int line, const char* what) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    parse_fail(line, std::string("bad ") + what + " '" + std::string(s) + "'");
  return value;
}

std::string trim(std::string s) {
  auto notspace = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
  return s;
}

}  // namespace

TopologyDocument parse_topology_document(std::string_view text) {
  std::vector<Line> lines;
  {
    int number = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
      size_t eol = text.find('\n', pos);
      if (eol == std::string_view::npos) eol = text.size();
      ++number;
      std::string raw(text.substr(pos, eol - pos));
      if (auto hash = raw.find('#'); hash != std::string::npos)
        raw.erase(hash);
      // records may also be separated by ';' on one line
      std::stringstream ss(raw);
      std::string piece;
      while (std::getline(ss, piece, ';')) {
        piece = trim(piece);
        if (!piece.empty()) lines.push_back({number, piece});
      }
      pos = eol + 1;
    }
  }

  if (lines.empty()) throw DataError("topology document is empty");
  if (lines.front().text.rfind("n=", 0) != 0)
    parse_fail(lines.front().number, "expected leading n=<count> record");

  int qubit_count =
      parse_int(std::string_view(lines.front().text).substr(2),
                lines.front().number, "qubit count");
  if (qubit_count <= 0)
    parse_fail(lines.front().number, "qubit count must be positive");

  std::string name;
  std::vector<Edge> edges;
  std::set<Edge> seen;
  GridChains grids;
  bool in_grids = false;

  for (size_t i = 1; i < lines.size(); ++i) {
    const auto& [number, item] = lines[i];
    if (item == "[grids]") {
      in_grids = true;
      continue;
    }
    if (item.rfind("name=", 0) == 0) {
      name = trim(item.substr(5));
      continue;
    }
    if (in_grids) {
      std::istringstream ss(item);
      std::string family;
      ss >> family;
      if (family != "h" && family != "v")
        parse_fail(number, "grid family must be h or v, got '" + family + "'");
      std::vector<int> chain;
      int q;
      while (ss >> q) chain.push_back(q);
      if (chain.size() < 2) parse_fail(number, "grid chain needs >= 2 qubits");
      for (int qq : chain)
        if (qq < 0 || qq >= qubit_count)
          parse_fail(number, "grid qubit " + std::to_string(qq) +
                                 " out of range");
      (family == "h" ? grids.horizontal : grids.vertical)
          .push_back(std::move(chain));
      continue;
    }
    auto dash = item.find('-');
    if (dash == std::string::npos || dash == 0 || dash + 1 >= item.size())
      parse_fail(number, "expected <a>-<b> edge record, got '" + item + "'");
    int a = parse_int(std::string_view(item).substr(0, dash), number,
                      "qubit index");
    int b = parse_int(std::string_view(item).substr(dash + 1), number,
                      "qubit index");
    if (a == b) parse_fail(number, "self-loop on qubit " + std::to_string(a));
    Edge e = make_edge(a, b);
    if (e.first < 0 || e.second >= qubit_count)
      parse_fail(number, "edge " + item + " references a qubit outside [0, " +
                             std::to_string(qubit_count) + ")");
    if (!seen.insert(e).second)
      parse_fail(number, "duplicate edge " + item);
    edges.push_back(e);
  }

  TopologyDocument doc;
  doc.topology = DeviceTopology::make(qubit_count, std::move(edges), name);
  doc.grids = std::move(grids);

  // grid chains, when present, must be walkable on the topology
  for (const auto* family : {&doc.grids.horizontal, &doc.grids.vertical})
    for (const auto& chain : *family)
      for (size_t i = 0; i + 1 < chain.size(); ++i)
        if (!doc.topology.has_edge(chain[i], chain[i + 1]))
          throw DataError("grid chain uses missing edge " +
                          std::to_string(chain[i]) + "-" +
                          std::to_string(chain[i + 1]));
  return doc;
}

DeviceTopology load_topology(std::string_view text) {
  return parse_topology_document(text).topology;
}

TopologyDocument load_topology_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open topology file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_topology_document(buf.str());
}

std::string serialize_topology(const DeviceTopology& t) {
  std::ostringstream out;
  out << "n=" << t.qubit_count() << "\n";
  if (!t.name().empty()) out << "name=" << t.name() << "\n";
  for (const auto& [a, b] : t.edges()) out << a << "-" << b << "\n";
  return out.str();
}

const TopologyDocument& heavy_hex_document(int size) {
  static std::map<int, TopologyDocument> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(size);
  if (it != cache.end()) return it->second;
  const char* text = detail::preset_text(size);
  if (text == nullptr)
    throw DataError("unsupported heavy-hex preset size " +
                    std::to_string(size) + " (supported: 127, 133, 156)");
  return cache.emplace(size, parse_topology_document(text)).first->second;
}

DeviceTopology heavy_hex_preset(int size) {
  return heavy_hex_document(size).topology;
}

const std::vector<int>& neighbors(const DeviceTopology& t, int q) {
  if (q < 0 || q >= t.qubit_count())
    throw DataError("qubit " + std::to_string(q) + " outside [0, " +
                    std::to_string(t.qubit_count()) + ")");
  return t.adjacent(q);
}

CalibratedTopology attach_calibration(const DeviceTopology& t,
                                      const Calibration& c) {
  for (const auto& [q, eps] : c.oneq_error) {
    if (q < 0 || q >= t.qubit_count())
      throw DataError("calibration references unknown qubit " +
                      std::to_string(q));
    if (!(eps >= 0.0 && eps <= 1.0))
      throw DataError("1Q error " + std::to_string(eps) + " on qubit " +
                      std::to_string(q) + " outside [0, 1]");
  }
  auto check_edge_key = [&](const Edge& e, const char* table) {
    if (!t.has_edge(e.first, e.second))
      throw DataError(std::string(table) + " references unknown edge " +
                      std::to_string(e.first) + "-" +
                      std::to_string(e.second));
  };
  for (const auto& [e, eps] : c.twoq_error) {
    check_edge_key(e, "twoq_error");
    if (!(eps >= 0.0 && eps <= 1.0))
      throw DataError("2Q error " + std::to_string(eps) + " on edge " +
                      std::to_string(e.first) + "-" +
                      std::to_string(e.second) + " outside [0, 1]");
  }
  for (const auto& [e, dur] : c.twoq_duration_ns) {
    check_edge_key(e, "twoq_duration_ns");
    if (!(dur > 0.0))
      throw DataError("duration " + std::to_string(dur) + " on edge " +
                      std::to_string(e.first) + "-" +
                      std::to_string(e.second) + " must be positive");
  }
  // completeness
  for (int q = 0; q < t.qubit_count(); ++q)
    if (!c.oneq_error.count(q))
      throw DataError("calibration missing 1Q error for qubit " +
                      std::to_string(q));
  for (const auto& e : t.edges()) {
    std::string label =
        std::to_string(e.first) + "-" + std::to_string(e.second);
    if (!c.twoq_error.count(e))
      throw DataError("calibration missing 2Q error for edge " + label);
    if (!c.twoq_duration_ns.count(e))
      throw DataError("calibration missing duration for edge " + label);
  }
  return {t, c};
}

namespace {

Edge parse_edge_key(const std::string& key) {
  auto dash = key.find('-');
  if (dash == std::string::npos)
    throw DataError("edge key '" + key + "' is not of the form a-b");
  try {
    int a = std::stoi(key.substr(0, dash));
    int b = std::stoi(key.substr(dash + 1));
    if (a >= b)
      throw DataError("edge key '" + key + "' must be ordered low-high");
    return {a, b};
  } catch (const std::invalid_argument&) {
    throw DataError("edge key '" + key + "' is not of the form a-b");
  } catch (const std::out_of_range&) {
    throw DataError("edge key '" + key + "' is out of range");
  }
}

}  // namespace

Calibration parse_calibration_json(std::string_view text,
                                   const DeviceTopology& t) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("calibration JSON: ") + e.what());
  }
  Calibration c;
  if (doc.contains("timestamp")) c.timestamp = doc["timestamp"];
  nlohmann::json oneq = doc.value("oneq_error", nlohmann::json::object());
  nlohmann::json twoq = doc.value("twoq_error", nlohmann::json::object());
  nlohmann::json durs =
      doc.value("twoq_duration_ns", nlohmann::json::object());
  for (auto& [key, value] : oneq.items())
    c.oneq_error[std::stoi(key)] = value.get<double>();
  for (auto& [key, value] : twoq.items())
    c.twoq_error[parse_edge_key(key)] = value.get<double>();
  for (auto& [key, value] : durs.items())
    c.twoq_duration_ns[parse_edge_key(key)] = value.get<double>();
  // range/reference validation happens in attach_calibration; do the
  // reference part here so errors carry the file context
  for (const auto& [q, eps] : c.oneq_error)
    if (q < 0 || q >= t.qubit_count())
      throw DataError("calibration references unknown qubit " +
                      std::to_string(q));
  for (const auto& [e, eps] : c.twoq_error)
    if (!t.has_edge(e.first, e.second))
      throw DataError("calibration references unknown edge " +
                      std::to_string(e.first) + "-" +
                      std::to_string(e.second));
  return c;
}

std::string serialize_calibration(const Calibration& c) {
  nlohmann::json doc;
  doc["timestamp"] = c.timestamp;
  auto& oneq = doc["oneq_error"] = nlohmann::json::object();
  for (const auto& [q, eps] : c.oneq_error) oneq[std::to_string(q)] = eps;
  auto& twoq = doc["twoq_error"] = nlohmann::json::object();
  for (const auto& [e, eps] : c.twoq_error)
    twoq[std::to_string(e.first) + "-" + std::to_string(e.second)] = eps;
  auto& dur = doc["twoq_duration_ns"] = nlohmann::json::object();
  for (const auto& [e, d] : c.twoq_duration_ns)
    dur[std::to_string(e.first) + "-" + std::to_string(e.second)] = d;
  return doc.dump(2);
}

}  // namespace lfb::topo

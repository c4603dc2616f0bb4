#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lfb::topo {

// Undirected coupler, stored low-high.
using Edge = std::pair<int, int>;

inline Edge make_edge(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

// Immutable coupling graph in canonical form: edges low-high and sorted,
// so two topologies over the same graph compare equal (name excluded).
class DeviceTopology {
public:
  DeviceTopology() = default;
  static DeviceTopology make(int qubit_count, std::vector<Edge> edges,
                             std::string name = "");

  int qubit_count() const { return qubit_count_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::string& name() const { return name_; }
  bool has_edge(int a, int b) const;
  const std::vector<int>& adjacent(int q) const { return adj_[q]; }

  friend bool operator==(const DeviceTopology& x, const DeviceTopology& y) {
    return x.qubit_count_ == y.qubit_count_ && x.edges_ == y.edges_;
  }

private:
  int qubit_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adj_;
  std::string name_;
};

struct Calibration {
  std::map<int, double> oneq_error;
  std::map<Edge, double> twoq_error;
  std::map<Edge, double> twoq_duration_ns;
  std::string timestamp;  // YYYY-MM-DD
};

// Topology plus a calibration that has been checked for completeness.
struct CalibratedTopology {
  DeviceTopology topology;
  Calibration calibration;
};

// Precomputed grid chain families for a device (see build_grid_chains).
struct GridChains {
  std::vector<std::vector<int>> horizontal;
  std::vector<std::vector<int>> vertical;
  bool empty() const { return horizontal.empty() && vertical.empty(); }
};

struct TopologyDocument {
  DeviceTopology topology;
  GridChains grids;
};

// Edge-list text format: first line `n=<count>`, then one `<a>-<b>` per
// line, `#` comments, optional `name=<label>`, optional `[grids]` section
// with `h <q0> <q1> ...` / `v ...` chain lines.
TopologyDocument parse_topology_document(std::string_view text);
DeviceTopology load_topology(std::string_view text);
std::string serialize_topology(const DeviceTopology& t);
TopologyDocument load_topology_file(const std::string& path);

// Bundled coupling maps: 127 (Eagle r3), 133 (Heron r1), 156 (Heron r2).
DeviceTopology heavy_hex_preset(int size);
const TopologyDocument& heavy_hex_document(int size);

// Sorted neighbor list; throws DataError on an out-of-range index.
const std::vector<int>& neighbors(const DeviceTopology& t, int q);

// Validates completeness (every qubit and edge covered) and value ranges.
CalibratedTopology attach_calibration(const DeviceTopology& t,
                                      const Calibration& c);

// Calibration document: JSON tree with keys `oneq_error`, `twoq_error`,
// `twoq_duration_ns` (edges keyed "a-b", a<b) and `timestamp`.
Calibration parse_calibration_json(std::string_view text,
                                   const DeviceTopology& t);
std::string serialize_calibration(const Calibration& c);

}  // namespace lfb::topo

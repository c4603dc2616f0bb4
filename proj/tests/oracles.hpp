// Test-only reference implementations, kept deliberately naive and
// independent of the library's optimized paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "lfbench/topology.hpp"

namespace oracle {

// Every self-avoiding path with exactly n vertices, one canonical copy
// per undirected path, by plain recursive enumeration.
inline void extend_path(const lfb::topo::DeviceTopology& t, int need,
                        std::vector<int>& path, std::set<int>& used,
                        std::set<std::vector<int>>& out) {
  if (static_cast<int>(path.size()) == need) {
    std::vector<int> canon = path;
    if (canon.front() > canon.back())
      std::reverse(canon.begin(), canon.end());
    out.insert(canon);
    return;
  }
  for (int u : t.adjacent(path.back())) {
    if (used.count(u)) continue;
    used.insert(u);
    path.push_back(u);
    extend_path(t, need, path, used, out);
    path.pop_back();
    used.erase(u);
  }
}

inline std::set<std::vector<int>> all_paths(const lfb::topo::DeviceTopology& t,
                                            int need) {
  std::set<std::vector<int>> out;
  if (need == 1) {
    for (int q = 0; q < t.qubit_count(); ++q) out.insert({q});
    return out;
  }
  for (int s = 0; s < t.qubit_count(); ++s) {
    std::vector<int> path{s};
    std::set<int> used{s};
    extend_path(t, need, path, used, out);
  }
  return out;
}

inline uint64_t count_paths(const lfb::topo::DeviceTopology& t, int need) {
  return all_paths(t, need).size();
}

// Random connected graph on n vertices: a random spanning tree plus a few
// extra edges.
inline lfb::topo::DeviceTopology random_connected_graph(int n,
                                                        std::mt19937& rng) {
  std::vector<std::pair<int, int>> edges;
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> pick(0, i - 1);
    int j = pick(rng);
    edges.emplace_back(std::min(order[i], order[j]),
                       std::max(order[i], order[j]));
  }
  std::set<std::pair<int, int>> have(edges.begin(), edges.end());
  std::uniform_int_distribution<int> extra_count(0, n);
  std::uniform_int_distribution<int> vertex(0, n - 1);
  int extras = extra_count(rng);
  for (int k = 0; k < extras; ++k) {
    int a = vertex(rng), b = vertex(rng);
    if (a == b) continue;
    auto e = std::make_pair(std::min(a, b), std::max(a, b));
    if (have.insert(e).second) edges.push_back(e);
  }
  return lfb::topo::DeviceTopology::make(n, edges, "random");
}

// Direct product over a fidelity window, no logs.
inline double window_product(const std::vector<double>& oneq,
                             const std::vector<double>& twoq, int start,
                             int m) {
  double p = 1.0;
  for (int i = start; i < start + m; ++i) p *= oneq[i];
  for (int i = start; i < start + m - 1; ++i) p *= twoq[i];
  return p;
}

// Sort-and-interpolate quantile at position p*(n-1).
inline double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  double pos = p * (values.size() - 1);
  size_t lo = static_cast<size_t>(pos);
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (pos - lo) * (values[lo + 1] - values[lo]);
}

// High-accuracy standard normal CDF via erfc in long double.
inline long double normal_cdf(long double z) {
  return 0.5L * erfcl(-z / sqrtl(2.0L));
}

}  // namespace oracle

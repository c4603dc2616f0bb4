#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "lfbench/metrics.hpp"
#include "lfbench/topology.hpp"

namespace lfb::chains {

// Self-avoiding path of qubits, stored with front() < back().
class Chain {
public:
  Chain() = default;
  // Validates distinctness and edge existence, canonicalizes orientation.
  static Chain make(std::vector<int> qubits, const topo::DeviceTopology& t);
  // For callers that already guarantee validity (search internals).
  static Chain unchecked(std::vector<int> qubits);

  const std::vector<int>& qubits() const { return qubits_; }
  int length() const { return static_cast<int>(qubits_.size()); }

  friend bool operator==(const Chain& a, const Chain& b) {
    return a.qubits_ == b.qubits_;
  }
  friend auto operator<=>(const Chain& a, const Chain& b) {
    return a.qubits_ <=> b.qubits_;
  }

private:
  std::vector<int> qubits_;
};

struct ScoredChain {
  Chain chain;
  double score = 0.0;      // exp(log_score)
  double log_score = 0.0;  // sum of log process fidelities, canonical order
};

// Higher score first; ties by lexicographic qubit sequence.
bool scored_before(const ScoredChain& a, const ScoredChain& b);

struct GateErrorTable {
  enum class Provenance { isolated, grid, averaged };
  std::map<topo::Edge, double> twoq_error;
  std::map<int, double> oneq_error;
  std::map<topo::Edge, double> duration_ns;
  Provenance provenance = Provenance::isolated;
};

GateErrorTable table_from_calibration(const topo::CalibratedTopology& ct,
                                      GateErrorTable::Provenance prov =
                                          GateErrorTable::Provenance::isolated);

// Multiplicative penalty exp(-kappa * max(0, dur - median)/median) applied
// to edge fidelities during scoring; kappa = 0 disables it.
struct DurationPenalty {
  double kappa = 0.0;
  double median_duration_ns = 0.0;
};

double duration_penalty(double duration_ns, double median_duration_ns,
                        double kappa);

// Median of the table's durations, for building a DurationPenalty.
double median_duration(const GateErrorTable& table);

// Exact count of self-avoiding paths with n_vertices vertices, each
// undirected path counted once. Overflow raises NumericError.
uint64_t count_paths(const topo::DeviceTopology& t, int n_vertices,
                     int threads = 0);

// Top-(x+1) chains by layer-fidelity score, descending, exact via
// branch-and-bound. Throws DataError when no such chain exists.
std::vector<ScoredChain> best_chains(const topo::DeviceTopology& t,
                                     const GateErrorTable& table, int n,
                                     int x, const DurationPenalty& penalty = {},
                                     int threads = 0);

ScoredChain score_chain(const Chain& chain, const GateErrorTable& table,
                        const DurationPenalty& penalty = {});

struct BCSelection {
  std::vector<ScoredChain> picks;  // up to two: B then C
  std::vector<int> non_overlap;    // |qubits(pick) \ qubits(A)| per pick
  bool degenerate = false;         // fewer than 2 distinct candidates
};

// B maximizes non-overlap with A, C is the runner-up; ties by higher
// score, then lexicographic qubit sequence.
BCSelection select_b_c(std::span<const ScoredChain> topx, const Chain& a);

struct GridFamilies {
  std::vector<Chain> horizontal;
  std::vector<Chain> vertical;
};

// The two concurrently-measurable chain families covering every coupler.
// Presets (and any document with a grids section) are supported; other
// graphs raise DataError asking for explicit chains.
GridFamilies build_grid_chains(const topo::DeviceTopology& t);
GridFamilies grid_families_from(const topo::TopologyDocument& doc);

GateErrorTable merge_gate_errors(const GateErrorTable& horizontal,
                                 const GateErrorTable& vertical);

struct CandidateSet {
  std::optional<ScoredChain> a, b, c;  // grid strategy
  std::optional<ScoredChain> d, e, f;  // isolated strategy
  bool partial = false;     // a strategy yielded fewer than 3 chains
  bool overlap = false;     // labeled chains are not all distinct
  bool degenerate = false;  // select_b_c had no distinct candidates
};

CandidateSet assemble_candidate_set(std::span<const ScoredChain> grid_ranked,
                                    std::span<const ScoredChain> isolated_ranked);

struct SubchainResult {
  int start_index = 0;
  double log_product = 0.0;
  double product = 1.0;
};

// Best contiguous M-qubit window by fidelity product; ties take the
// lowest start index.
SubchainResult best_subchain(const metrics::ChainFidelities& chain, int m);

}  // namespace lfb::chains

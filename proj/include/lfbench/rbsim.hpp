#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lfbench/chainsearch.hpp"
#include "lfbench/topology.hpp"

namespace lfb::rbsim {

// A benchmarked element: a coupler (two-qubit) or a single qubit.
struct GateId {
  int a = -1;
  int b = -1;  // -1 when single-qubit

  static GateId one_qubit(int q) { return {q, -1}; }
  static GateId two_qubit(int x, int y) {
    return x < y ? GateId{x, y} : GateId{y, x};
  }
  bool is_two_qubit() const { return b >= 0; }
  int weight() const { return is_two_qubit() ? 2 : 1; }
  int dimension() const { return is_two_qubit() ? 4 : 2; }
  friend auto operator<=>(const GateId&, const GateId&) = default;
};

std::string gate_label(const GateId& g);

// Ground-truth decays, idle rates, crosstalk and durations. Complete over
// its topology: every qubit has alpha1/lambda, every edge alpha2/duration.
struct NoiseModel {
  std::map<topo::Edge, double> alpha2;
  std::map<int, double> alpha1;
  std::map<int, double> lambda;  // idle depolarization rate, per ns
  double chi = 1.0;              // per adjacent-active-gate factor
  std::map<topo::Edge, double> duration_ns;
};

// Validates ranges and completeness against a topology.
void validate_model(const NoiseModel& m, const topo::DeviceTopology& t);

enum class RBMode { isolated, isolated_delay, layered };

RBMode parse_mode(const std::string& name);
std::string mode_name(RBMode mode);

struct RBDecayData {
  GateId gate;
  RBMode mode = RBMode::isolated;
  std::vector<int> lengths;                  // strictly increasing
  std::vector<std::vector<double>> samples;  // [randomization][length]
  int shots = 0;
  uint64_t seed = 0;
};

struct DegradationEvent {
  int start_day = 0;
  int end_day = 0;  // inclusive
  std::vector<int> qubits;
  std::vector<topo::Edge> edges;
  double factor = 1.0;  // multiplies the affected alphas
};

// Simultaneously active gates of one disjoint layer plus its duration.
struct LayerContext {
  std::vector<GateId> active;
  double max_duration_ns = 0.0;
};

// isolated: the bare decay. isolated_delay: idle depolarization for the
// layer's duration padding. layered: additionally chi per active gate
// sharing a coupler with this one.
double effective_alpha(const GateId& gate, RBMode mode,
                       const LayerContext& ctx, const NoiseModel& model,
                       const topo::DeviceTopology& t);

struct SimParams {
  std::vector<int> lengths = {1, 30, 40, 60, 80, 100, 150, 200, 300, 400, 500, 600};
  int randomizations = 10;
  int shots = 200;
  uint64_t seed = 0;
};

// Direct-RB survival curves for every element of the chain (N-1 couplers
// in two disjoint layers, plus one single-qubit decay per chain qubit).
// Samples are Binomial(shots, P1(x))/shots with P1(x) = a alpha_eff^x + b,
// b = 1/2^w, a = 1 - b, drawn from streams keyed by (seed, gate, r, x).
std::vector<RBDecayData> simulate_direct_rb(const topo::DeviceTopology& t,
                                            const chains::Chain& chain,
                                            RBMode mode,
                                            const NoiseModel& model,
                                            const SimParams& params,
                                            int threads = 0);

// Returns the model with affected alphas scaled when day is inside the
// event interval; otherwise an unchanged copy.
NoiseModel apply_event(const NoiseModel& model, const DegradationEvent& event,
                       int day);

// Layered RB over every grid chain, fitted to a per-gate error table
// (duplicates averaged). Provenance: grid.
chains::GateErrorTable grid_measurement(const topo::DeviceTopology& t,
                                        const chains::GridFamilies& grids,
                                        const NoiseModel& model,
                                        const SimParams& params,
                                        int threads = 0);

// Isolated RB in greedy distance->=2 batches over all couplers and qubits.
// Provenance: isolated.
chains::GateErrorTable isolated_measurement(const topo::DeviceTopology& t,
                                            const NoiseModel& model,
                                            const SimParams& params,
                                            int threads = 0);

// Greedy batching used by isolated_measurement, exposed for tests: every
// pair of gates in a batch is at least two qubits apart.
std::vector<std::vector<GateId>> isolated_batches(const topo::DeviceTopology& t);

struct Scenario {
  NoiseModel model;
  std::vector<DegradationEvent> events;
  SimParams sim;
};

// Scenario document: {model: {alpha1, alpha2, lambda, chi, durations},
// events: [...], sim: {lengths, randomizations, shots, seed}} with
// per-element maps accepting a "default" key.
Scenario parse_scenario_json(std::string_view text,
                             const topo::DeviceTopology& t);
Scenario load_scenario_file(const std::string& path,
                            const topo::DeviceTopology& t);

}  // namespace lfb::rbsim

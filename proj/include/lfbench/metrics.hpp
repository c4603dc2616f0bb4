#pragma once

#include <span>
#include <utility>
#include <vector>

namespace lfb::metrics {

// d = 2 for single-qubit elements, d = 4 for two-qubit elements.
struct ProcessFidelity {
  double value;
  int d;
};

struct EplgEstimate {
  double nominal = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  int n_qubits = 0;
  double lf_nominal = 1.0;
  bool clamped = false;  // a bound hit the decay-validity boundary
};

// F = ((1 - eps)(d + 1) - 1) / d. Valid for eps in [0, d/(d+1)).
ProcessFidelity fidelity_from_error(double eps, int d);

// F = (1 + (d^2 - 1) alpha) / d^2. Valid for alpha in (-1/(d^2-1), 1].
ProcessFidelity fidelity_from_decay(double alpha, int d);

// Inverse maps, used when converting fitted fidelities back to errors.
double error_from_fidelity(double fidelity, int d);
double decay_from_fidelity(double fidelity, int d);

// Product of process fidelities, computed as a sorted log sum so the
// result is permutation-invariant bit for bit.
double layer_fidelity(std::span<const ProcessFidelity> fidelities);
double layer_fidelity_values(std::span<const double> values);

// EPLG = 4/5 (1 - lf^(1/(N-1))) for an N-qubit chain.
double eplg(double lf, int n_qubits);
double eplg_inverse(double eplg_value, int n_qubits);

// Per-element fidelities along a chain: oneq has N entries, twoq N-1.
struct ChainFidelities {
  std::vector<double> oneq;
  std::vector<double> twoq;
  int n_qubits() const { return static_cast<int>(oneq.size()); }
};

// For each requested length L, the EPLG of the best contiguous L-qubit
// subchain (lowest EPLG = highest fidelity product).
std::vector<std::pair<int, EplgEstimate>> eplg_length_curve(
    const ChainFidelities& chain, std::span<const int> lengths);

// Slim per-gate fit view for bound propagation.
struct GateFit {
  double alpha;
  double se_alpha;
  int d;
};

// Three-value propagation: nominal from alpha, lower EPLG from alpha+SE,
// upper EPLG from alpha-SE, all through decay -> fidelity -> LF -> EPLG.
// Out-of-validity bounds are clamped to the boundary and flagged.
EplgEstimate propagate_bounds(std::span<const GateFit> fits, int n_qubits);

}  // namespace lfb::metrics

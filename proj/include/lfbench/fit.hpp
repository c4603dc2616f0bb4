#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "lfbench/metrics.hpp"
#include "lfbench/rbsim.hpp"

namespace lfb::fit {

struct FitResult {
  double a = 0.0, alpha = 0.0, b = 0.0;
  double se_a = 0.0, se_alpha = 0.0, se_b = 0.0;
  std::array<std::array<double, 3>, 3> covariance{};
  double residual_rms = 0.0;
  int n_points = 0;
  bool converged = false;
};

// Optional restriction of the data used by fit_decay. Empty vectors mean
// "use everything". Lengths are given by value, randomizations by row.
struct FitSelection {
  std::vector<int> randomization_rows;
  std::vector<int> length_values;
};

// Weighted nonlinear least squares of P1 = a alpha^x + b on the pooled
// per-length means. Damped Gauss-Newton on (a, logit alpha, b); SEs from
// the Jacobian covariance scaled by residual variance.
FitResult fit_decay(const rbsim::RBDecayData& data,
                    const FitSelection& selection = {});

// Uniform subsample of r randomization rows, without replacement,
// deterministic in (seed). Rows are re-sorted canonically.
rbsim::RBDecayData subsample_randomizations(const rbsim::RBDecayData& data,
                                            int r, uint64_t seed);

struct ScanResult {
  double axis = 0.0;
  metrics::EplgEstimate estimate;
  bool fittable = true;
};

// For each r: subsample, fit every gate, propagate bounds; repeated
// `trials` times with derived seeds, reported as per-trial medians.
std::vector<ScanResult> randomization_scan(
    std::span<const rbsim::RBDecayData> per_gate,
    std::span<const int> r_values, int trials, uint64_t seed, int n_qubits,
    int threads = 0);

// For each cutoff: fit every gate on lengths <= cutoff with the first 10
// randomizations. Cutoffs leaving fewer than 3 lengths are flagged.
std::vector<ScanResult> clifford_scan(
    std::span<const rbsim::RBDecayData> per_gate,
    std::span<const int> cutoffs, int n_qubits, int threads = 0);

// Fit all gates and propagate to an EPLG estimate for an n_qubits chain.
metrics::EplgEstimate eplg_from_decays(
    std::span<const rbsim::RBDecayData> per_gate, int n_qubits,
    const FitSelection& selection = {}, int threads = 0);

// Per-gate fitted errors (1 - process fidelity), used for distribution
// reports; order matches the input.
std::vector<double> fitted_errors(std::span<const rbsim::RBDecayData> per_gate,
                                  const FitSelection& selection = {},
                                  int threads = 0);

}  // namespace lfb::fit

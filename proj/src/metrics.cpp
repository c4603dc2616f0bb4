#include "lfbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lfbench/chainsearch.hpp"
#include "lfbench/errors.hpp"

namespace lfb::metrics {

namespace {

void check_dimension(int d) {
  if (d != 2 && d != 4)
    throw DataError("dimension must be 2 (1Q) or 4 (2Q), got " +
                    std::to_string(d));
}

}  // namespace

ProcessFidelity fidelity_from_error(double eps, int d) {
  check_dimension(d);
  double limit = static_cast<double>(d) / (d + 1);
  if (!(eps >= 0.0 && eps < limit)) {
    std::ostringstream msg;
    msg << "gate error " << eps << " outside [0, " << limit
        << ") for d=" << d << "; process fidelity would be nonpositive";
    throw NumericError(msg.str());
  }
  return {((1.0 - eps) * (d + 1) - 1.0) / d, d};
}

ProcessFidelity fidelity_from_decay(double alpha, int d) {
  check_dimension(d);
  double dsq = static_cast<double>(d) * d;
  double low = -1.0 / (dsq - 1.0);
  if (!(alpha > low && alpha <= 1.0)) {
    std::ostringstream msg;
    msg << "decay " << alpha << " outside (" << low << ", 1] for d=" << d;
    throw NumericError(msg.str());
  }
  return {(1.0 + (dsq - 1.0) * alpha) / dsq, d};
}

double error_from_fidelity(double fidelity, int d) {
  check_dimension(d);
  // inverse of fidelity_from_error
  return 1.0 - (fidelity * d + 1.0) / (d + 1);
}

double decay_from_fidelity(double fidelity, int d) {
  check_dimension(d);
  double dsq = static_cast<double>(d) * d;
  return (fidelity * dsq - 1.0) / (dsq - 1.0);
}

double layer_fidelity_values(std::span<const double> values) {
  if (values.empty()) throw DataError("layer fidelity of an empty list");
  std::vector<double> logs;
  logs.reserve(values.size());
  for (double v : values) {
    if (!(v > 0.0 && v <= 1.0))
      throw NumericError("process fidelity " + std::to_string(v) +
                         " outside (0, 1]");
    logs.push_back(std::log(v));
  }
  // canonical summation order: sorted ascending, so the result does not
  // depend on input order or on how callers parallelized upstream work
  std::sort(logs.begin(), logs.end());
  double sum = 0.0;
  for (double l : logs) sum += l;
  return std::exp(sum);
}

double layer_fidelity(std::span<const ProcessFidelity> fidelities) {
  std::vector<double> values;
  values.reserve(fidelities.size());
  for (const auto& f : fidelities) values.push_back(f.value);
  return layer_fidelity_values(values);
}

double eplg(double lf, int n_qubits) {
  if (n_qubits < 2)
    throw DataError("EPLG needs a chain of at least 2 qubits, got " +
                    std::to_string(n_qubits));
  if (!(lf > 0.0 && lf <= 1.0))
    throw NumericError("layer fidelity " + std::to_string(lf) +
                       " outside (0, 1]");
  return 0.8 * (1.0 - std::pow(lf, 1.0 / (n_qubits - 1)));
}

double eplg_inverse(double eplg_value, int n_qubits) {
  if (n_qubits < 2)
    throw DataError("EPLG needs a chain of at least 2 qubits, got " +
                    std::to_string(n_qubits));
  if (!(eplg_value >= 0.0 && eplg_value < 0.8))
    throw NumericError("EPLG " + std::to_string(eplg_value) +
                       " outside [0, 4/5)");
  return std::pow(1.0 - eplg_value / 0.8, n_qubits - 1);
}

std::vector<std::pair<int, EplgEstimate>> eplg_length_curve(
    const ChainFidelities& chain, std::span<const int> lengths) {
  int n = chain.n_qubits();
  if (static_cast<int>(chain.twoq.size()) != n - 1)
    throw DataError("chain fidelities inconsistent: " +
                    std::to_string(chain.oneq.size()) + " qubits vs " +
                    std::to_string(chain.twoq.size()) + " links");
  std::vector<std::pair<int, EplgEstimate>> curve;
  curve.reserve(lengths.size());
  for (int len : lengths) {
    if (len < 2 || len > n)
      throw DataError("subchain length " + std::to_string(len) +
                      " outside [2, " + std::to_string(n) + "]");
    auto best = chains::best_subchain(chain, len);
    EplgEstimate est;
    est.n_qubits = len;
    est.lf_nominal = best.product;
    est.nominal = eplg(best.product, len);
    est.lower = est.nominal;
    est.upper = est.nominal;
    curve.emplace_back(len, est);
  }
  return curve;
}

EplgEstimate propagate_bounds(std::span<const GateFit> fits, int n_qubits) {
  if (fits.empty()) throw DataError("no per-gate fits to propagate");
  EplgEstimate est;
  est.n_qubits = n_qubits;

  // one pipeline per alpha shift: 0 (nominal), +SE (best case), -SE (worst)
  auto pipeline = [&](int shift_sign, bool* clamped) {
    std::vector<double> values;
    values.reserve(fits.size());
    for (const auto& f : fits) {
      double alpha = f.alpha + shift_sign * f.se_alpha;
      double dsq = static_cast<double>(f.d) * f.d;
      double low = -1.0 / (dsq - 1.0);
      if (alpha > 1.0) {
        alpha = 1.0;
        if (clamped) *clamped = true;
      } else if (alpha <= low) {
        alpha = std::nextafter(low, 1.0);
        if (clamped) *clamped = true;
      }
      values.push_back(fidelity_from_decay(alpha, f.d).value);
    }
    return layer_fidelity_values(values);
  };

  bool clamped = false;
  est.lf_nominal = pipeline(0, &clamped);
  est.nominal = eplg(est.lf_nominal, n_qubits);
  est.lower = eplg(pipeline(+1, &clamped), n_qubits);
  est.upper = eplg(pipeline(-1, &clamped), n_qubits);
  est.clamped = clamped;
  return est;
}

}  // namespace lfb::metrics

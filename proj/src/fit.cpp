#include "lfbench/fit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "lfbench/errors.hpp"
#include "lfbench/parallel.hpp"
#include "lfbench/rng.hpp"

namespace lfb::fit {

namespace {

struct PooledPoint {
  double x;       // Clifford length
  double y;       // mean survival over selected randomizations
  double weight;  // inverse variance of the mean
};

std::vector<PooledPoint> pool_points(const rbsim::RBDecayData& data,
                                     const FitSelection& selection) {
  if (data.samples.empty()) throw DataError("decay data has no randomizations");
  std::vector<int> rows;
  if (selection.randomization_rows.empty()) {
    rows.resize(data.samples.size());
    std::iota(rows.begin(), rows.end(), 0);
  } else {
    rows = selection.randomization_rows;
    for (int r : rows)
      if (r < 0 || r >= static_cast<int>(data.samples.size()))
        throw DataError("randomization row " + std::to_string(r) +
                        " out of range");
  }
  std::set<int> keep;
  if (!selection.length_values.empty())
    keep.insert(selection.length_values.begin(),
                selection.length_values.end());

  std::vector<PooledPoint> points;
  for (size_t xi = 0; xi < data.lengths.size(); ++xi) {
    if (!keep.empty() && !keep.count(data.lengths[xi])) continue;
    double sum = 0.0;
    for (int r : rows) sum += data.samples[r][xi];
    double mean = sum / static_cast<double>(rows.size());
    // variance of the mean of rows*shots Bernoulli trials, with the
    // p(1-p) factor floored so P in {0,1} cannot produce infinite weight
    double m = static_cast<double>(rows.size()) * data.shots;
    double pq = std::max(mean * (1.0 - mean), 1.0 / (4.0 * data.shots));
    points.push_back({static_cast<double>(data.lengths[xi]), mean, m / pq});
  }
  return points;
}

struct Sym3 {
  double m[3][3] = {};
};

// Solves A x = rhs for symmetric positive-definite A (3x3 Cholesky).
bool solve3(const Sym3& a, const double rhs[3], double x[3]) {
  double l[3][3] = {};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j <= i; ++j) {
      double sum = a.m[i][j];
      for (int k = 0; k < j; ++k) sum -= l[i][k] * l[j][k];
      if (i == j) {
        if (sum <= 0.0) return false;
        l[i][i] = std::sqrt(sum);
      } else {
        l[i][j] = sum / l[j][j];
      }
    }
  }
  double z[3];
  for (int i = 0; i < 3; ++i) {
    double sum = rhs[i];
    for (int k = 0; k < i; ++k) sum -= l[i][k] * z[k];
    z[i] = sum / l[i][i];
  }
  for (int i = 2; i >= 0; --i) {
    double sum = z[i];
    for (int k = i + 1; k < 3; ++k) sum -= l[k][i] * x[k];
    x[i] = sum / l[i][i];
  }
  return true;
}

// Inverse via Cholesky column solves; returns false when singular.
bool invert3(const Sym3& a, Sym3* inv) {
  for (int col = 0; col < 3; ++col) {
    double rhs[3] = {0, 0, 0};
    rhs[col] = 1.0;
    double x[3];
    if (!solve3(a, rhs, x)) return false;
    for (int row = 0; row < 3; ++row) inv->m[row][col] = x[row];
  }
  return true;
}

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

double weighted_ssr(const std::vector<PooledPoint>& pts, double a,
                    double alpha, double b) {
  double ssr = 0.0;
  for (const auto& p : pts) {
    double r = p.y - (a * std::pow(alpha, p.x) + b);
    ssr += p.weight * r * r;
  }
  return ssr;
}

}  // namespace

FitResult fit_decay(const rbsim::RBDecayData& data,
                    const FitSelection& selection) {
  auto pts = pool_points(data, selection);
  if (pts.size() < 3)
    throw DataError("decay fit needs at least 3 distinct lengths, got " +
                    std::to_string(pts.size()));

  // degenerate decay: per-length means carry no usable slope
  {
    double lo = pts.front().y, hi = pts.front().y;
    for (const auto& p : pts) {
      lo = std::min(lo, p.y);
      hi = std::max(hi, p.y);
    }
    double scale = 1.0 / std::sqrt(4.0 * data.shots *
                                   static_cast<double>(data.samples.size()));
    if (hi - lo < 1e-12 + 0.01 * scale)
      throw NumericError("degenerate decay: survival data is constant");
  }

  // initialization: asymptote from the tail, amplitude from the head,
  // decay from a log-linear regression of (mean - b0)
  std::vector<PooledPoint> sorted = pts;
  std::sort(sorted.begin(), sorted.end(),
            [](const PooledPoint& l, const PooledPoint& r) { return l.x < r.x; });
  auto alpha_guess = [&](double b0) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (const auto& p : sorted) {
      double dy = p.y - b0;
      if (dy <= 0.0) continue;
      sx += p.x;
      sy += std::log(dy);
      sxx += p.x * p.x;
      sxy += p.x * std::log(dy);
      ++cnt;
    }
    if (cnt >= 2 && sxx * cnt - sx * sx > 0) {
      double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
      return std::clamp(std::exp(slope), 1e-6, 1.0 - 1e-12);
    }
    return 0.9;
  };

  size_t tail = std::max<size_t>(1, sorted.size() / 4);
  double b0 = sorted[sorted.size() - tail].y;
  for (size_t i = sorted.size() - tail; i < sorted.size(); ++i)
    b0 = std::min(b0, sorted[i].y);
  double a0 = std::max(sorted.front().y - b0, 1e-3);

  // damped Gauss-Newton on (a, theta, b) with alpha = sigmoid(theta)
  struct Optimum {
    double a, theta, b, ssr;
  };
  auto optimize = [&](double ia, double itheta, double ib) {
    double a = ia, theta = itheta, b = ib;
    double lambda = 1e-3;
    double ssr = weighted_ssr(pts, a, sigmoid(theta), b);
    int stalled = 0;
    constexpr int kMaxIterations = 200;
    for (int iter = 0; iter < kMaxIterations; ++iter) {
      double alpha = sigmoid(theta);
      double dalpha_dtheta = alpha * (1.0 - alpha);
      Sym3 jtj;
      double jtr[3] = {0, 0, 0};
      for (const auto& p : pts) {
        double ax = std::pow(alpha, p.x);
        double j[3] = {ax,
                       a * p.x * std::pow(alpha, p.x - 1.0) * dalpha_dtheta,
                       1.0};
        double r = p.y - (a * ax + b);
        for (int i = 0; i < 3; ++i) {
          jtr[i] += p.weight * j[i] * r;
          for (int k = i; k < 3; ++k) jtj.m[i][k] += p.weight * j[i] * j[k];
        }
      }
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < i; ++k) jtj.m[i][k] = jtj.m[k][i];

      bool stepped = false;
      bool settled = false;
      for (int attempt = 0; attempt < 32; ++attempt) {
        Sym3 damped = jtj;
        for (int i = 0; i < 3; ++i)
          damped.m[i][i] += lambda * (1.0 + jtj.m[i][i]);
        double step[3];
        if (!solve3(damped, jtr, step)) {
          lambda *= 10.0;
          continue;
        }
        // survival fractions live in [0,1]; the box keeps the separable
        // ridge (a -> inf, b -> -inf, alpha -> 1, a linear fit in
        // disguise) from running away on decay-free data
        double na = std::clamp(a + step[0], 0.0, 1.5);
        double ntheta = theta + step[1];
        double nb = std::clamp(b + step[2], -0.25, 1.25);
        double nssr = weighted_ssr(pts, na, sigmoid(ntheta), nb);
        if (nssr <= ssr * (1.0 + 1e-14)) {
          double rel = std::abs(na - a) / (std::abs(a) + 1e-12) +
                       std::abs(ntheta - theta) / (std::abs(theta) + 1e-12) +
                       std::abs(nb - b) / (std::abs(b) + 1e-12);
          double gain = (ssr - nssr) / std::max(ssr, 1e-300);
          stalled = gain < 1e-4 ? stalled + 1 : 0;
          a = na;
          theta = ntheta;
          b = nb;
          ssr = nssr;
          lambda = std::max(lambda / 10.0, 1e-14);
          stepped = true;
          // relative-step convergence, or the objective has flattened
          if (rel < 1e-10 || stalled >= 6) settled = true;
          break;
        }
        lambda *= 10.0;
      }
      if (settled || !stepped) return Optimum{a, theta, b, ssr};
    }
    throw NumericError("decay fit did not converge within iteration budget");
  };

  // two starts: the data-driven guess, and the uniform-outcome asymptote
  // b = 1/2^w that rescues nearly flat decays where the tail guess puts
  // the whole amplitude into b
  Optimum best = optimize(a0, logit(alpha_guess(b0)), b0);
  {
    double bs = data.gate.is_two_qubit() ? 0.25 : 0.5;
    double as = std::max(sorted.front().y - bs, 1e-3);
    Optimum alt = optimize(as, logit(alpha_guess(bs)), bs);
    if (alt.ssr < best.ssr) best = alt;
  }
  double a = best.a, theta = best.theta, b = best.b;
  double alpha = sigmoid(theta);
  double dalpha_dtheta = alpha * (1.0 - alpha);

  FitResult result;
  result.a = a;
  result.alpha = alpha;
  result.b = b;
  result.n_points = static_cast<int>(pts.size());
  result.converged = true;

  // covariance of (a, theta, b) = s^2 (J^T W J)^-1, delta-method to alpha
  Sym3 jtj;
  for (const auto& p : pts) {
    double ax = std::pow(alpha, p.x);
    double j[3] = {ax, a * p.x * std::pow(alpha, p.x - 1.0) * dalpha_dtheta,
                   1.0};
    for (int i = 0; i < 3; ++i)
      for (int k = i; k < 3; ++k) jtj.m[i][k] += p.weight * j[i] * j[k];
  }
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < i; ++k) jtj.m[i][k] = jtj.m[k][i];

  double dof = std::max<double>(1.0, pts.size() - 3.0);
  double s2 = weighted_ssr(pts, a, alpha, b) / dof;
  Sym3 inv;
  if (!invert3(jtj, &inv)) {
    // a flat ridge (alpha pinned at a boundary) leaves J^T W J singular;
    // regularize just enough to invert, which reports the unidentified
    // directions as very large but finite uncertainties
    double trace = jtj.m[0][0] + jtj.m[1][1] + jtj.m[2][2];
    bool inverted = false;
    for (double ridge = 1e-14; ridge <= 1e-2; ridge *= 100.0) {
      Sym3 damped = jtj;
      for (int i = 0; i < 3; ++i)
        damped.m[i][i] += ridge * std::max(trace, 1e-300);
      if (invert3(damped, &inv)) {
        inverted = true;
        break;
      }
    }
    if (!inverted) throw NumericError("decay fit covariance is singular");
  }
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) {
      double scale_i = (i == 1) ? dalpha_dtheta : 1.0;
      double scale_k = (k == 1) ? dalpha_dtheta : 1.0;
      result.covariance[i][k] = s2 * inv.m[i][k] * scale_i * scale_k;
    }
  result.se_a = std::sqrt(std::max(0.0, result.covariance[0][0]));
  result.se_alpha = std::sqrt(std::max(0.0, result.covariance[1][1]));
  result.se_b = std::sqrt(std::max(0.0, result.covariance[2][2]));

  double rss = 0.0;
  for (const auto& p : pts) {
    double r = p.y - (a * std::pow(alpha, p.x) + b);
    rss += r * r;
  }
  result.residual_rms = std::sqrt(rss / pts.size());
  return result;
}

rbsim::RBDecayData subsample_randomizations(const rbsim::RBDecayData& data,
                                            int r, uint64_t seed) {
  int total = static_cast<int>(data.samples.size());
  if (r < 1 || r > total)
    throw DataError("subsample size " + std::to_string(r) + " outside [1, " +
                    std::to_string(total) + "]");
  // partial Fisher-Yates over row indices, then canonical re-sort
  std::vector<int> rows(total);
  std::iota(rows.begin(), rows.end(), 0);
  KeyedStream rng(seed, 0x5ba3f1eull);
  for (int i = 0; i < r; ++i) {
    int j = i + static_cast<int>(rng.below(total - i));
    std::swap(rows[i], rows[j]);
  }
  rows.resize(r);
  std::sort(rows.begin(), rows.end());

  rbsim::RBDecayData out = data;
  out.samples.clear();
  out.samples.reserve(r);
  for (int row : rows) out.samples.push_back(data.samples[row]);
  return out;
}

namespace {

metrics::EplgEstimate propagate_all(
    std::span<const rbsim::RBDecayData> per_gate, int n_qubits,
    const FitSelection& selection, int threads) {
  std::vector<metrics::GateFit> gate_fits(per_gate.size());
  parallel_for(static_cast<int>(per_gate.size()), threads, [&](int i) {
    FitResult f = fit_decay(per_gate[i], selection);
    gate_fits[i] = {f.alpha, f.se_alpha, per_gate[i].gate.dimension()};
  });
  return metrics::propagate_bounds(gate_fits, n_qubits);
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

metrics::EplgEstimate eplg_from_decays(
    std::span<const rbsim::RBDecayData> per_gate, int n_qubits,
    const FitSelection& selection, int threads) {
  if (per_gate.empty()) throw DataError("no decay data");
  return propagate_all(per_gate, n_qubits, selection, threads);
}

std::vector<double> fitted_errors(std::span<const rbsim::RBDecayData> per_gate,
                                  const FitSelection& selection, int threads) {
  std::vector<double> errors(per_gate.size());
  parallel_for(static_cast<int>(per_gate.size()), threads, [&](int i) {
    FitResult f = fit_decay(per_gate[i], selection);
    int d = per_gate[i].gate.dimension();
    errors[i] = 1.0 - metrics::fidelity_from_decay(f.alpha, d).value;
  });
  return errors;
}

std::vector<ScanResult> randomization_scan(
    std::span<const rbsim::RBDecayData> per_gate,
    std::span<const int> r_values, int trials, uint64_t seed, int n_qubits,
    int threads) {
  if (per_gate.empty()) throw DataError("no decay data");
  if (trials < 1) throw DataError("trials must be >= 1");
  int total = static_cast<int>(per_gate.front().samples.size());

  std::vector<ScanResult> out;
  out.reserve(r_values.size());
  for (int r : r_values) {
    if (r < 1 || r > total)
      throw DataError("randomization count " + std::to_string(r) +
                      " outside [1, " + std::to_string(total) + "]");
    std::vector<double> nominals, lowers, uppers;
    for (int trial = 0; trial < trials; ++trial) {
      uint64_t trial_seed = derive_seed(seed, (static_cast<uint64_t>(r) << 20) |
                                                  static_cast<uint64_t>(trial));
      // one subset per trial, applied to every gate of the chain
      std::vector<int> rows(total);
      std::iota(rows.begin(), rows.end(), 0);
      KeyedStream rng(trial_seed, 1);
      for (int i = 0; i < r; ++i) {
        int j = i + static_cast<int>(rng.below(total - i));
        std::swap(rows[i], rows[j]);
      }
      rows.resize(r);
      std::sort(rows.begin(), rows.end());
      FitSelection selection;
      selection.randomization_rows = rows;
      auto estimate = propagate_all(per_gate, n_qubits, selection, threads);
      nominals.push_back(estimate.nominal);
      lowers.push_back(estimate.lower);
      uppers.push_back(estimate.upper);
    }
    ScanResult sr;
    sr.axis = r;
    sr.estimate.n_qubits = n_qubits;
    sr.estimate.nominal = median_of(nominals);
    sr.estimate.lower = median_of(lowers);
    sr.estimate.upper = median_of(uppers);
    sr.estimate.lf_nominal = metrics::eplg_inverse(sr.estimate.nominal, n_qubits);
    out.push_back(std::move(sr));
  }
  return out;
}

std::vector<ScanResult> clifford_scan(
    std::span<const rbsim::RBDecayData> per_gate,
    std::span<const int> cutoffs, int n_qubits, int threads) {
  if (per_gate.empty()) throw DataError("no decay data");
  const auto& lengths = per_gate.front().lengths;
  int total_rows = static_cast<int>(per_gate.front().samples.size());
  // the protocol fixes r = 10 randomizations for this scan
  std::vector<int> rows(std::min(10, total_rows));
  std::iota(rows.begin(), rows.end(), 0);

  std::vector<ScanResult> out;
  out.reserve(cutoffs.size());
  for (int cutoff : cutoffs) {
    std::vector<int> keep;
    for (int len : lengths)
      if (len <= cutoff) keep.push_back(len);
    ScanResult sr;
    sr.axis = cutoff;
    if (keep.size() < 3) {
      sr.fittable = false;
      sr.estimate.n_qubits = n_qubits;
      out.push_back(std::move(sr));
      continue;
    }
    FitSelection selection;
    selection.randomization_rows = rows;
    selection.length_values = keep;
    sr.estimate = propagate_all(per_gate, n_qubits, selection, threads);
    out.push_back(std::move(sr));
  }
  return out;
}

}  // namespace lfb::fit

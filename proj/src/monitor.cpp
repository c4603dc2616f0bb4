#include "lfbench/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lfbench/errors.hpp"
#include "lfbench/metrics.hpp"

namespace lfb::monitor {

ChainKind parse_chain_kind(const std::string& name) {
  if (name == "optimal_N" || name == "optimal_n") return ChainKind::optimal_n;
  if (name == "optimal_M" || name == "optimal_m") return ChainKind::optimal_m;
  if (name == "fixed") return ChainKind::fixed;
  throw DataError("unknown chain kind '" + name +
                  "' (expected optimal_N, optimal_M or fixed)");
}

std::string chain_kind_name(ChainKind kind) {
  switch (kind) {
    case ChainKind::optimal_n: return "optimal_N";
    case ChainKind::optimal_m: return "optimal_M";
    case ChainKind::fixed: return "fixed";
  }
  return "?";
}

long civil_day_number(const std::string& day) {
  int y, m, d;
  char dash1, dash2;
  std::istringstream in(day);
  in >> y >> dash1 >> m >> dash2 >> d;
  if (!in || dash1 != '-' || dash2 != '-' || !in.eof() || day.size() != 10)
    throw DataError("bad date '" + day + "' (expected YYYY-MM-DD)");
  static const int days_in_month[] = {31, 28, 31, 30, 31, 30,
                                      31, 31, 30, 31, 30, 31};
  bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  if (m < 1 || m > 12) throw DataError("bad month in date '" + day + "'");
  int dim = days_in_month[m - 1] + (m == 2 && leap ? 1 : 0);
  if (d < 1 || d > dim) throw DataError("bad day in date '" + day + "'");
  // Howard Hinnant's days_from_civil
  long yy = y - (m <= 2);
  long era = (yy >= 0 ? yy : yy - 399) / 400;
  unsigned yoe = static_cast<unsigned>(yy - era * 400);
  unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

EplgSeries EplgSeries::make(std::vector<SeriesEntry> entries) {
  for (const auto& e : entries) {
    if (!(e.eplg >= 0.0 && e.eplg <= 0.8))
      throw DataError("EPLG " + std::to_string(e.eplg) + " on " + e.day +
                      " outside [0, 4/5]");
    civil_day_number(e.day);  // validates the date
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const SeriesEntry& a, const SeriesEntry& b) {
                     if (a.kind != b.kind) return a.kind < b.kind;
                     return civil_day_number(a.day) < civil_day_number(b.day);
                   });
  for (size_t i = 1; i < entries.size(); ++i)
    if (entries[i].kind == entries[i - 1].kind &&
        entries[i].day == entries[i - 1].day)
      throw DataError("duplicate day " + entries[i].day + " for kind " +
                      chain_kind_name(entries[i].kind));
  EplgSeries s;
  s.entries_ = std::move(entries);
  return s;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DataError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw DataError("quantile level outside [0, 1]");
  size_t n = sorted.size();
  if (n == 1) return sorted[0];
  double pos = p * static_cast<double>(n - 1);
  size_t lo = static_cast<size_t>(pos);
  if (lo >= n - 1) return sorted[n - 1];
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

OutlierReport rolling_outlier_threshold(const EplgSeries& series, int window,
                                        bool static_window) {
  if (window < 4)
    throw DataError("outlier window must be >= 4 days, got " +
                    std::to_string(window));
  if (series.empty()) throw DataError("empty series");

  OutlierReport report;
  report.window = window;
  report.static_window = static_window;

  const auto& entries = series.entries();
  size_t begin = 0;
  while (begin < entries.size()) {
    size_t end = begin;
    while (end < entries.size() && entries[end].kind == entries[begin].kind)
      ++end;

    auto threshold_over = [&](size_t lo, size_t hi) {  // [lo, hi)
      std::vector<double> values;
      values.reserve(hi - lo);
      for (size_t i = lo; i < hi; ++i) values.push_back(entries[i].eplg);
      std::sort(values.begin(), values.end());
      double q1 = quantile_sorted(values, 0.25);
      double q3 = quantile_sorted(values, 0.75);
      return q3 + 1.5 * (q3 - q1);
    };

    double static_t = 0.0;
    bool static_defined = false;
    if (static_window) {
      size_t lo = end - std::min<size_t>(window, end - begin);
      if (end - lo >= 4) {
        static_t = threshold_over(lo, end);
        static_defined = true;
      }
    }

    for (size_t i = begin; i < end; ++i) {
      DayDecision dd;
      dd.day = entries[i].day;
      dd.kind = entries[i].kind;
      dd.value = entries[i].eplg;
      size_t lo = (i + 1 >= begin + window) ? i + 1 - window : begin;
      if (static_window) {
        dd.threshold_defined = static_defined;
        dd.threshold = static_t;
      } else if (i + 1 - lo >= 4) {
        dd.threshold_defined = true;
        dd.threshold = threshold_over(lo, i + 1);
      }
      if (!static_window && i > lo) {
        long span = civil_day_number(entries[i].day) -
                    civil_day_number(entries[lo].day) + 1;
        dd.window_gappy = span > window;
      }
      dd.flagged = dd.threshold_defined && dd.value > dd.threshold;
      if (dd.flagged) report.flagged_days.push_back(dd.day);
      report.per_day.push_back(std::move(dd));
    }
    begin = end;
  }
  return report;
}

SummaryStats summary_stats_values(std::span<const double> values) {
  if (values.empty()) throw DataError("summary of an empty series");
  SummaryStats stats;
  stats.n = static_cast<int>(values.size());
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  stats.min = sorted.front();
  stats.max = sorted.back();
  stats.abs_range = stats.max - stats.min;
  stats.median = quantile_sorted(sorted, 0.5);
  if (stats.n == 1) {
    stats.std_dev = 0.0;
    stats.degenerate = true;
    return stats;
  }
  double mean = 0.0;
  for (double v : sorted) mean += v;
  mean /= stats.n;
  double ss = 0.0;
  for (double v : sorted) ss += (v - mean) * (v - mean);
  stats.std_dev = std::sqrt(ss / (stats.n - 1));
  return stats;
}

SummaryStats summary_stats(const EplgSeries& series) {
  std::vector<double> values;
  values.reserve(series.entries().size());
  for (const auto& e : series.entries()) values.push_back(e.eplg);
  return summary_stats_values(values);
}

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Acklam's rational approximation for the inverse normal CDF.
double acklam(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p <= 1.0 - p_low) {
    double q = p - 0.5;
    double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r +
            a[5]) *
           q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r +
            1.0);
  }
  double q = std::sqrt(-2.0 * std::log(1.0 - p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
           c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

}  // namespace

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw DataError("inverse normal CDF needs p in (0, 1)");
  double z = acklam(p);
  // one Newton refinement against the erfc-based CDF
  double density = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  if (density > 0.0) z -= (normal_cdf(z) - p) / density;
  return z;
}

std::vector<std::pair<double, double>> normal_quantile_points(
    std::span<const double> values) {
  size_t n = values.size();
  if (n < 2)
    throw DataError("normal quantile plot needs at least 2 values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, double>> points;
  points.reserve(n);
  for (size_t i = 1; i <= n; ++i) {
    double p = (static_cast<double>(i) - 0.5) / static_cast<double>(n);
    points.emplace_back(inverse_normal_cdf(p), sorted[i - 1]);
  }
  return points;
}

EplgSeries reconstruct_fixed_chain_series(
    const chains::Chain& chain,
    const std::vector<std::pair<std::string, chains::GateErrorTable>>& daily,
    std::vector<std::string>* omitted_days) {
  const auto& qs = chain.qubits();
  if (qs.size() < 2) throw DataError("fixed chain needs at least 2 qubits");

  std::vector<SeriesEntry> entries;
  for (const auto& [day, table] : daily) {
    std::vector<double> values;
    values.reserve(2 * qs.size());
    bool complete = true;
    for (int q : qs) {
      auto it = table.oneq_error.find(q);
      if (it == table.oneq_error.end()) {
        complete = false;
        break;
      }
      values.push_back(metrics::fidelity_from_error(it->second, 2).value);
    }
    if (complete) {
      for (size_t i = 0; i + 1 < qs.size(); ++i) {
        auto it = table.twoq_error.find(topo::make_edge(qs[i], qs[i + 1]));
        if (it == table.twoq_error.end()) {
          complete = false;
          break;
        }
        values.push_back(metrics::fidelity_from_error(it->second, 4).value);
      }
    }
    if (!complete) {
      if (omitted_days) omitted_days->push_back(day);
      continue;
    }
    double lf = metrics::layer_fidelity_values(values);
    SeriesEntry entry;
    entry.day = day;
    entry.kind = ChainKind::fixed;
    entry.chain = qs;
    entry.eplg = metrics::eplg(lf, static_cast<int>(qs.size()));
    entries.push_back(std::move(entry));
  }
  return EplgSeries::make(std::move(entries));
}

EplgSeries parse_series_jsonl(std::string_view text) {
  std::vector<SeriesEntry> entries;
  size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    ++line_no;
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("series line " + std::to_string(line_no) + ": " +
                      e.what());
    }
    SeriesEntry entry;
    entry.day = rec.at("day").get<std::string>();
    entry.kind = parse_chain_kind(rec.at("kind").get<std::string>());
    entry.eplg = rec.at("eplg").get<double>();
    if (rec.contains("chain"))
      entry.chain = rec["chain"].get<std::vector<int>>();
    entries.push_back(std::move(entry));
  }
  return EplgSeries::make(std::move(entries));
}

std::string serialize_series_jsonl(const EplgSeries& series) {
  std::ostringstream out;
  for (const auto& e : series.entries()) {
    nlohmann::json rec;
    rec["day"] = e.day;
    rec["kind"] = chain_kind_name(e.kind);
    rec["chain"] = e.chain;
    rec["eplg"] = e.eplg;
    out << rec.dump() << "\n";
  }
  return out.str();
}

}  // namespace lfb::monitor

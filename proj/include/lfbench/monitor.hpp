#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lfbench/chainsearch.hpp"

namespace lfb::monitor {

enum class ChainKind { optimal_n, optimal_m, fixed };

ChainKind parse_chain_kind(const std::string& name);
std::string chain_kind_name(ChainKind kind);

struct SeriesEntry {
  std::string day;  // YYYY-MM-DD
  ChainKind kind = ChainKind::fixed;
  std::vector<int> chain;
  double eplg = 0.0;
};

// Dated EPLG observations, sorted by (kind, day); days unique per kind.
class EplgSeries {
public:
  EplgSeries() = default;
  static EplgSeries make(std::vector<SeriesEntry> entries);
  const std::vector<SeriesEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

private:
  std::vector<SeriesEntry> entries_;
};

// Days since 1970-01-01 for YYYY-MM-DD; throws DataError on bad dates.
long civil_day_number(const std::string& day);

// Type-7 quantile (linear interpolation at p*(n-1)) of sorted values.
double quantile_sorted(std::span<const double> sorted, double p);

struct DayDecision {
  std::string day;
  ChainKind kind;
  double value = 0.0;
  double threshold = 0.0;
  bool threshold_defined = false;
  bool flagged = false;
  bool window_gappy = false;  // window spans more than `window` calendar days
};

struct OutlierReport {
  int window = 15;
  bool static_window = false;
  std::vector<DayDecision> per_day;
  std::vector<std::string> flagged_days;
};

// T = Q3 + 1.5 IQR over a trailing window of the most recent <= `window`
// entries (including the day itself); defined once >= 4 points exist.
// static_window evaluates every day against the final window's threshold.
OutlierReport rolling_outlier_threshold(const EplgSeries& series,
                                        int window = 15,
                                        bool static_window = false);

struct SummaryStats {
  double median = 0.0;
  double std_dev = 0.0;  // sample (n-1); 0 with degenerate flag when n=1
  double min = 0.0;
  double max = 0.0;
  double abs_range = 0.0;
  int n = 0;
  bool degenerate = false;
};

SummaryStats summary_stats(const EplgSeries& series);
SummaryStats summary_stats_values(std::span<const double> values);

// Inverse standard normal CDF, |error| < 1e-9.
double inverse_normal_cdf(double p);

// Sorted values paired with plotting positions z_i = Phi^-1((i-0.5)/n).
std::vector<std::pair<double, double>> normal_quantile_points(
    std::span<const double> values);

// Daily EPLG of a fixed chain recomputed from per-day gate error tables.
// Days missing any chain element are omitted and reported.
EplgSeries reconstruct_fixed_chain_series(
    const chains::Chain& chain,
    const std::vector<std::pair<std::string, chains::GateErrorTable>>& daily,
    std::vector<std::string>* omitted_days = nullptr);

// JSON-lines ingestion: {"day": "YYYY-MM-DD", "kind": ..., "chain": [...],
// "eplg": ...} per line.
EplgSeries parse_series_jsonl(std::string_view text);
std::string serialize_series_jsonl(const EplgSeries& series);

}  // namespace lfb::monitor

#include <doctest.h>

#include <cmath>
#include <random>

#include "lfbench/errors.hpp"
#include "lfbench/monitor.hpp"
#include "oracles.hpp"

using namespace lfb;
using namespace lfb::monitor;

namespace {

std::string day_of(int i) {
  // days 0..99 mapped into 2025-01-01 onward
  int month = 1, day = 1 + i;
  static const int dim[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  while (day > dim[month - 1]) {
    day -= dim[month - 1];
    ++month;
  }
  char buf[16];
  std::snprintf(buf, sizeof buf, "2025-%02d-%02d", month, day);
  return buf;
}

EplgSeries series_from(const std::vector<double>& values,
                       ChainKind kind = ChainKind::fixed) {
  std::vector<SeriesEntry> entries;
  for (size_t i = 0; i < values.size(); ++i)
    entries.push_back({day_of(static_cast<int>(i)), kind, {}, values[i]});
  return EplgSeries::make(std::move(entries));
}

}  // namespace

TEST_CASE("civil day numbers") {
  CHECK(civil_day_number("1970-01-01") == 0);
  CHECK(civil_day_number("1970-01-02") == 1);
  CHECK(civil_day_number("1969-12-31") == -1);
  CHECK(civil_day_number("2000-03-01") - civil_day_number("2000-02-28") == 2);
  CHECK(civil_day_number("2100-03-01") - civil_day_number("2100-02-28") == 1);
  CHECK_THROWS_AS(civil_day_number("2025-13-01"), DataError);
  CHECK_THROWS_AS(civil_day_number("2025-02-30"), DataError);
  CHECK_THROWS_AS(civil_day_number("not-a-date"), DataError);
}

TEST_CASE("type-7 quantiles match the hand examples") {
  std::vector<double> v;
  for (int i = 1; i <= 15; ++i) v.push_back(i);
  CHECK(quantile_sorted(v, 0.25) == doctest::Approx(4.5));
  CHECK(quantile_sorted(v, 0.75) == doctest::Approx(11.5));
  CHECK(quantile_sorted(v, 0.5) == doctest::Approx(8.0));
  CHECK(quantile_sorted(v, 0.0) == doctest::Approx(1.0));
  CHECK(quantile_sorted(v, 1.0) == doctest::Approx(15.0));
}

TEST_CASE("quantiles agree with the sort-and-interpolate oracle") {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    int n = 2 + static_cast<int>(rng() % 40);
    std::vector<double> values(n);
    for (auto& v : values) v = u(rng);
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    for (double p : {0.1, 0.25, 0.5, 0.75, 0.9}) {
      CHECK(quantile_sorted(sorted, p) ==
            doctest::Approx(oracle::quantile(values, p)).epsilon(1e-12));
    }
  }
}

TEST_CASE("rolling threshold hand examples") {
  SUBCASE("constant series has T equal to the value and no flags") {
    auto s = series_from(std::vector<double>(15, 10.0e-3));
    auto report = rolling_outlier_threshold(s, 15);
    CHECK(report.flagged_days.empty());
    for (const auto& d : report.per_day)
      if (d.threshold_defined) CHECK(d.threshold == doctest::Approx(10.0e-3));
  }
  SUBCASE("window of 1..15 gives T = 22") {
    // values scaled by 1e-3 to stay in the EPLG range
    std::vector<double> v;
    for (int i = 1; i <= 15; ++i) v.push_back(i * 1e-3);
    auto s = series_from(v);
    auto report = rolling_outlier_threshold(s, 15);
    const auto& last = report.per_day.back();
    CHECK(last.threshold_defined);
    CHECK(last.threshold == doctest::Approx(22e-3).epsilon(1e-12));
  }
  SUBCASE("a single spike is flagged against the calm window") {
    std::vector<double> v(15, 5.0e-3);
    v.push_back(50.0e-3);
    auto s = series_from(v);
    auto report = rolling_outlier_threshold(s, 15);
    REQUIRE(report.flagged_days.size() == 1);
    CHECK(report.flagged_days[0] == day_of(15));
    // the spike day's threshold comes from a window whose Q3 is still 5
    CHECK(report.per_day.back().threshold == doctest::Approx(5.0e-3));
  }
  SUBCASE("threshold undefined below 4 points") {
    auto s = series_from({1e-3, 2e-3, 3e-3});
    auto report = rolling_outlier_threshold(s, 15);
    for (const auto& d : report.per_day) CHECK(!d.threshold_defined);
    CHECK(report.flagged_days.empty());
  }
  SUBCASE("window below 4 is rejected") {
    auto s = series_from(std::vector<double>(10, 1e-3));
    CHECK_THROWS_AS(rolling_outlier_threshold(s, 3), DataError);
  }
}

TEST_CASE("thresholds are translation-equivariant and order-invariant") {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> u(1e-3, 5e-3);
  std::vector<double> v(40);
  for (auto& x : v) x = u(rng);
  v[17] = 30e-3;  // one outlier
  auto base = rolling_outlier_threshold(series_from(v), 15);

  SUBCASE("adding a constant shifts T and preserves flags") {
    double c = 2e-3;
    std::vector<double> shifted = v;
    for (auto& x : shifted) x += c;
    auto moved = rolling_outlier_threshold(series_from(shifted), 15);
    REQUIRE(moved.per_day.size() == base.per_day.size());
    for (size_t i = 0; i < base.per_day.size(); ++i) {
      CHECK(moved.per_day[i].flagged == base.per_day[i].flagged);
      if (base.per_day[i].threshold_defined)
        CHECK(moved.per_day[i].threshold ==
              doctest::Approx(base.per_day[i].threshold + c).epsilon(1e-12));
    }
  }
  SUBCASE("input record order does not matter") {
    std::vector<SeriesEntry> entries;
    for (size_t i = 0; i < v.size(); ++i)
      entries.push_back(
          {day_of(static_cast<int>(i)), ChainKind::fixed, {}, v[i]});
    std::shuffle(entries.begin(), entries.end(), rng);
    auto shuffled =
        rolling_outlier_threshold(EplgSeries::make(entries), 15);
    CHECK(shuffled.flagged_days == base.flagged_days);
  }
}

TEST_CASE("summary stats") {
  auto s = series_from({1e-3, 2e-3, 3e-3});
  auto stats = summary_stats(s);
  CHECK(stats.median == doctest::Approx(2e-3));
  CHECK(stats.std_dev == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(stats.abs_range == doctest::Approx(2e-3));
  CHECK(stats.n == 3);
  CHECK(!stats.degenerate);

  SUBCASE("single entry is degenerate with zero deviation") {
    auto one = summary_stats(series_from({4e-3}));
    CHECK(one.median == doctest::Approx(4e-3));
    CHECK(one.std_dev == 0.0);
    CHECK(one.degenerate);
    CHECK(one.n == 1);
  }
  SUBCASE("stats scale homogeneously") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(1e-3, 9e-3);
    std::vector<double> v(25);
    for (auto& x : v) x = u(rng);
    auto base = summary_stats_values(v);
    double c = 3.5;
    std::vector<double> scaled = v;
    for (auto& x : scaled) x *= c;
    auto big = summary_stats_values(scaled);
    CHECK(big.median == doctest::Approx(c * base.median).epsilon(1e-12));
    CHECK(big.std_dev == doctest::Approx(c * base.std_dev).epsilon(1e-12));
    CHECK(big.abs_range == doctest::Approx(c * base.abs_range).epsilon(1e-12));
  }
}

TEST_CASE("inverse normal CDF accuracy") {
  // frozen quartile constant
  CHECK(inverse_normal_cdf(0.75) ==
        doctest::Approx(0.674489750196082).epsilon(1e-10));
  CHECK(inverse_normal_cdf(0.25) ==
        doctest::Approx(-0.674489750196082).epsilon(1e-10));
  CHECK(inverse_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-12));

  // |Phi(Phi^-1(p)) - p| < 1e-9 across the practical range
  for (double p = 1e-6; p < 1.0 - 1e-7; p += 0.0013) {
    double z = inverse_normal_cdf(p);
    long double back = oracle::normal_cdf(z);
    CHECK(std::abs(static_cast<double>(back) - p) < 1e-9);
  }
  CHECK_THROWS_AS(inverse_normal_cdf(0.0), DataError);
  CHECK_THROWS_AS(inverse_normal_cdf(1.0), DataError);
}

TEST_CASE("normal quantile points") {
  SUBCASE("n=2 pairs with the standard quartiles") {
    auto pts = normal_quantile_points(std::vector<double>{2e-3, 1e-3});
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].first == doctest::Approx(-0.674489750196082).epsilon(1e-9));
    CHECK(pts[1].first == doctest::Approx(+0.674489750196082).epsilon(1e-9));
    CHECK(pts[0].second == doctest::Approx(1e-3));
    CHECK(pts[1].second == doctest::Approx(2e-3));
  }
  SUBCASE("odd n puts the middle value at z = 0") {
    auto pts = normal_quantile_points(std::vector<double>{3., 1., 2., 5., 4.});
    REQUIRE(pts.size() == 5);
    CHECK(pts[2].first == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(pts[2].second == doctest::Approx(3.0));
  }
  SUBCASE("z list is antisymmetric and strictly increasing") {
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n : {2, 3, 10, 41, 100}) {
      std::vector<double> v(n);
      for (auto& x : v) x = u(rng);
      auto pts = normal_quantile_points(v);
      for (size_t i = 0; i + 1 < pts.size(); ++i)
        CHECK(pts[i].first < pts[i + 1].first);
      for (size_t i = 0; i < pts.size(); ++i)
        CHECK(pts[i].first ==
              doctest::Approx(-pts[pts.size() - 1 - i].first).epsilon(1e-9));
    }
  }
  CHECK_THROWS_AS(normal_quantile_points(std::vector<double>{1.0}), DataError);
}

TEST_CASE("fixed-chain series reconstruction") {
  auto t = topo::DeviceTopology::make(3, {{0, 1}, {1, 2}}, "tri");
  auto chain = chains::Chain::make({0, 1, 2}, t);

  chains::GateErrorTable day_table;
  for (int q = 0; q < 3; ++q) day_table.oneq_error[q] = 1e-4;
  day_table.twoq_error[{0, 1}] = 2e-3;
  day_table.twoq_error[{1, 2}] = 3e-3;

  SUBCASE("identical tables give a constant series") {
    std::vector<std::pair<std::string, chains::GateErrorTable>> daily;
    for (int i = 0; i < 5; ++i) daily.emplace_back(day_of(i), day_table);
    auto series = reconstruct_fixed_chain_series(chain, daily);
    REQUIRE(series.entries().size() == 5);
    double first = series.entries()[0].eplg;
    for (const auto& e : series.entries()) {
      CHECK(e.eplg == doctest::Approx(first));
      CHECK(e.kind == ChainKind::fixed);
    }
  }
  SUBCASE("hand-computed two-day instance") {
    using lfb::metrics::eplg;
    using lfb::metrics::fidelity_from_error;
    std::vector<std::pair<std::string, chains::GateErrorTable>> daily;
    daily.emplace_back(day_of(0), day_table);
    auto worse = day_table;
    worse.twoq_error[{1, 2}] = 30e-3;
    daily.emplace_back(day_of(1), worse);
    auto series = reconstruct_fixed_chain_series(chain, daily);
    REQUIRE(series.entries().size() == 2);

    double f1 = fidelity_from_error(1e-4, 2).value;
    double lf0 = f1 * f1 * f1 * fidelity_from_error(2e-3, 4).value *
                 fidelity_from_error(3e-3, 4).value;
    CHECK(series.entries()[0].eplg == doctest::Approx(eplg(lf0, 3)).epsilon(1e-12));
    double lf1 = f1 * f1 * f1 * fidelity_from_error(2e-3, 4).value *
                 fidelity_from_error(30e-3, 4).value;
    CHECK(series.entries()[1].eplg == doctest::Approx(eplg(lf1, 3)).epsilon(1e-12));
    CHECK(series.entries()[1].eplg > series.entries()[0].eplg);
  }
  SUBCASE("an incomplete day is omitted and reported") {
    std::vector<std::pair<std::string, chains::GateErrorTable>> daily;
    daily.emplace_back(day_of(0), day_table);
    auto missing = day_table;
    missing.twoq_error.erase({1, 2});
    daily.emplace_back(day_of(1), missing);
    daily.emplace_back(day_of(2), day_table);
    std::vector<std::string> omitted;
    auto series = reconstruct_fixed_chain_series(chain, daily, &omitted);
    CHECK(series.entries().size() == 2);
    REQUIRE(omitted.size() == 1);
    CHECK(omitted[0] == day_of(1));
  }
}

TEST_CASE("series JSONL round-trip") {
  std::string text =
      R"({"day": "2025-03-01", "kind": "fixed", "chain": [0,1,2], "eplg": 0.004})"
      "\n"
      R"({"day": "2025-03-02", "kind": "optimal_N", "chain": [2,1,0], "eplg": 0.005})"
      "\n";
  auto series = parse_series_jsonl(text);
  REQUIRE(series.entries().size() == 2);
  auto again = parse_series_jsonl(serialize_series_jsonl(series));
  REQUIRE(again.entries().size() == 2);
  CHECK(again.entries()[0].day == series.entries()[0].day);
  CHECK(again.entries()[0].eplg == series.entries()[0].eplg);
  CHECK(again.entries()[1].kind == series.entries()[1].kind);

  CHECK_THROWS_AS(parse_series_jsonl("{oops"), DataError);
  CHECK_THROWS_AS(
      parse_series_jsonl(R"({"day": "2025-01-01", "kind": "fixed", "eplg": 0.9})"),
      DataError);  // eplg above 4/5
}

#include <doctest.h>

#include <fstream>
#include <set>

#include "lfbench/errors.hpp"
#include "lfbench/topology.hpp"

using namespace lfb;
using namespace lfb::topo;

TEST_CASE("load_topology parses the inline format") {
  auto t = load_topology("n=3; 0-1; 1-2");
  CHECK(t.qubit_count() == 3);
  CHECK(t.edges() == std::vector<Edge>{{0, 1}, {1, 2}});
}

TEST_CASE("load_topology is order-insensitive and canonicalizes") {
  auto a = load_topology("n=4\n2-3\n1-0\n1-2\n");
  auto b = load_topology("n=4\n0-1\n3-2\n2-1\n");
  CHECK(a == b);
  CHECK(a.edges() == std::vector<Edge>{{0, 1}, {1, 2}, {2, 3}});
}

TEST_CASE("load_topology error cases carry line numbers") {
  CHECK_THROWS_WITH_AS(load_topology("n=2; 0-2"),
                       doctest::Contains("line 1"), DataError);
  CHECK_THROWS_AS(load_topology("n=3\n0-1\n0-1\n"), DataError);
  CHECK_THROWS_AS(load_topology("n=3\n0-0\n"), DataError);
  CHECK_THROWS_AS(load_topology("n=3\nbogus\n"), DataError);
  CHECK_THROWS_AS(load_topology("0-1\n"), DataError);
  CHECK_THROWS_AS(load_topology(""), DataError);
}

TEST_CASE("serialize/load round-trip") {
  auto t = load_topology("n=5\nname=zig\n0-1\n1-2\n2-3\n3-4\n0-4\n");
  auto again = load_topology(serialize_topology(t));
  CHECK(t == again);
  CHECK(again.name() == "zig");
}

TEST_CASE("heavy-hex presets carry the published counts") {
  auto hh127 = heavy_hex_preset(127);
  CHECK(hh127.qubit_count() == 127);
  CHECK(hh127.edges().size() == 144);
  auto hh133 = heavy_hex_preset(133);
  CHECK(hh133.qubit_count() == 133);
  CHECK(hh133.edges().size() == 150);
  auto hh156 = heavy_hex_preset(156);
  CHECK(hh156.qubit_count() == 156);
  CHECK(hh156.edges().size() == 176);
  CHECK_THROWS_AS(heavy_hex_preset(128), DataError);
}

TEST_CASE("preset degree stays within heavy-hex bounds") {
  for (int size : {127, 133, 156}) {
    auto t = heavy_hex_preset(size);
    for (int q = 0; q < t.qubit_count(); ++q)
      CHECK(t.adjacent(q).size() <= 3);
  }
}

TEST_CASE("neighbors are sorted and enumerate each edge twice") {
  auto t = load_topology("n=3\n0-1\n1-2\n");
  CHECK(neighbors(t, 1) == std::vector<int>{0, 2});
  CHECK(neighbors(t, 0) == std::vector<int>{1});
  CHECK_THROWS_AS(neighbors(t, 3), DataError);

  auto iso = load_topology("n=4\n0-1\n1-2\n");  // qubit 3 isolated
  CHECK(neighbors(iso, 3).empty());

  for (int size : {127, 133, 156}) {
    auto hh = heavy_hex_preset(size);
    size_t total = 0;
    for (int q = 0; q < hh.qubit_count(); ++q) {
      auto nbrs = neighbors(hh, q);
      CHECK(std::is_sorted(nbrs.begin(), nbrs.end()));
      total += nbrs.size();
    }
    CHECK(total == 2 * hh.edges().size());
  }
}

TEST_CASE("preset grids cover every edge, disjoint per family") {
  for (int size : {127, 133, 156}) {
    const auto& doc = heavy_hex_document(size);
    REQUIRE(!doc.grids.empty());
    std::set<Edge> covered;
    for (const auto* fam : {&doc.grids.horizontal, &doc.grids.vertical}) {
      std::set<int> used;
      for (const auto& chain : *fam) {
        for (int q : chain) CHECK(used.insert(q).second);
        for (size_t i = 0; i + 1 < chain.size(); ++i)
          covered.insert(make_edge(chain[i], chain[i + 1]));
      }
    }
    CHECK(covered.size() == doc.topology.edges().size());
  }
}

TEST_CASE("attach_calibration enforces completeness and ranges") {
  auto t = load_topology("n=3\n0-1\n1-2\n");
  Calibration cal;
  cal.timestamp = "2025-01-01";
  for (int q = 0; q < 3; ++q) cal.oneq_error[q] = 1e-4;
  cal.twoq_error[{0, 1}] = 0.003;
  cal.twoq_error[{1, 2}] = 0.004;
  cal.twoq_duration_ns[{0, 1}] = 533;
  cal.twoq_duration_ns[{1, 2}] = 660;

  CHECK_NOTHROW(attach_calibration(t, cal));

  SUBCASE("missing edge is named") {
    Calibration missing = cal;
    missing.twoq_error.erase({0, 1});
    CHECK_THROWS_WITH_AS(attach_calibration(t, missing),
                         doctest::Contains("0-1"), DataError);
  }
  SUBCASE("missing qubit") {
    Calibration missing = cal;
    missing.oneq_error.erase(2);
    CHECK_THROWS_AS(attach_calibration(t, missing), DataError);
  }
  SUBCASE("error out of range") {
    Calibration bad = cal;
    bad.oneq_error[1] = 1.2;
    CHECK_THROWS_AS(attach_calibration(t, bad), DataError);
  }
  SUBCASE("unknown edge key") {
    Calibration bad = cal;
    bad.twoq_error[{0, 2}] = 0.001;
    CHECK_THROWS_AS(attach_calibration(t, bad), DataError);
  }
  SUBCASE("nonpositive duration") {
    Calibration bad = cal;
    bad.twoq_duration_ns[{0, 1}] = 0.0;
    CHECK_THROWS_AS(attach_calibration(t, bad), DataError);
  }
}

TEST_CASE("calibration JSON round-trip") {
  auto t = load_topology("n=3\n0-1\n1-2\n");
  Calibration cal;
  cal.timestamp = "2025-06-30";
  for (int q = 0; q < 3; ++q) cal.oneq_error[q] = 2e-4 * (q + 1);
  cal.twoq_error[{0, 1}] = 0.002;
  cal.twoq_error[{1, 2}] = 0.005;
  cal.twoq_duration_ns[{0, 1}] = 68;
  cal.twoq_duration_ns[{1, 2}] = 80;
  auto parsed = parse_calibration_json(serialize_calibration(cal), t);
  CHECK(parsed.oneq_error == cal.oneq_error);
  CHECK(parsed.twoq_error == cal.twoq_error);
  CHECK(parsed.twoq_duration_ns == cal.twoq_duration_ns);
  CHECK(parsed.timestamp == cal.timestamp);

  CHECK_THROWS_AS(
      parse_calibration_json(R"({"twoq_error": {"0-5": 0.1}})", t), DataError);
  CHECK_THROWS_AS(parse_calibration_json("{", t), DataError);
}

TEST_CASE("topology document grids parse and validate") {
  auto doc = parse_topology_document(
      "n=5\n0-1\n1-2\n2-3\n3-4\n[grids]\nh 0 1 2 3 4\n");
  CHECK(doc.grids.horizontal.size() == 1);
  CHECK(doc.grids.vertical.empty());
  CHECK_THROWS_AS(
      parse_topology_document("n=4\n0-1\n1-2\n[grids]\nh 0 3\n"), DataError);
  CHECK_THROWS_AS(
      parse_topology_document("n=4\n0-1\n[grids]\nq 0 1\n"), DataError);
}

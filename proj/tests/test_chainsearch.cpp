#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "lfbench/chainsearch.hpp"
#include "lfbench/errors.hpp"
#include "lfbench/topology.hpp"
#include "oracles.hpp"

using namespace lfb;
using namespace lfb::chains;
using lfb::topo::DeviceTopology;
using lfb::topo::Edge;

namespace {

DeviceTopology path_graph(int n) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
  return DeviceTopology::make(n, edges, "path");
}

DeviceTopology cycle_graph(int n) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
  edges.push_back({0, n - 1});
  return DeviceTopology::make(n, edges, "cycle");
}

GateErrorTable uniform_table(const DeviceTopology& t, double eps2,
                             double eps1, double dur = 100.0) {
  GateErrorTable table;
  for (const auto& e : t.edges()) {
    table.twoq_error[e] = eps2;
    table.duration_ns[e] = dur;
  }
  for (int q = 0; q < t.qubit_count(); ++q) table.oneq_error[q] = eps1;
  return table;
}

GateErrorTable random_table(const DeviceTopology& t, std::mt19937& rng) {
  std::uniform_real_distribution<double> e2(1e-4, 0.05);
  std::uniform_real_distribution<double> e1(1e-5, 0.01);
  std::uniform_real_distribution<double> dur(50.0, 900.0);
  GateErrorTable table;
  for (const auto& e : t.edges()) {
    table.twoq_error[e] = e2(rng);
    table.duration_ns[e] = dur(rng);
  }
  for (int q = 0; q < t.qubit_count(); ++q) table.oneq_error[q] = e1(rng);
  return table;
}

}  // namespace

TEST_CASE("count_paths trivial and small cases") {
  auto p5 = path_graph(5);
  CHECK(count_paths(p5, 1) == 5);
  CHECK(count_paths(p5, 5) == 1);
  CHECK(count_paths(p5, 2) == 4);

  auto c6 = cycle_graph(6);
  CHECK(count_paths(c6, 1) == 6);
  CHECK(count_paths(c6, 3) == oracle::count_paths(c6, 3));
  CHECK(count_paths(c6, 3) == 6);
  CHECK(count_paths(c6, 6) == 6);  // Hamiltonian paths of a cycle

  CHECK_THROWS_AS(count_paths(p5, 0), DataError);
  CHECK_THROWS_AS(count_paths(p5, 6), DataError);
}

TEST_CASE("count_paths equals brute force on random graphs") {
  std::mt19937 rng(20250810);
  for (int trial = 0; trial < 40; ++trial) {
    int n = 4 + static_cast<int>(rng() % 9);  // 4..12 vertices
    auto g = oracle::random_connected_graph(n, rng);
    for (int need = 1; need <= n; ++need) {
      CAPTURE(trial);
      CAPTURE(need);
      CHECK(count_paths(g, need) == oracle::count_paths(g, need));
    }
  }
}

TEST_CASE("count_paths is thread-count independent") {
  std::mt19937 rng(99);
  auto g = oracle::random_connected_graph(12, rng);
  for (int need : {3, 6, 9, 12})
    CHECK(count_paths(g, need, 1) == count_paths(g, need, 4));
}

TEST_CASE("score_chain hand values") {
  auto p2 = path_graph(2);
  auto table = uniform_table(p2, 0.01, 0.0);
  auto scored = score_chain(Chain::make({0, 1}, p2), table);
  CHECK(scored.score == doctest::Approx(0.9875).epsilon(1e-12));
  CHECK(scored.score == doctest::Approx(std::exp(scored.log_score)));

  auto zero = uniform_table(p2, 0.0, 0.0);
  CHECK(score_chain(Chain::make({0, 1}, p2), zero).score ==
        doctest::Approx(1.0));

  auto bad = uniform_table(p2, 0.9, 0.0);
  CHECK_THROWS_AS(score_chain(Chain::make({0, 1}, p2), bad), NumericError);
}

TEST_CASE("score_chain is orientation-invariant bit for bit") {
  std::mt19937 rng(5);
  auto g = oracle::random_connected_graph(10, rng);
  auto table = random_table(g, rng);
  auto paths = oracle::all_paths(g, 6);
  int checked = 0;
  for (const auto& qs : paths) {
    std::vector<int> rev(qs.rbegin(), qs.rend());
    double fwd = score_chain(Chain::unchecked(qs), table).log_score;
    CHECK(score_chain(Chain::unchecked(rev), table).log_score == fwd);
    if (++checked > 50) break;
  }
  CHECK(checked > 0);
}

TEST_CASE("duration_penalty hand values and shape") {
  CHECK(duration_penalty(533, 533, 0.01) == doctest::Approx(1.0));
  CHECK(duration_penalty(881, 533, 0.0) == doctest::Approx(1.0));
  // 65% longer gate, default strength
  CHECK(duration_penalty(881, 533, 0.01) ==
        doctest::Approx(std::exp(-0.01 * 348.0 / 533.0)).epsilon(1e-15));
  CHECK(duration_penalty(881, 533, 0.01) ==
        doctest::Approx(0.99349).epsilon(1e-5));

  // monotone nonincreasing, continuous at the median
  double prev = 1.0;
  for (double d = 100; d <= 2000; d += 25) {
    double f = duration_penalty(d, 533, 0.02);
    CHECK(f <= prev + 1e-15);
    prev = f;
  }
  CHECK(duration_penalty(533.0 + 1e-9, 533, 0.02) ==
        doctest::Approx(1.0).epsilon(1e-10));
  CHECK_THROWS_AS(duration_penalty(-1, 533, 0.01), DataError);
  CHECK_THROWS_AS(duration_penalty(533, 533, -0.5), DataError);
}

TEST_CASE("best_chains on a path graph finds the only chain") {
  auto p5 = path_graph(5);
  auto table = uniform_table(p5, 0.01, 0.001);
  auto ranked = best_chains(p5, table, 5, 15);
  REQUIRE(ranked.size() == 1);
  CHECK(ranked[0].chain.qubits() == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("best_chains avoids the bad edge on a 6-cycle") {
  auto c6 = cycle_graph(6);
  auto table = uniform_table(c6, 0.001, 0.0);
  table.twoq_error[{2, 3}] = 0.5;
  auto ranked = best_chains(c6, table, 6, 5);
  REQUIRE(ranked.size() == 6);  // all Hamiltonian paths
  // the winner omits edge 2-3, so its endpoints are 2 and 3
  CHECK(ranked[0].chain.qubits().front() == 2);
  CHECK(ranked[0].chain.qubits().back() == 3);
  // brute-force argmax agrees
  double best_score = -1e300;
  std::vector<int> best_path;
  for (const auto& qs : oracle::all_paths(c6, 6)) {
    double s = score_chain(Chain::unchecked(qs), table).log_score;
    if (s > best_score) {
      best_score = s;
      best_path = qs;
    }
  }
  CHECK(ranked[0].chain.qubits() == best_path);
}

TEST_CASE("best_chains equals exhaustive ranking on random graphs") {
  std::mt19937 rng(31337);
  for (int trial = 0; trial < 25; ++trial) {
    int n = 6 + static_cast<int>(rng() % 6);  // 6..11
    auto g = oracle::random_connected_graph(n, rng);
    auto table = random_table(g, rng);
    int need = 3 + static_cast<int>(rng() % (n - 2));
    DurationPenalty penalty{0.01, median_duration(table)};

    auto paths = oracle::all_paths(g, need);
    if (paths.empty()) continue;
    std::vector<ScoredChain> expected;
    for (const auto& qs : paths)
      expected.push_back(score_chain(Chain::unchecked(qs), table, penalty));
    std::sort(expected.begin(), expected.end(), scored_before);
    size_t k = std::min<size_t>(expected.size(), 8);

    auto ranked = best_chains(g, table, need, 7, penalty);
    REQUIRE(ranked.size() == k);
    for (size_t i = 0; i < k; ++i) {
      CAPTURE(trial);
      CAPTURE(i);
      CHECK(ranked[i].chain.qubits() == expected[i].chain.qubits());
      CHECK(ranked[i].log_score == doctest::Approx(expected[i].log_score));
    }
  }
}

TEST_CASE("best_chains results are thread-count independent") {
  std::mt19937 rng(4242);
  auto g = oracle::random_connected_graph(11, rng);
  auto table = random_table(g, rng);
  auto a = best_chains(g, table, 6, 10, {}, 1);
  auto b = best_chains(g, table, 6, 10, {}, 4);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].chain.qubits() == b[i].chain.qubits());
    CHECK(a[i].log_score == b[i].log_score);  // bit-identical
  }
}

TEST_CASE("best_chains error when no chain exists") {
  auto g = DeviceTopology::make(6, {{0, 1}, {1, 2}, {3, 4}, {4, 5}}, "split");
  auto table = uniform_table(g, 0.01, 0.001);
  CHECK_THROWS_AS(best_chains(g, table, 4, 3), DataError);
}

TEST_CASE("select_b_c picks maximal non-overlap with stated tie-breaks") {
  auto p8 = path_graph(8);
  auto table = uniform_table(p8, 0.01, 0.0);
  Chain a = Chain::make({0, 1, 2, 3}, p8);

  SUBCASE("distinct non-overlap counts order B then C") {
    std::vector<ScoredChain> cands = {
        score_chain(Chain::make({1, 2, 3, 4}, p8), table),   // 1 fresh
        score_chain(Chain::make({4, 5, 6, 7}, p8), table),   // 4 fresh
        score_chain(Chain::make({2, 3, 4, 5}, p8), table)};  // 2 fresh
    auto sel = select_b_c(cands, a);
    REQUIRE(sel.picks.size() == 2);
    CHECK(sel.picks[0].chain.qubits() == std::vector<int>{4, 5, 6, 7});
    CHECK(sel.non_overlap[0] == 4);
    CHECK(sel.picks[1].chain.qubits() == std::vector<int>{2, 3, 4, 5});
    CHECK(sel.non_overlap[1] == 2);
    CHECK(!sel.degenerate);
  }
  SUBCASE("equal non-overlap breaks by higher score") {
    auto g = path_graph(12);
    auto tbl = uniform_table(g, 0.01, 0.0);
    tbl.twoq_error[{8, 9}] = 0.05;
    Chain aa = Chain::make({0, 1, 2, 3}, g);
    auto good = score_chain(Chain::make({4, 5, 6, 7}, g), tbl);
    auto bad = score_chain(Chain::make({8, 9, 10, 11}, g), tbl);
    auto sel = select_b_c(std::vector<ScoredChain>{bad, good}, aa);
    REQUIRE(sel.picks.size() == 2);
    CHECK(sel.picks[0].chain.qubits() == good.chain.qubits());
  }
  SUBCASE("identical candidates flag degenerate") {
    std::vector<ScoredChain> cands = {
        score_chain(Chain::make({0, 1, 2, 3}, p8), table),
        score_chain(Chain::make({0, 1, 2, 3}, p8), table)};
    auto sel = select_b_c(cands, a);
    REQUIRE(sel.picks.size() == 2);
    CHECK(sel.non_overlap[0] == 0);
    CHECK(sel.degenerate);
  }
  SUBCASE("single candidate returns fewer, flagged") {
    std::vector<ScoredChain> cands = {
        score_chain(Chain::make({4, 5, 6, 7}, p8), table)};
    auto sel = select_b_c(cands, a);
    CHECK(sel.picks.size() == 1);
    CHECK(sel.degenerate);
  }
}

TEST_CASE("merge_gate_errors averages the overlap") {
  GateErrorTable h, v;
  h.twoq_error[{0, 1}] = 0.002;
  v.twoq_error[{0, 1}] = 0.004;
  h.twoq_error[{1, 2}] = 0.005;
  auto merged = merge_gate_errors(h, v);
  CHECK(merged.twoq_error[{0, 1}] == doctest::Approx(0.003));
  CHECK(merged.twoq_error[{1, 2}] == doctest::Approx(0.005));
  CHECK(merged.provenance == GateErrorTable::Provenance::averaged);

  // symmetric in its arguments
  auto flipped = merge_gate_errors(v, h);
  CHECK(flipped.twoq_error == merged.twoq_error);

  GateErrorTable empty;
  CHECK_THROWS_AS(merge_gate_errors(empty, empty), DataError);
}

TEST_CASE("assemble_candidate_set shapes and flags") {
  auto p12 = path_graph(12);
  auto table = uniform_table(p12, 0.01, 0.001);

  SUBCASE("identical rankings produce overlapping labels") {
    auto ranked = best_chains(p12, table, 6, 4);
    auto set = assemble_candidate_set(ranked, ranked);
    REQUIRE(set.a.has_value());
    REQUIRE(set.d.has_value());
    CHECK(set.a->chain == set.d->chain);
    CHECK(set.overlap);
  }
  SUBCASE("x=0 leaves only A and D, flagged partial") {
    auto ranked = best_chains(p12, table, 6, 0);
    auto set = assemble_candidate_set(ranked, ranked);
    CHECK(set.a.has_value());
    CHECK(!set.b.has_value());
    CHECK(!set.c.has_value());
    CHECK(set.partial);
  }
  SUBCASE("distinct strategy tables give six labeled chains") {
    std::mt19937 rng(777);
    auto g = oracle::random_connected_graph(12, rng);
    auto t1 = random_table(g, rng);
    auto t2 = random_table(g, rng);
    int need = 5;
    if (oracle::count_paths(g, need) >= 6) {
      auto r1 = best_chains(g, t1, need, 10);
      auto r2 = best_chains(g, t2, need, 10);
      auto set = assemble_candidate_set(r1, r2);
      int labeled = 0;
      for (const auto* s : {&set.a, &set.b, &set.c, &set.d, &set.e, &set.f})
        if (s->has_value()) ++labeled;
      CHECK(labeled == 6);
    }
  }
}

TEST_CASE("best_subchain window selection") {
  metrics::ChainFidelities cf;
  SUBCASE("uniform fidelities tie-break to start 0") {
    cf.oneq.assign(6, 0.999);
    cf.twoq.assign(5, 0.99);
    CHECK(best_subchain(cf, 3).start_index == 0);
    CHECK(best_subchain(cf, 6).start_index == 0);
  }
  SUBCASE("hand example picks start 2") {
    cf.oneq.assign(5, 1.0);
    cf.twoq = {0.99, 0.95, 0.99, 0.99};
    auto r = best_subchain(cf, 3);
    CHECK(r.start_index == 2);
    CHECK(r.product == doctest::Approx(0.9801).epsilon(1e-12));
  }
  SUBCASE("M out of range") {
    cf.oneq.assign(4, 1.0);
    cf.twoq.assign(3, 0.99);
    CHECK_THROWS_AS(best_subchain(cf, 1), DataError);
    CHECK_THROWS_AS(best_subchain(cf, 5), DataError);
  }
  SUBCASE("agrees with exhaustive window evaluation") {
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> u(0.9, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      int n = 3 + static_cast<int>(rng() % 20);
      cf.oneq.resize(n);
      cf.twoq.resize(n - 1);
      for (auto& f : cf.oneq) f = u(rng);
      for (auto& f : cf.twoq) f = u(rng);
      for (int m = 2; m <= n; ++m) {
        auto got = best_subchain(cf, m);
        int best_start = 0;
        double best = -1.0;
        for (int s = 0; s + m <= n; ++s) {
          double p = oracle::window_product(cf.oneq, cf.twoq, s, m);
          if (p > best) {
            best = p;
            best_start = s;
          }
        }
        CAPTURE(trial);
        CAPTURE(m);
        CHECK(got.start_index == best_start);
        CHECK(got.product == doctest::Approx(best).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("grid families from bundled documents and path graphs") {
  auto p5 = path_graph(5);
  auto fams = build_grid_chains(p5);
  REQUIRE(fams.horizontal.size() == 1);
  CHECK(fams.vertical.empty());
  CHECK(fams.horizontal[0].length() == 5);

  for (int size : {127, 133, 156}) {
    auto t = topo::heavy_hex_preset(size);
    auto f = build_grid_chains(t);
    CHECK(!f.horizontal.empty());
    CHECK(!f.vertical.empty());
  }

  auto c6 = cycle_graph(6);
  CHECK_THROWS_WITH_AS(build_grid_chains(c6), doctest::Contains("[grids]"),
                       DataError);
}

#include "lfbench/chainsearch.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <set>
#include <sstream>

#include "lfbench/errors.hpp"
#include "lfbench/parallel.hpp"

namespace lfb::chains {

Chain Chain::unchecked(std::vector<int> qubits) {
  if (qubits.size() >= 2 && qubits.front() > qubits.back())
    std::reverse(qubits.begin(), qubits.end());
  Chain c;
  c.qubits_ = std::move(qubits);
  return c;
}

Chain Chain::make(std::vector<int> qubits, const topo::DeviceTopology& t) {
  if (qubits.empty()) throw DataError("chain must be nonempty");
  std::set<int> seen;
  for (int q : qubits) {
    if (q < 0 || q >= t.qubit_count())
      throw DataError("chain qubit " + std::to_string(q) + " outside [0, " +
                      std::to_string(t.qubit_count()) + ")");
    if (!seen.insert(q).second)
      throw DataError("chain revisits qubit " + std::to_string(q));
  }
  for (size_t i = 0; i + 1 < qubits.size(); ++i)
    if (!t.has_edge(qubits[i], qubits[i + 1]))
      throw DataError("chain uses missing edge " + std::to_string(qubits[i]) +
                      "-" + std::to_string(qubits[i + 1]));
  return unchecked(std::move(qubits));
}

bool scored_before(const ScoredChain& a, const ScoredChain& b) {
  if (a.log_score != b.log_score) return a.log_score > b.log_score;
  return a.chain.qubits() < b.chain.qubits();
}

double duration_penalty(double duration_ns, double median_duration_ns,
                        double kappa) {
  if (!(duration_ns > 0.0) || !(median_duration_ns > 0.0))
    throw DataError("durations must be positive");
  if (kappa < 0.0) throw DataError("penalty strength must be >= 0");
  double excess = std::max(0.0, duration_ns - median_duration_ns);
  return std::exp(-kappa * excess / median_duration_ns);
}

double median_duration(const GateErrorTable& table) {
  if (table.duration_ns.empty())
    throw DataError("gate error table has no durations");
  std::vector<double> d;
  d.reserve(table.duration_ns.size());
  for (const auto& [e, v] : table.duration_ns) d.push_back(v);
  std::sort(d.begin(), d.end());
  size_t n = d.size();
  return n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
}

GateErrorTable table_from_calibration(const topo::CalibratedTopology& ct,
                                      GateErrorTable::Provenance prov) {
  GateErrorTable table;
  table.oneq_error = ct.calibration.oneq_error;
  table.twoq_error = ct.calibration.twoq_error;
  table.duration_ns = ct.calibration.twoq_duration_ns;
  table.provenance = prov;
  return table;
}

namespace {

// Log process fidelity of one element of a chain, penalty applied to
// edges only.
double log_edge_fidelity(const GateErrorTable& table, const topo::Edge& e,
                         const DurationPenalty& penalty) {
  auto it = table.twoq_error.find(e);
  if (it == table.twoq_error.end())
    throw DataError("no 2Q error for edge " + std::to_string(e.first) + "-" +
                    std::to_string(e.second));
  double f = metrics::fidelity_from_error(it->second, 4).value;
  if (penalty.kappa > 0.0) {
    auto dur = table.duration_ns.find(e);
    if (dur == table.duration_ns.end())
      throw DataError("no duration for edge " + std::to_string(e.first) +
                      "-" + std::to_string(e.second));
    f *= duration_penalty(dur->second, penalty.median_duration_ns,
                          penalty.kappa);
  }
  return std::log(f);
}

double log_qubit_fidelity(const GateErrorTable& table, int q) {
  auto it = table.oneq_error.find(q);
  if (it == table.oneq_error.end())
    throw DataError("no 1Q error for qubit " + std::to_string(q));
  return std::log(metrics::fidelity_from_error(it->second, 2).value);
}

}  // namespace

ScoredChain score_chain(const Chain& chain, const GateErrorTable& table,
                        const DurationPenalty& penalty) {
  const auto& qs = chain.qubits();
  if (qs.empty()) throw DataError("cannot score an empty chain");
  // canonical term order: 1Q terms by qubit index, 2Q terms by edge key,
  // so a chain and its reverse sum identically bit for bit
  std::vector<double> logs;
  logs.reserve(2 * qs.size());
  std::vector<int> sorted_q = qs;
  std::sort(sorted_q.begin(), sorted_q.end());
  for (int q : sorted_q) logs.push_back(log_qubit_fidelity(table, q));
  std::vector<topo::Edge> edges;
  edges.reserve(qs.size());
  for (size_t i = 0; i + 1 < qs.size(); ++i)
    edges.push_back(topo::make_edge(qs[i], qs[i + 1]));
  std::sort(edges.begin(), edges.end());
  for (const auto& e : edges) logs.push_back(log_edge_fidelity(table, e, penalty));
  double sum = 0.0;
  for (double l : logs) sum += l;
  return {chain, std::exp(sum), sum};
}

// ---------------------------------------------------------------------
// Self-avoiding path search. Shared DFS core over a bitmask graph with a
// connectivity prune: a partial path dies when the unvisited region
// reachable from its tip is smaller than the remaining need. The prune
// check runs when the tip touches earlier path vertices (the only local
// hint that the region may have been cut) and periodically as a backstop;
// skipping a check never changes results, only the work done.
// ---------------------------------------------------------------------

namespace {

constexpr int kCheckInterval = 8;

template <int W>
class PathSearch {
public:
  struct Mask {
    uint64_t w[W];
    void clear() {
      for (int i = 0; i < W; ++i) w[i] = 0;
    }
    void set(int i) { w[i >> 6] |= 1ull << (i & 63); }
  };

  PathSearch(const topo::DeviceTopology& t, int need) : need_(need) {
    n_ = t.qubit_count();
    nmask_.assign(n_, Mask{});
    for (auto& m : nmask_) m.clear();
    for (const auto& [a, b] : t.edges()) {
      nmask_[a].set(b);
      nmask_[b].set(a);
    }
    visited_.clear();
  }

  // Counts directed paths with exactly `need_` vertices from `start`.
  uint64_t count_from(int start) {
    count_mode_ = true;
    paths_ = 0;
    visited_.clear();
    visited_.set(start);
    path_.assign(1, start);
    dfs(start, 1, 0);
    return paths_;
  }

  // Collects the top-k chains by score from `start` (directed; caller
  // dedups orientation). Bound pruning needs per-step increments.
  struct Scored {
    double log_score;
    std::vector<int> qubits;
  };

  void search_from(int start, const std::vector<std::vector<double>>& step_log,
                   const std::vector<double>& oneq_log, double max_step,
                   size_t k, std::vector<Scored>* out) {
    count_mode_ = false;
    step_log_ = &step_log;
    max_step_log_ = max_step;
    k_ = k;
    heap_ = out;
    visited_.clear();
    visited_.set(start);
    path_.assign(1, start);
    partial_log_ = oneq_log[start];
    dfs(start, 1, 0);
  }

  // Worst score currently needed to enter the top-k list (shared across
  // starts by the caller for tighter pruning; -inf when list not full).
  double prune_floor = -std::numeric_limits<double>::infinity();

private:
  bool reach_at_least(int from, int atleast) {
    Mask reach;
    reach.clear();
    reach.set(from);
    Mask frontier = reach;
    int cnt = 1;
    while (cnt < atleast) {
      Mask next;
      next.clear();
      for (int wd = 0; wd < W; ++wd) {
        uint64_t bits = frontier.w[wd];
        while (bits) {
          int v = (wd << 6) + __builtin_ctzll(bits);
          bits &= bits - 1;
          for (int i = 0; i < W; ++i) next.w[i] |= nmask_[v].w[i];
        }
      }
      bool grew = false;
      for (int i = 0; i < W; ++i) {
        uint64_t fresh = next.w[i] & ~reach.w[i] & ~visited_.w[i];
        frontier.w[i] = fresh;
        reach.w[i] |= fresh;
        if (fresh) {
          grew = true;
          cnt += __builtin_popcountll(fresh);
        }
      }
      if (!grew) return false;
    }
    return true;
  }

  void emit_path() {
    if (count_mode_) {
      ++paths_;
      return;
    }
    // orientation dedup: keep the canonical direction only
    if (path_.front() > path_.back()) return;
    Scored sc{partial_log_, path_};
    if (heap_->size() < k_) {
      heap_->push_back(std::move(sc));
      std::push_heap(heap_->begin(), heap_->end(), heap_before);
      if (heap_->size() == k_) prune_floor = heap_->front().log_score;
    } else if (better(sc, heap_->front())) {
      std::pop_heap(heap_->begin(), heap_->end(), heap_before);
      heap_->back() = std::move(sc);
      std::push_heap(heap_->begin(), heap_->end(), heap_before);
      prune_floor = heap_->front().log_score;
    }
  }

  // heap orders worst-first
  static bool better(const Scored& a, const Scored& b) {
    if (a.log_score != b.log_score) return a.log_score > b.log_score;
    return a.qubits < b.qubits;
  }
  static bool heap_before(const Scored& a, const Scored& b) {
    return better(a, b);
  }

  void dfs(int v, int depth, int since_check) {
    if (depth == need_) {
      emit_path();
      return;
    }
    Mask cand;
    int visited_nbrs = 0;
    for (int i = 0; i < W; ++i) {
      cand.w[i] = nmask_[v].w[i] & ~visited_.w[i];
      visited_nbrs += __builtin_popcountll(nmask_[v].w[i] & visited_.w[i]);
    }
    bool touch = visited_nbrs > 1;  // beyond the path predecessor
    for (int wd = 0; wd < W; ++wd) {
      uint64_t bits = cand.w[wd];
      while (bits) {
        int u = (wd << 6) + __builtin_ctzll(bits);
        bits &= bits - 1;
        double saved_log = partial_log_;
        if (!count_mode_) {
          partial_log_ += (*step_log_)[v][u];
          // score bound: finished best-case cannot beat the k-th best
          int remaining = need_ - depth - 1;
          double bound = partial_log_ + remaining * max_step_log_;
          if (bound + kBoundSlack < prune_floor) {
            partial_log_ = saved_log;
            continue;
          }
        }
        visited_.w[wd] |= 1ull << (u & 63);
        path_.push_back(u);
        int sc = since_check + 1;
        bool viable = true;
        if (touch || sc >= kCheckInterval) {
          viable = reach_at_least(u, need_ - depth);
          sc = 0;
        }
        if (viable) dfs(u, depth + 1, sc);
        path_.pop_back();
        visited_.w[wd] &= ~(1ull << (u & 63));
        partial_log_ = saved_log;
      }
    }
  }

  // absorbs floating-point reordering noise between the incremental sum
  // and the canonical score; pruning stays strictly conservative
  static constexpr double kBoundSlack = 1e-9;

  int n_ = 0, need_ = 0;
  std::vector<Mask> nmask_;
  Mask visited_;
  std::vector<int> path_;
  bool count_mode_ = true;
  uint64_t paths_ = 0;
  const std::vector<std::vector<double>>* step_log_ = nullptr;
  double max_step_log_ = 0.0;
  double partial_log_ = 0.0;
  size_t k_ = 0;
  std::vector<Scored>* heap_ = nullptr;
};

}  // namespace

uint64_t count_paths(const topo::DeviceTopology& t, int n_vertices,
                     int threads) {
  if (n_vertices < 1 || n_vertices > t.qubit_count())
    throw DataError("path length " + std::to_string(n_vertices) +
                    " outside [1, " + std::to_string(t.qubit_count()) + "]");
  if (n_vertices == 1) return static_cast<uint64_t>(t.qubit_count());

  int n = t.qubit_count();
  std::vector<uint64_t> partial(n, 0);
  auto run = [&](auto tag) {
    constexpr int W = decltype(tag)::value;
    parallel_for(n, threads, [&](int start) {
      PathSearch<W> search(t, n_vertices);
      partial[start] = search.count_from(start);
    });
  };
  if (n <= 128)
    run(std::integral_constant<int, 2>{});
  else if (n <= 192)
    run(std::integral_constant<int, 3>{});
  else if (n <= 320)
    run(std::integral_constant<int, 5>{});
  else
    throw DataError("topologies above 320 qubits are not supported");

  uint64_t directed = 0;
  for (uint64_t p : partial)
    if (__builtin_add_overflow(directed, p, &directed))
      throw NumericError("path count overflows 64-bit arithmetic");
  return directed / 2;
}

namespace {

template <int W>
std::vector<ScoredChain> best_chains_impl(const topo::DeviceTopology& t,
                                          const GateErrorTable& table, int n,
                                          int x,
                                          const DurationPenalty& penalty,
                                          int threads) {
  int nq = t.qubit_count();
  size_t k = static_cast<size_t>(x) + 1;

  // per-step log increments: extending the path v -> u multiplies in the
  // edge fidelity (with penalty) and u's 1Q fidelity
  std::vector<double> oneq_log(nq);
  for (int q = 0; q < nq; ++q) oneq_log[q] = log_qubit_fidelity(table, q);
  std::vector<std::vector<double>> step_log(nq, std::vector<double>(nq, 0.0));
  double max_step = -std::numeric_limits<double>::infinity();
  for (const auto& e : t.edges()) {
    double le = log_edge_fidelity(table, e, penalty);
    step_log[e.first][e.second] = le + oneq_log[e.second];
    step_log[e.second][e.first] = le + oneq_log[e.first];
    max_step = std::max({max_step, step_log[e.first][e.second],
                         step_log[e.second][e.first]});
  }

  // each start keeps a private top-k list; merged in start order below so
  // results do not depend on the thread count
  std::vector<std::vector<typename PathSearch<W>::Scored>> per_start(nq);
  parallel_for(nq, threads, [&](int start) {
    PathSearch<W> search(t, n);
    per_start[start].reserve(k);
    search.search_from(start, step_log, oneq_log, max_step, k,
                       &per_start[start]);
  });

  std::vector<typename PathSearch<W>::Scored> all;
  for (int s = 0; s < nq; ++s)
    for (auto& sc : per_start[s]) all.push_back(std::move(sc));
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.log_score != b.log_score) return a.log_score > b.log_score;
    return a.qubits < b.qubits;
  });
  if (all.size() > k) all.resize(k);

  if (all.empty())
    throw DataError("no chain of " + std::to_string(n) +
                    " qubits exists on this topology");

  // rescore canonically so reported values are orientation-invariant
  std::vector<ScoredChain> out;
  out.reserve(all.size());
  for (auto& sc : all)
    out.push_back(score_chain(Chain::unchecked(std::move(sc.qubits)), table,
                              penalty));
  std::sort(out.begin(), out.end(), scored_before);
  return out;
}

}  // namespace

std::vector<ScoredChain> best_chains(const topo::DeviceTopology& t,
                                     const GateErrorTable& table, int n,
                                     int x, const DurationPenalty& penalty,
                                     int threads) {
  if (n < 1 || n > t.qubit_count())
    throw DataError("chain length " + std::to_string(n) + " outside [1, " +
                    std::to_string(t.qubit_count()) + "]");
  if (x < 0) throw DataError("candidate count x must be >= 0");
  int nq = t.qubit_count();
  if (nq <= 128)
    return best_chains_impl<2>(t, table, n, x, penalty, threads);
  if (nq <= 192)
    return best_chains_impl<3>(t, table, n, x, penalty, threads);
  if (nq <= 320)
    return best_chains_impl<5>(t, table, n, x, penalty, threads);
  throw DataError("topologies above 320 qubits are not supported");
}

BCSelection select_b_c(std::span<const ScoredChain> topx, const Chain& a) {
  if (topx.empty()) throw DataError("select_b_c needs a nonempty candidate list");
  std::set<int> a_set(a.qubits().begin(), a.qubits().end());

  struct Ranked {
    int non_overlap;
    const ScoredChain* sc;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(topx.size());
  for (const auto& sc : topx) {
    int fresh = 0;
    for (int q : sc.chain.qubits())
      if (!a_set.count(q)) ++fresh;
    ranked.push_back({fresh, &sc});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& l, const Ranked& r) {
                     if (l.non_overlap != r.non_overlap)
                       return l.non_overlap > r.non_overlap;
                     return scored_before(*l.sc, *r.sc);
                   });

  BCSelection sel;
  for (const auto& r : ranked) {
    if (sel.picks.size() == 2) break;
    sel.picks.push_back(*r.sc);
    sel.non_overlap.push_back(r.non_overlap);
  }
  if (sel.picks.size() < 2 ||
      (sel.non_overlap[0] == 0 && sel.non_overlap[1] == 0))
    sel.degenerate = sel.picks.size() < 2 ||
                     std::all_of(sel.non_overlap.begin(), sel.non_overlap.end(),
                                 [](int v) { return v == 0; });
  return sel;
}

GridFamilies grid_families_from(const topo::TopologyDocument& doc) {
  GridFamilies fams;
  for (const auto& raw : doc.grids.horizontal)
    fams.horizontal.push_back(Chain::make(raw, doc.topology));
  for (const auto& raw : doc.grids.vertical)
    fams.vertical.push_back(Chain::make(raw, doc.topology));

  // within a family chains must be vertex-disjoint; across both families
  // every coupler must be exercised
  for (const auto* fam : {&fams.horizontal, &fams.vertical}) {
    std::set<int> used;
    for (const auto& ch : *fam)
      for (int q : ch.qubits())
        if (!used.insert(q).second)
          throw DataError("grid family reuses qubit " + std::to_string(q));
  }
  std::set<topo::Edge> covered;
  for (const auto* fam : {&fams.horizontal, &fams.vertical})
    for (const auto& ch : *fam)
      for (size_t i = 0; i + 1 < ch.qubits().size(); ++i)
        covered.insert(topo::make_edge(ch.qubits()[i], ch.qubits()[i + 1]));
  for (const auto& e : doc.topology.edges())
    if (!covered.count(e))
      throw DataError("grid chains do not cover edge " +
                      std::to_string(e.first) + "-" +
                      std::to_string(e.second));
  return fams;
}

GridFamilies build_grid_chains(const topo::DeviceTopology& t) {
  for (int size : {127, 133, 156}) {
    const auto& doc = topo::heavy_hex_document(size);
    if (doc.topology == t) return grid_families_from(doc);
  }
  // single path graph: one horizontal chain covers everything
  {
    std::vector<int> degree(t.qubit_count(), 0);
    for (const auto& [a, b] : t.edges()) {
      ++degree[a];
      ++degree[b];
    }
    int ends = 0, end = -1;
    bool path_like = t.qubit_count() >= 2;
    for (int q = 0; q < t.qubit_count(); ++q) {
      if (degree[q] == 1) {
        ++ends;
        if (end < 0) end = q;
      } else if (degree[q] != 2) {
        path_like = false;
      }
    }
    if (path_like && ends == 2 &&
        static_cast<int>(t.edges().size()) == t.qubit_count() - 1) {
      std::vector<int> walk{end};
      std::vector<bool> seen(t.qubit_count(), false);
      seen[end] = true;
      while (static_cast<int>(walk.size()) < t.qubit_count()) {
        bool advanced = false;
        for (int nb : t.adjacent(walk.back()))
          if (!seen[nb]) {
            seen[nb] = true;
            walk.push_back(nb);
            advanced = true;
            break;
          }
        if (!advanced) break;
      }
      if (static_cast<int>(walk.size()) == t.qubit_count()) {
        GridFamilies fams;
        fams.horizontal.push_back(Chain::make(walk, t));
        return fams;
      }
    }
  }
  throw DataError(
      "no grid embedding known for topology '" + t.name() +
      "'; supply grid chains in the topology file's [grids] section");
}

GateErrorTable merge_gate_errors(const GateErrorTable& horizontal,
                                 const GateErrorTable& vertical) {
  GateErrorTable merged;
  merged.provenance = GateErrorTable::Provenance::averaged;

  std::set<topo::Edge> edge_keys;
  for (const auto& [e, v] : horizontal.twoq_error) edge_keys.insert(e);
  for (const auto& [e, v] : vertical.twoq_error) edge_keys.insert(e);
  if (edge_keys.empty()) throw DataError("both gate error tables are empty");
  for (const auto& e : edge_keys) {
    auto h = horizontal.twoq_error.find(e);
    auto v = vertical.twoq_error.find(e);
    if (h != horizontal.twoq_error.end() && v != vertical.twoq_error.end())
      merged.twoq_error[e] = 0.5 * (h->second + v->second);
    else if (h != horizontal.twoq_error.end())
      merged.twoq_error[e] = h->second;
    else
      merged.twoq_error[e] = v->second;
  }

  std::set<int> qubit_keys;
  for (const auto& [q, v] : horizontal.oneq_error) qubit_keys.insert(q);
  for (const auto& [q, v] : vertical.oneq_error) qubit_keys.insert(q);
  for (int q : qubit_keys) {
    auto h = horizontal.oneq_error.find(q);
    auto v = vertical.oneq_error.find(q);
    if (h != horizontal.oneq_error.end() && v != vertical.oneq_error.end())
      merged.oneq_error[q] = 0.5 * (h->second + v->second);
    else if (h != horizontal.oneq_error.end())
      merged.oneq_error[q] = h->second;
    else
      merged.oneq_error[q] = v->second;
  }

  for (const auto& [e, d] : horizontal.duration_ns) merged.duration_ns[e] = d;
  for (const auto& [e, d] : vertical.duration_ns) merged.duration_ns[e] = d;
  return merged;
}

CandidateSet assemble_candidate_set(
    std::span<const ScoredChain> grid_ranked,
    std::span<const ScoredChain> isolated_ranked) {
  if (grid_ranked.empty() || isolated_ranked.empty())
    throw DataError("both strategy rankings must be nonempty");

  CandidateSet set;
  auto fill = [&set](std::span<const ScoredChain> ranked,
                     std::optional<ScoredChain>& slot_a,
                     std::optional<ScoredChain>& slot_b,
                     std::optional<ScoredChain>& slot_c) {
    slot_a = ranked.front();
    std::vector<ScoredChain> rest(ranked.begin() + 1, ranked.end());
    if (rest.empty()) {
      set.partial = true;
      return;
    }
    auto sel = select_b_c(rest, slot_a->chain);
    if (sel.degenerate) set.degenerate = true;
    if (!sel.picks.empty()) slot_b = sel.picks[0];
    if (sel.picks.size() > 1)
      slot_c = sel.picks[1];
    else
      set.partial = true;
  };
  fill(grid_ranked, set.a, set.b, set.c);
  fill(isolated_ranked, set.d, set.e, set.f);

  std::set<std::vector<int>> distinct;
  int labeled = 0;
  for (const auto* slot : {&set.a, &set.b, &set.c, &set.d, &set.e, &set.f})
    if (slot->has_value()) {
      ++labeled;
      distinct.insert((*slot)->chain.qubits());
    }
  set.overlap = static_cast<int>(distinct.size()) < labeled;
  return set;
}

SubchainResult best_subchain(const metrics::ChainFidelities& chain, int m) {
  int n = chain.n_qubits();
  if (static_cast<int>(chain.twoq.size()) != n - 1)
    throw DataError("chain fidelities inconsistent");
  if (m < 2 || m > n)
    throw DataError("subchain length " + std::to_string(m) + " outside [2, " +
                    std::to_string(n) + "]");
  for (double f : chain.oneq)
    if (!(f > 0.0 && f <= 1.0)) throw NumericError("1Q fidelity outside (0, 1]");
  for (double f : chain.twoq)
    if (!(f > 0.0 && f <= 1.0)) throw NumericError("2Q fidelity outside (0, 1]");

  // every window recomputed as a fresh log sum: O(n m) but exact, with no
  // subtraction cancellation, and windows stay tiny (n <= a few hundred)
  SubchainResult best;
  double best_log = -std::numeric_limits<double>::infinity();
  for (int start = 0; start + m <= n; ++start) {
    double log_sum = 0.0;
    for (int i = start; i < start + m; ++i) log_sum += std::log(chain.oneq[i]);
    for (int i = start; i < start + m - 1; ++i)
      log_sum += std::log(chain.twoq[i]);
    if (log_sum > best_log) {
      best_log = log_sum;
      best.start_index = start;
    }
  }
  best.log_product = best_log;
  best.product = std::exp(best_log);
  return best;
}

}  // namespace lfb::chains

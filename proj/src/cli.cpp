#include "lfbench/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lfbench/chainsearch.hpp"
#include "lfbench/errors.hpp"
#include "lfbench/fit.hpp"
#include "lfbench/metrics.hpp"
#include "lfbench/monitor.hpp"
#include "lfbench/parallel.hpp"
#include "lfbench/rbsim.hpp"
#include "lfbench/rng.hpp"
#include "lfbench/topology.hpp"

namespace lfb::cli {

namespace {

using nlohmann::json;

// ------------------------------------------------------------------ helpers

topo::TopologyDocument resolve_topology(const std::string& spec) {
  if (spec == "hh127") return topo::heavy_hex_document(127);
  if (spec == "hh133") return topo::heavy_hex_document(133);
  if (spec == "hh156") return topo::heavy_hex_document(156);
  return topo::load_topology_file(spec);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << content;
}

chains::Chain load_chain_file(const std::string& path,
                              const topo::DeviceTopology& t) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError("chain file " + path + ": " + e.what());
  }
  if (doc.is_object() && doc.contains("qubits")) doc = doc["qubits"];
  if (!doc.is_array()) throw DataError("chain file must be a JSON array");
  return chains::Chain::make(doc.get<std::vector<int>>(), t);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json eplg_json(const metrics::EplgEstimate& e) {
  json out;
  out["nominal"] = e.nominal;
  out["lower"] = e.lower;
  out["upper"] = e.upper;
  out["n_qubits"] = e.n_qubits;
  out["lf_nominal"] = e.lf_nominal;
  out["clamped"] = e.clamped;
  return out;
}

json scored_chain_json(const chains::ScoredChain& sc) {
  json out;
  out["qubits"] = sc.chain.qubits();
  out["score"] = sc.score;
  out["log_score"] = sc.log_score;
  return out;
}

// CI mode requires an explicit seed on simulation commands.
void enforce_ci_seed(const CLI::Option* seed_opt) {
  const char* ci = std::getenv("LFBENCH_CI");
  if (ci && std::string(ci) == "1" && seed_opt->count() == 0)
    throw DataError("--seed is required for simulation commands in CI mode");
}

// Brute-force path enumeration behind --oracle, for small instances.
void enumerate_paths(const topo::DeviceTopology& t, int need,
                     std::vector<int>* path, std::vector<bool>* used,
                     const std::function<void(const std::vector<int>&)>& emit) {
  int v = path->back();
  if (static_cast<int>(path->size()) == need) {
    if (path->front() < path->back()) emit(*path);
    return;
  }
  for (int u : t.adjacent(v)) {
    if ((*used)[u]) continue;
    (*used)[u] = true;
    path->push_back(u);
    enumerate_paths(t, need, path, used, emit);
    path->pop_back();
    (*used)[u] = false;
  }
}

uint64_t oracle_count(const topo::DeviceTopology& t, int need) {
  if (need == 1) return t.qubit_count();
  uint64_t count = 0;
  std::vector<bool> used(t.qubit_count(), false);
  std::vector<int> path;
  for (int s = 0; s < t.qubit_count(); ++s) {
    used[s] = true;
    path.assign(1, s);
    enumerate_paths(t, need, &path, &used,
                    [&](const std::vector<int>&) { ++count; });
    used[s] = false;
  }
  return count;
}

struct GateDistributions {
  std::vector<double> errors;  // fitted 2Q errors
  double median = 0.0;
};

GateDistributions twoq_error_distribution(
    const std::vector<rbsim::RBDecayData>& decays, int threads) {
  std::vector<rbsim::RBDecayData> twoq;
  for (const auto& d : decays)
    if (d.gate.is_two_qubit()) twoq.push_back(d);
  GateDistributions dist;
  dist.errors = fit::fitted_errors(twoq, {}, threads);
  std::vector<double> sorted = dist.errors;
  std::sort(sorted.begin(), sorted.end());
  dist.median = monitor::quantile_sorted(sorted, 0.5);
  return dist;
}

// ------------------------------------------------------------------ commands

struct CommonState {
  int threads = 0;
};

int cmd_count(const topo::TopologyDocument& doc, int n, bool oracle,
              bool oriented, int threads) {
  auto t0 = std::chrono::steady_clock::now();
  uint64_t count;
  if (oracle) {
    if (doc.topology.qubit_count() > 30)
      throw DataError("--oracle enumeration is limited to 30 qubits");
    count = oracle_count(doc.topology, n);
  } else {
    count = chains::count_paths(doc.topology, n, threads);
  }
  if (oriented && n >= 2) count *= 2;
  double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            t0)
                  .count();
  std::cout << count << "\n";
  std::fprintf(stderr, "count: %.3fs\n", dt);
  return 0;
}

json simulate_and_estimate(const topo::DeviceTopology& t,
                           const chains::Chain& chain,
                           const rbsim::NoiseModel& model,
                           rbsim::SimParams params, uint64_t seed,
                           int threads, metrics::EplgEstimate* out_est) {
  params.seed = seed;
  auto decays = rbsim::simulate_direct_rb(t, chain, rbsim::RBMode::layered,
                                          model, params, threads);
  auto est = fit::eplg_from_decays(decays, chain.length(), {}, threads);
  if (out_est) *out_est = est;
  return eplg_json(est);
}

int cmd_find(const std::string& topo_spec, const std::string& scenario_path,
             int n, int x, const std::string& strategy, double kappa,
             std::optional<uint64_t> seed_flag, bool oracle,
             const std::string& out_path, int threads) {
  auto doc = resolve_topology(topo_spec);
  const auto& t = doc.topology;
  auto scenario = rbsim::load_scenario_file(scenario_path, t);
  uint64_t seed = seed_flag.value_or(scenario.sim.seed);

  bool want_grid = strategy == "grid" || strategy == "both";
  bool want_isolated = strategy == "isolated" || strategy == "both";

  auto rank = [&](const chains::GateErrorTable& table,
                  bool with_penalty) -> std::vector<chains::ScoredChain> {
    chains::DurationPenalty penalty;
    if (with_penalty && kappa > 0.0) {
      penalty.kappa = kappa;
      penalty.median_duration_ns = chains::median_duration(table);
    }
    if (oracle) {
      if (t.qubit_count() > 30)
        throw DataError("--oracle search is limited to 30 qubits");
      std::vector<chains::ScoredChain> all;
      std::vector<bool> used(t.qubit_count(), false);
      std::vector<int> path;
      for (int s = 0; s < t.qubit_count(); ++s) {
        used[s] = true;
        path.assign(1, s);
        enumerate_paths(t, n, &path, &used, [&](const std::vector<int>& qs) {
          all.push_back(chains::score_chain(chains::Chain::unchecked(qs),
                                            table, penalty));
        });
        used[s] = false;
      }
      if (all.empty())
        throw DataError("no chain of " + std::to_string(n) + " qubits exists");
      std::sort(all.begin(), all.end(), chains::scored_before);
      if (all.size() > static_cast<size_t>(x) + 1)
        all.resize(static_cast<size_t>(x) + 1);
      return all;
    }
    return chains::best_chains(t, table, n, x, penalty, threads);
  };

  rbsim::SimParams prescreen = scenario.sim;

  json report;
  report["topology"] = t.name().empty() ? topo_spec : t.name();
  report["n"] = n;
  report["x"] = x;
  report["strategy"] = strategy;

  std::vector<chains::ScoredChain> grid_ranked, iso_ranked;
  if (want_grid) {
    auto grids = doc.grids.empty() ? chains::build_grid_chains(t)
                                   : chains::grid_families_from(doc);
    prescreen.seed = derive_seed(seed, 1);
    auto table = rbsim::grid_measurement(t, grids, scenario.model, prescreen,
                                         threads);
    grid_ranked = rank(table, false);
  }
  if (want_isolated) {
    prescreen.seed = derive_seed(seed, 2);
    auto table =
        rbsim::isolated_measurement(t, scenario.model, prescreen, threads);
    iso_ranked = rank(table, true);
  }

  // single-strategy runs rank one side only; the candidate set degenerates
  // to that side's A/B/C
  if (!want_grid) grid_ranked = iso_ranked;
  if (!want_isolated) iso_ranked = grid_ranked;
  auto set = chains::assemble_candidate_set(grid_ranked, iso_ranked);

  struct Labeled {
    const char* label;
    const std::optional<chains::ScoredChain>* slot;
  };
  std::vector<Labeled> labeled = {{"A", &set.a}, {"B", &set.b}, {"C", &set.c},
                                  {"D", &set.d}, {"E", &set.e}, {"F", &set.f}};
  if (strategy == "grid") labeled.resize(3);
  if (strategy == "isolated")
    labeled = {{"D", &set.d}, {"E", &set.e}, {"F", &set.f}};

  json members = json::object();
  std::string winner_label;
  double winner_eplg = 0.0;
  std::vector<int> winner_qubits;
  int member_index = 0;
  for (const auto& [label, slot] : labeled) {
    if (!slot->has_value()) continue;
    json m = scored_chain_json(**slot);
    metrics::EplgEstimate est;
    m["eplg"] = simulate_and_estimate(t, (*slot)->chain, scenario.model,
                                      scenario.sim,
                                      derive_seed(seed, 100 + member_index),
                                      threads, &est);
    members[label] = std::move(m);
    if (winner_label.empty() || est.nominal < winner_eplg) {
      winner_label = label;
      winner_eplg = est.nominal;
      winner_qubits = (*slot)->chain.qubits();
    }
    ++member_index;
  }
  report["candidates"] = std::move(members);
  report["winner"] = {{"label", winner_label},
                      {"qubits", winner_qubits},
                      {"eplg_nominal", winner_eplg}};
  report["flags"] = {{"partial", set.partial},
                     {"overlap", set.overlap},
                     {"degenerate", set.degenerate}};
  write_output(out_path, report.dump(2) + "\n");
  return 0;
}

int cmd_grid(const std::string& topo_spec, const std::string& out_path) {
  auto doc = resolve_topology(topo_spec);
  auto fams = doc.grids.empty() ? chains::build_grid_chains(doc.topology)
                                : chains::grid_families_from(doc);
  json out;
  out["topology"] = doc.topology.name();
  out["qubits"] = doc.topology.qubit_count();
  out["edges"] = doc.topology.edges().size();
  auto fam_json = [](const std::vector<chains::Chain>& fam) {
    json arr = json::array();
    for (const auto& c : fam) arr.push_back(c.qubits());
    return arr;
  };
  out["horizontal"] = fam_json(fams.horizontal);
  out["vertical"] = fam_json(fams.vertical);
  std::set<topo::Edge> covered;
  for (const auto* fam : {&fams.horizontal, &fams.vertical})
    for (const auto& c : *fam)
      for (size_t i = 0; i + 1 < c.qubits().size(); ++i)
        covered.insert(topo::make_edge(c.qubits()[i], c.qubits()[i + 1]));
  out["covered_edges"] = covered.size();
  write_output(out_path, out.dump(2) + "\n");
  return 0;
}

json decays_to_json(const std::vector<rbsim::RBDecayData>& decays) {
  json arr = json::array();
  for (const auto& d : decays) {
    json rec;
    rec["gate"] = rbsim::gate_label(d.gate);
    rec["two_qubit"] = d.gate.is_two_qubit();
    rec["mode"] = rbsim::mode_name(d.mode);
    rec["lengths"] = d.lengths;
    rec["shots"] = d.shots;
    rec["samples"] = d.samples;
    arr.push_back(std::move(rec));
  }
  return arr;
}

std::vector<rbsim::RBDecayData> decays_from_json(const json& doc) {
  std::vector<rbsim::RBDecayData> decays;
  for (const auto& rec : doc) {
    rbsim::RBDecayData d;
    std::string gate = rec.at("gate").get<std::string>();
    auto dash = gate.find('-');
    if (dash != std::string::npos)
      d.gate = rbsim::GateId::two_qubit(std::stoi(gate.substr(0, dash)),
                                        std::stoi(gate.substr(dash + 1)));
    else
      d.gate = rbsim::GateId::one_qubit(std::stoi(gate));
    d.mode = rbsim::parse_mode(rec.value("mode", "layered"));
    d.lengths = rec.at("lengths").get<std::vector<int>>();
    d.shots = rec.at("shots").get<int>();
    d.samples = rec.at("samples").get<std::vector<std::vector<double>>>();
    decays.push_back(std::move(d));
  }
  return decays;
}

int cmd_simulate(const std::string& topo_spec, const std::string& scenario_path,
                 const std::string& chain_path, const std::string& mode_name,
                 std::optional<uint64_t> seed_flag, std::optional<int> day,
                 const std::string& out_path, int threads) {
  auto doc = resolve_topology(topo_spec);
  auto scenario = rbsim::load_scenario_file(scenario_path, doc.topology);
  auto chain = load_chain_file(chain_path, doc.topology);
  auto mode = rbsim::parse_mode(mode_name);
  rbsim::SimParams params = scenario.sim;
  if (seed_flag) params.seed = *seed_flag;

  rbsim::NoiseModel model = scenario.model;
  if (day)
    for (const auto& event : scenario.events)
      model = rbsim::apply_event(model, event, *day);

  auto decays =
      rbsim::simulate_direct_rb(doc.topology, chain, mode, model, params,
                                threads);
  json out;
  out["topology"] = doc.topology.name().empty() ? topo_spec
                                                : doc.topology.name();
  out["chain"] = chain.qubits();
  out["mode"] = rbsim::mode_name(mode);
  out["sim"] = {{"lengths", params.lengths},
                {"randomizations", params.randomizations},
                {"shots", params.shots},
                {"seed", params.seed}};
  out["decays"] = decays_to_json(decays);
  write_output(out_path, out.dump() + "\n");
  return 0;
}

int cmd_fit(const std::string& data_path, const std::string& out_path,
            int threads) {
  json doc;
  try {
    doc = json::parse(read_file(data_path));
  } catch (const json::parse_error& e) {
    throw DataError(std::string("decay data: ") + e.what());
  }
  auto decays = decays_from_json(doc.at("decays"));
  int n_qubits = doc.contains("chain")
                     ? static_cast<int>(doc["chain"].size())
                     : 0;

  std::vector<fit::FitResult> fits(decays.size());
  parallel_for(static_cast<int>(decays.size()), threads,
               [&](int i) { fits[i] = fit::fit_decay(decays[i]); });

  json out;
  json arr = json::array();
  for (size_t i = 0; i < fits.size(); ++i) {
    const auto& f = fits[i];
    json rec;
    rec["gate"] = rbsim::gate_label(decays[i].gate);
    rec["a"] = f.a;
    rec["alpha"] = f.alpha;
    rec["b"] = f.b;
    rec["se_a"] = f.se_a;
    rec["se_alpha"] = f.se_alpha;
    rec["se_b"] = f.se_b;
    rec["residual_rms"] = f.residual_rms;
    rec["n_points"] = f.n_points;
    rec["converged"] = f.converged;
    json cov = json::array();
    for (int r = 0; r < 3; ++r) {
      json row = json::array();
      for (int c = 0; c < 3; ++c) row.push_back(f.covariance[r][c]);
      cov.push_back(row);
    }
    rec["covariance"] = cov;
    arr.push_back(std::move(rec));
  }
  out["fits"] = std::move(arr);
  if (n_qubits >= 2) {
    std::vector<metrics::GateFit> gate_fits;
    for (size_t i = 0; i < fits.size(); ++i)
      gate_fits.push_back({fits[i].alpha, fits[i].se_alpha,
                           decays[i].gate.dimension()});
    out["eplg"] = eplg_json(metrics::propagate_bounds(gate_fits, n_qubits));
  }
  write_output(out_path, out.dump(2) + "\n");
  return 0;
}

int cmd_scan(const std::string& mode, const std::string& topo_spec,
             const std::string& scenario_path, const std::string& chain_path,
             int randomizations, int trials, std::optional<uint64_t> seed_flag,
             const std::string& out_path, int threads) {
  auto doc = resolve_topology(topo_spec);
  auto scenario = rbsim::load_scenario_file(scenario_path, doc.topology);
  auto chain = load_chain_file(chain_path, doc.topology);
  uint64_t seed = seed_flag.value_or(scenario.sim.seed);

  rbsim::SimParams params = scenario.sim;
  params.randomizations = randomizations;
  params.seed = derive_seed(seed, 7);
  auto decays = rbsim::simulate_direct_rb(
      doc.topology, chain, rbsim::RBMode::layered, scenario.model, params,
      threads);

  std::vector<fit::ScanResult> results;
  if (mode == "randomizations") {
    std::vector<int> r_values;
    for (int r : {1, 2, 3, 4, 5, 6, 8, 10, 15, 20, 30, 50, 75, 100})
      if (r <= randomizations) r_values.push_back(r);
    results = fit::randomization_scan(decays, r_values, trials,
                                      derive_seed(seed, 8), chain.length(),
                                      threads);
  } else if (mode == "cliffords") {
    results = fit::clifford_scan(decays, params.lengths, chain.length(),
                                 threads);
  } else {
    throw DataError("scan mode must be randomizations or cliffords");
  }

  std::ostringstream csv;
  csv << "axis,nominal,lower,upper,fittable\n";
  for (const auto& r : results) {
    csv << format_double(r.axis) << ",";
    if (r.fittable)
      csv << format_double(r.estimate.nominal) << ","
          << format_double(r.estimate.lower) << ","
          << format_double(r.estimate.upper) << ",1\n";
    else
      csv << ",,,0\n";
  }
  write_output(out_path, csv.str());
  return 0;
}

int cmd_duration_study(const std::string& topo_spec,
                       const std::string& scenario_path,
                       const std::string& chain_path,
                       std::optional<uint64_t> seed_flag,
                       const std::string& out_path, int threads) {
  auto doc = resolve_topology(topo_spec);
  const auto& t = doc.topology;
  auto scenario = rbsim::load_scenario_file(scenario_path, t);
  auto chain = load_chain_file(chain_path, t);
  uint64_t seed = seed_flag.value_or(scenario.sim.seed);
  const auto& qs = chain.qubits();

  // three error distributions over the chain's couplers
  json dist_json = json::object();
  std::map<std::string, GateDistributions> dists;
  int mode_index = 0;
  for (auto mode : {rbsim::RBMode::isolated, rbsim::RBMode::isolated_delay,
                    rbsim::RBMode::layered}) {
    rbsim::SimParams params = scenario.sim;
    params.seed = derive_seed(seed, 10 + mode_index++);
    auto decays =
        rbsim::simulate_direct_rb(t, chain, mode, scenario.model, params,
                                  threads);
    auto dist = twoq_error_distribution(decays, threads);
    json d;
    d["median_error"] = dist.median;
    json nq = json::array();
    for (const auto& [z, v] : monitor::normal_quantile_points(dist.errors))
      nq.push_back({z, v});
    d["normal_quantile"] = nq;
    d["errors"] = dist.errors;
    dist_json[rbsim::mode_name(mode)] = std::move(d);
    dists[rbsim::mode_name(mode)] = std::move(dist);
  }

  // long gates: chain couplers strictly longer than the chain median
  std::vector<double> durations;
  for (size_t i = 0; i + 1 < qs.size(); ++i)
    durations.push_back(
        scenario.model.duration_ns.at(topo::make_edge(qs[i], qs[i + 1])));
  std::vector<double> sorted_dur = durations;
  std::sort(sorted_dur.begin(), sorted_dur.end());
  double median_dur = monitor::quantile_sorted(sorted_dur, 0.5);
  std::vector<bool> is_long(durations.size());
  for (size_t i = 0; i < durations.size(); ++i)
    is_long[i] = durations[i] > median_dur;
  int long_count = std::count(is_long.begin(), is_long.end(), true);

  // run A: layered with every gate present
  rbsim::SimParams params_a = scenario.sim;
  params_a.seed = derive_seed(seed, 20);
  auto decays_a = rbsim::simulate_direct_rb(t, chain, rbsim::RBMode::layered,
                                            scenario.model, params_a, threads);
  std::vector<fit::FitResult> fits_a(decays_a.size());
  parallel_for(static_cast<int>(decays_a.size()), threads,
               [&](int i) { fits_a[i] = fit::fit_decay(decays_a[i]); });
  std::map<std::string, metrics::GateFit> fit_a_by_gate;
  for (size_t i = 0; i < decays_a.size(); ++i)
    fit_a_by_gate[rbsim::gate_label(decays_a[i].gate)] = {
        fits_a[i].alpha, fits_a[i].se_alpha, decays_a[i].gate.dimension()};
  std::vector<metrics::GateFit> all_a;
  for (const auto& [label, gf] : fit_a_by_gate) all_a.push_back(gf);
  auto eplg_with = metrics::propagate_bounds(all_a, chain.length());

  // run B: long gates removed; the chain splits into segments measured at
  // their native durations, removed-gate fidelities re-introduced from A
  std::vector<std::vector<int>> segments;
  {
    std::vector<int> current{qs[0]};
    for (size_t i = 0; i + 1 < qs.size(); ++i) {
      if (is_long[i]) {
        segments.push_back(current);
        current.assign(1, qs[i + 1]);
      } else {
        current.push_back(qs[i + 1]);
      }
    }
    segments.push_back(current);
  }
  std::map<std::string, metrics::GateFit> fit_b_by_gate;
  int segment_index = 0;
  for (const auto& seg : segments) {
    rbsim::SimParams params_b = scenario.sim;
    params_b.seed = derive_seed(seed, 30 + segment_index++);
    if (seg.size() >= 2) {
      auto seg_chain = chains::Chain::make(seg, t);
      auto decays = rbsim::simulate_direct_rb(
          t, seg_chain, rbsim::RBMode::layered, scenario.model, params_b,
          threads);
      std::vector<fit::FitResult> fits(decays.size());
      parallel_for(static_cast<int>(decays.size()), threads,
                   [&](int i) { fits[i] = fit::fit_decay(decays[i]); });
      for (size_t i = 0; i < decays.size(); ++i)
        fit_b_by_gate[rbsim::gate_label(decays[i].gate)] = {
            fits[i].alpha, fits[i].se_alpha, decays[i].gate.dimension()};
    } else {
      // a lone qubit between two removed gates keeps its 1Q decay
      auto decays = rbsim::simulate_direct_rb(
          t,
          chains::Chain::unchecked({seg[0],
                                    t.adjacent(seg[0]).front()}),
          rbsim::RBMode::layered, scenario.model, params_b, threads);
      for (size_t i = 0; i < decays.size(); ++i)
        if (!decays[i].gate.is_two_qubit() && decays[i].gate.a == seg[0]) {
          auto f = fit::fit_decay(decays[i]);
          fit_b_by_gate[rbsim::gate_label(decays[i].gate)] = {
              f.alpha, f.se_alpha, 2};
        }
    }
  }
  // re-introduce removed couplers from run A
  for (size_t i = 0; i + 1 < qs.size(); ++i)
    if (is_long[i]) {
      std::string label = rbsim::gate_label(
          rbsim::GateId::two_qubit(qs[i], qs[i + 1]));
      fit_b_by_gate[label] = fit_a_by_gate.at(label);
    }
  std::vector<metrics::GateFit> all_b;
  for (const auto& [label, gf] : fit_b_by_gate) all_b.push_back(gf);
  auto eplg_without = metrics::propagate_bounds(all_b, chain.length());

  json out;
  out["chain"] = qs;
  out["long_gates"] = long_count;
  out["median_duration_ns"] = median_dur;
  out["distributions"] = std::move(dist_json);
  out["median_ratio_delay_over_isolated"] =
      dists["isolated_delay"].median / dists["isolated"].median;
  out["median_ratio_layered_over_isolated"] =
      dists["layered"].median / dists["isolated"].median;
  out["eplg_with_long_gates"] = eplg_json(eplg_with);
  out["eplg_without_long_gates"] = eplg_json(eplg_without);
  out["relative_increase"] =
      (eplg_with.nominal - eplg_without.nominal) / eplg_without.nominal;
  write_output(out_path, out.dump(2) + "\n");
  return 0;
}

int cmd_monitor(const std::string& series_path, int window, bool static_window,
                const std::string& out_path, const std::string& csv_path) {
  auto series = monitor::parse_series_jsonl(read_file(series_path));
  auto report = monitor::rolling_outlier_threshold(series, window,
                                                   static_window);

  json out;
  json stats = json::object();
  {
    // summary per chain kind
    std::map<monitor::ChainKind, std::vector<double>> by_kind;
    for (const auto& e : series.entries()) by_kind[e.kind].push_back(e.eplg);
    for (const auto& [kind, values] : by_kind) {
      auto s = monitor::summary_stats_values(values);
      json sj;
      sj["median"] = s.median;
      sj["std_dev"] = s.std_dev;
      sj["min"] = s.min;
      sj["max"] = s.max;
      sj["abs_range"] = s.abs_range;
      sj["n"] = s.n;
      sj["degenerate"] = s.degenerate;
      stats[monitor::chain_kind_name(kind)] = std::move(sj);
    }
  }
  out["stats"] = std::move(stats);
  json oj;
  oj["window"] = report.window;
  oj["static_window"] = report.static_window;
  oj["flagged_days"] = report.flagged_days;
  json days = json::array();
  for (const auto& d : report.per_day) {
    json dj;
    dj["day"] = d.day;
    dj["kind"] = monitor::chain_kind_name(d.kind);
    dj["value"] = d.value;
    dj["threshold"] = d.threshold;
    dj["threshold_defined"] = d.threshold_defined;
    dj["flagged"] = d.flagged;
    dj["window_gappy"] = d.window_gappy;
    days.push_back(std::move(dj));
  }
  oj["per_day"] = std::move(days);
  out["outliers"] = std::move(oj);
  write_output(out_path, out.dump(2) + "\n");

  if (!csv_path.empty()) {
    std::ostringstream csv;
    csv << "day,kind,value,threshold,threshold_defined,flagged\n";
    for (const auto& d : report.per_day)
      csv << d.day << "," << monitor::chain_kind_name(d.kind) << ","
          << format_double(d.value) << "," << format_double(d.threshold)
          << "," << (d.threshold_defined ? 1 : 0) << ","
          << (d.flagged ? 1 : 0) << "\n";
    write_output(csv_path, csv.str());
  }
  return 0;
}

int cmd_report(const std::string& topo_spec, const std::string& scenario_path,
               const std::string& chain_path,
               std::optional<uint64_t> seed_flag,
               const std::string& lengths_spec, const std::string& out_path,
               const std::string& csv_path, int threads) {
  auto doc = resolve_topology(topo_spec);
  const auto& t = doc.topology;
  auto scenario = rbsim::load_scenario_file(scenario_path, t);
  auto chain = load_chain_file(chain_path, t);
  uint64_t seed = seed_flag.value_or(scenario.sim.seed);

  rbsim::SimParams params = scenario.sim;
  params.seed = derive_seed(seed, 40);
  auto decays = rbsim::simulate_direct_rb(t, chain, rbsim::RBMode::layered,
                                          scenario.model, params, threads);
  std::vector<fit::FitResult> fits(decays.size());
  parallel_for(static_cast<int>(decays.size()), threads,
               [&](int i) { fits[i] = fit::fit_decay(decays[i]); });

  std::vector<metrics::GateFit> gate_fits;
  for (size_t i = 0; i < fits.size(); ++i)
    gate_fits.push_back({fits[i].alpha, fits[i].se_alpha,
                         decays[i].gate.dimension()});
  auto est = metrics::propagate_bounds(gate_fits, chain.length());

  // per-element fidelities in chain order for the length curve
  const auto& qs = chain.qubits();
  metrics::ChainFidelities cf;
  cf.oneq.resize(qs.size());
  cf.twoq.resize(qs.size() - 1);
  for (size_t i = 0; i < decays.size(); ++i) {
    double f = metrics::fidelity_from_decay(fits[i].alpha,
                                            decays[i].gate.dimension())
                   .value;
    const auto& g = decays[i].gate;
    if (g.is_two_qubit()) {
      for (size_t k = 0; k + 1 < qs.size(); ++k)
        if (topo::make_edge(qs[k], qs[k + 1]) == topo::Edge{g.a, g.b})
          cf.twoq[k] = f;
    } else {
      for (size_t k = 0; k < qs.size(); ++k)
        if (qs[k] == g.a) cf.oneq[k] = f;
    }
  }

  std::vector<int> lengths;
  if (lengths_spec.empty()) {
    for (int l = 2; l <= chain.length(); ++l) lengths.push_back(l);
  } else {
    std::stringstream ss(lengths_spec);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) lengths.push_back(std::stoi(item));
  }
  auto curve = metrics::eplg_length_curve(cf, lengths);

  json out;
  out["chain"] = qs;
  out["eplg"] = eplg_json(est);
  json cj = json::array();
  for (const auto& [len, e] : curve)
    cj.push_back({{"length", len},
                  {"eplg", e.nominal},
                  {"lf", e.lf_nominal}});
  out["curve"] = std::move(cj);
  write_output(out_path, out.dump(2) + "\n");

  if (!csv_path.empty()) {
    std::ostringstream csv;
    csv << "length,eplg,lf\n";
    for (const auto& [len, e] : curve)
      csv << len << "," << format_double(e.nominal) << ","
          << format_double(e.lf_nominal) << "\n";
    write_output(csv_path, csv.str());
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"layer-fidelity / EPLG benchmarking toolkit"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker thread cap (0 = auto)");

  // count
  auto* count = app.add_subcommand("count", "count N-qubit chains");
  std::string count_topo;
  int count_n = 0;
  bool count_oracle = false, count_oriented = false;
  count->add_option("--topo", count_topo, "preset (hh127/hh133/hh156) or file")
      ->required();
  count->add_option("--n", count_n, "chain length in qubits")->required();
  count->add_flag("--oracle", count_oracle, "brute-force enumeration");
  count->add_flag("--oriented", count_oriented,
                  "count each traversal direction separately");

  // find
  auto* find = app.add_subcommand("find", "search for the best chain set");
  std::string find_topo, find_scenario, find_strategy = "both", find_out = "-";
  int find_n = 0, find_x = 15;
  double find_kappa = 0.01;
  bool find_oracle = false;
  std::optional<uint64_t> find_seed;
  uint64_t find_seed_raw = 0;
  find->add_option("--topo", find_topo)->required();
  find->add_option("--scenario", find_scenario, "noise scenario JSON")
      ->required();
  find->add_option("--n", find_n, "chain length")->required();
  find->add_option("--x", find_x, "extra ranked candidates");
  find->add_option("--strategy", find_strategy, "grid|isolated|both")
      ->check(CLI::IsMember({"grid", "isolated", "both"}));
  find->add_option("--kappa", find_kappa, "duration penalty strength");
  auto* find_seed_opt = find->add_option("--seed", find_seed_raw, "RNG seed");
  find->add_flag("--oracle", find_oracle, "exhaustive ranking");
  find->add_option("--out", find_out, "output path (default stdout)");

  // grid
  auto* grid = app.add_subcommand("grid", "emit grid chain families");
  std::string grid_topo, grid_out = "-";
  grid->add_option("--topo", grid_topo)->required();
  grid->add_option("--out", grid_out);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "simulate direct-RB decays");
  std::string sim_topo, sim_scenario, sim_chain, sim_mode = "layered",
              sim_out = "-";
  std::optional<uint64_t> sim_seed;
  uint64_t sim_seed_raw = 0;
  std::optional<int> sim_day;
  int sim_day_raw = 0;
  simulate->add_option("--topo", sim_topo)->required();
  simulate->add_option("--scenario", sim_scenario)->required();
  simulate->add_option("--chain-file", sim_chain)->required();
  simulate->add_option("--mode", sim_mode,
                       "isolated|isolated_delay|layered");
  auto* sim_seed_opt = simulate->add_option("--seed", sim_seed_raw);
  auto* sim_day_opt =
      simulate->add_option("--day", sim_day_raw, "apply scenario events");
  simulate->add_option("--out", sim_out);

  // fit
  auto* fitcmd = app.add_subcommand("fit", "fit decay data to a*alpha^x+b");
  std::string fit_data, fit_out = "-";
  fitcmd->add_option("--data", fit_data, "decay data JSON from simulate")
      ->required();
  fitcmd->add_option("--out", fit_out);

  // scan
  auto* scan = app.add_subcommand("scan", "convergence scans");
  std::string scan_mode, scan_topo, scan_scenario, scan_chain, scan_out = "-";
  int scan_rand = 100, scan_trials = 30;
  std::optional<uint64_t> scan_seed;
  uint64_t scan_seed_raw = 0;
  scan->add_option("--mode", scan_mode, "randomizations|cliffords")
      ->required()
      ->check(CLI::IsMember({"randomizations", "cliffords"}));
  scan->add_option("--topo", scan_topo)->required();
  scan->add_option("--scenario", scan_scenario)->required();
  scan->add_option("--chain-file", scan_chain)->required();
  scan->add_option("--randomizations", scan_rand, "dataset randomizations");
  scan->add_option("--trials", scan_trials, "Monte-Carlo trials per point");
  auto* scan_seed_opt = scan->add_option("--seed", scan_seed_raw);
  scan->add_option("--out", scan_out);

  // duration-study
  auto* dur = app.add_subcommand("duration-study",
                                 "gate-duration impact study");
  std::string dur_topo, dur_scenario, dur_chain, dur_out = "-";
  std::optional<uint64_t> dur_seed;
  uint64_t dur_seed_raw = 0;
  dur->add_option("--topo", dur_topo)->required();
  dur->add_option("--scenario", dur_scenario)->required();
  dur->add_option("--chain-file", dur_chain)->required();
  auto* dur_seed_opt = dur->add_option("--seed", dur_seed_raw);
  dur->add_option("--out", dur_out);

  // monitor
  auto* mon = app.add_subcommand("monitor", "stability monitoring");
  std::string mon_series, mon_out = "-", mon_csv;
  int mon_window = 15;
  bool mon_static = false;
  mon->add_option("--series-file", mon_series, "JSON-lines EPLG series")
      ->required();
  mon->add_option("--window", mon_window);
  mon->add_flag("--static-window", mon_static,
                "threshold from the final window only");
  mon->add_option("--out", mon_out);
  mon->add_option("--csv", mon_csv, "per-day CSV path");

  // report
  auto* rep = app.add_subcommand("report", "EPLG report for one chain");
  std::string rep_topo, rep_scenario, rep_chain, rep_out = "-", rep_csv,
              rep_lengths;
  std::optional<uint64_t> rep_seed;
  uint64_t rep_seed_raw = 0;
  rep->add_option("--topo", rep_topo)->required();
  rep->add_option("--scenario", rep_scenario)->required();
  rep->add_option("--chain-file", rep_chain)->required();
  auto* rep_seed_opt = rep->add_option("--seed", rep_seed_raw);
  rep->add_option("--lengths", rep_lengths, "comma-separated curve lengths");
  rep->add_option("--out", rep_out);
  rep->add_option("--csv", rep_csv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (count->parsed())
      return cmd_count(resolve_topology(count_topo), count_n, count_oracle,
                       count_oriented, threads);
    if (find->parsed()) {
      enforce_ci_seed(find_seed_opt);
      if (find_seed_opt->count()) find_seed = find_seed_raw;
      return cmd_find(find_topo, find_scenario, find_n, find_x, find_strategy,
                      find_kappa, find_seed, find_oracle, find_out, threads);
    }
    if (grid->parsed()) return cmd_grid(grid_topo, grid_out);
    if (simulate->parsed()) {
      enforce_ci_seed(sim_seed_opt);
      if (sim_seed_opt->count()) sim_seed = sim_seed_raw;
      if (sim_day_opt->count()) sim_day = sim_day_raw;
      return cmd_simulate(sim_topo, sim_scenario, sim_chain, sim_mode,
                          sim_seed, sim_day, sim_out, threads);
    }
    if (fitcmd->parsed()) return cmd_fit(fit_data, fit_out, threads);
    if (scan->parsed()) {
      enforce_ci_seed(scan_seed_opt);
      if (scan_seed_opt->count()) scan_seed = scan_seed_raw;
      return cmd_scan(scan_mode, scan_topo, scan_scenario, scan_chain,
                      scan_rand, scan_trials, scan_seed, scan_out, threads);
    }
    if (dur->parsed()) {
      enforce_ci_seed(dur_seed_opt);
      if (dur_seed_opt->count()) dur_seed = dur_seed_raw;
      return cmd_duration_study(dur_topo, dur_scenario, dur_chain, dur_seed,
                                dur_out, threads);
    }
    if (mon->parsed())
      return cmd_monitor(mon_series, mon_window, mon_static, mon_out,
                         mon_csv);
    if (rep->parsed()) {
      enforce_ci_seed(rep_seed_opt);
      if (rep_seed_opt->count()) rep_seed = rep_seed_raw;
      return cmd_report(rep_topo, rep_scenario, rep_chain, rep_seed,
                        rep_lengths, rep_out, rep_csv, threads);
    }
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}

}  // namespace lfb::cli

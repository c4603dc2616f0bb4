#include "lfbench/rbsim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lfbench/errors.hpp"
#include "lfbench/fit.hpp"
#include "lfbench/parallel.hpp"
#include "lfbench/rng.hpp"

namespace lfb::rbsim {

std::string gate_label(const GateId& g) {
  if (g.is_two_qubit())
    return std::to_string(g.a) + "-" + std::to_string(g.b);
  return std::to_string(g.a);
}

RBMode parse_mode(const std::string& name) {
  if (name == "isolated") return RBMode::isolated;
  if (name == "isolated_delay") return RBMode::isolated_delay;
  if (name == "layered") return RBMode::layered;
  throw DataError("unknown RB mode '" + name +
                  "' (expected isolated, isolated_delay or layered)");
}

std::string mode_name(RBMode mode) {
  switch (mode) {
    case RBMode::isolated: return "isolated";
    case RBMode::isolated_delay: return "isolated_delay";
    case RBMode::layered: return "layered";
  }
  return "?";
}

void validate_model(const NoiseModel& m, const topo::DeviceTopology& t) {
  if (!(m.chi > 0.0 && m.chi <= 1.0))
    throw DataError("crosstalk factor chi must be in (0, 1]");
  for (int q = 0; q < t.qubit_count(); ++q) {
    auto a1 = m.alpha1.find(q);
    if (a1 == m.alpha1.end())
      throw DataError("model missing alpha1 for qubit " + std::to_string(q));
    if (!(a1->second > 0.0 && a1->second <= 1.0))
      throw DataError("alpha1 outside (0, 1] on qubit " + std::to_string(q));
    auto lam = m.lambda.find(q);
    if (lam == m.lambda.end())
      throw DataError("model missing lambda for qubit " + std::to_string(q));
    if (!(lam->second >= 0.0))
      throw DataError("lambda must be >= 0 on qubit " + std::to_string(q));
  }
  for (const auto& e : t.edges()) {
    std::string label = std::to_string(e.first) + "-" + std::to_string(e.second);
    auto a2 = m.alpha2.find(e);
    if (a2 == m.alpha2.end())
      throw DataError("model missing alpha2 for edge " + label);
    if (!(a2->second > 0.0 && a2->second <= 1.0))
      throw DataError("alpha2 outside (0, 1] on edge " + label);
    auto dur = m.duration_ns.find(e);
    if (dur == m.duration_ns.end())
      throw DataError("model missing duration for edge " + label);
    if (!(dur->second > 0.0))
      throw DataError("duration must be positive on edge " + label);
  }
}

namespace {

double model_alpha(const NoiseModel& model, const GateId& gate) {
  if (gate.is_two_qubit()) {
    auto it = model.alpha2.find({gate.a, gate.b});
    if (it == model.alpha2.end())
      throw DataError("gate " + gate_label(gate) + " not in noise model");
    return it->second;
  }
  auto it = model.alpha1.find(gate.a);
  if (it == model.alpha1.end())
    throw DataError("qubit " + gate_label(gate) + " not in noise model");
  return it->second;
}

double gate_duration(const NoiseModel& model, const GateId& gate) {
  auto it = model.duration_ns.find({gate.a, gate.b});
  if (it == model.duration_ns.end())
    throw DataError("gate " + gate_label(gate) + " has no duration");
  return it->second;
}

// coupler adjacency: some topology edge joins a qubit of one gate to a
// qubit of the other
bool gates_adjacent(const GateId& x, const GateId& y,
                    const topo::DeviceTopology& t) {
  int xq[2] = {x.a, x.b}, yq[2] = {y.a, y.b};
  for (int i = 0; i < x.weight(); ++i)
    for (int j = 0; j < y.weight(); ++j)
      if (t.has_edge(xq[i], yq[j])) return true;
  return false;
}

}  // namespace

double effective_alpha(const GateId& gate, RBMode mode,
                       const LayerContext& ctx, const NoiseModel& model,
                       const topo::DeviceTopology& t) {
  double alpha = model_alpha(model, gate);
  if (mode == RBMode::isolated) return alpha;

  // Single-qubit layers run at a common short duration; the barrier and
  // crosstalk mechanics act on the 2Q layers only.
  if (!gate.is_two_qubit()) return alpha;

  double dt = ctx.max_duration_ns - gate_duration(model, gate);
  if (dt < 0.0)
    throw DataError("layer duration shorter than gate " + gate_label(gate));
  double idle = std::exp(-(model.lambda.at(gate.a) + model.lambda.at(gate.b)) * dt);
  alpha *= idle;

  if (mode == RBMode::layered) {
    int k = 0;
    for (const auto& other : ctx.active) {
      if (other == gate) continue;
      if (gates_adjacent(gate, other, t)) ++k;
    }
    alpha *= std::pow(model.chi, k);
  }
  return alpha;
}

namespace {

uint32_t gate_key(const GateId& g) {
  if (g.is_two_qubit())
    return 0x40000000u | (static_cast<uint32_t>(g.a) << 14) |
           static_cast<uint32_t>(g.b);
  return 0x20000000u | static_cast<uint32_t>(g.a);
}

RBDecayData simulate_gate(const GateId& gate, double alpha_eff, RBMode mode,
                          const SimParams& params) {
  double b = gate.is_two_qubit() ? 0.25 : 0.5;
  double a = 1.0 - b;
  RBDecayData data;
  data.gate = gate;
  data.mode = mode;
  data.lengths.assign(params.lengths.begin(), params.lengths.end());
  data.shots = params.shots;
  data.seed = params.seed;
  data.samples.assign(params.randomizations,
                      std::vector<double>(params.lengths.size(), 0.0));
  for (int r = 0; r < params.randomizations; ++r) {
    for (size_t xi = 0; xi < params.lengths.size(); ++xi) {
      double p = a * std::pow(alpha_eff, params.lengths[xi]) + b;
      if (!(p >= 0.0 && p <= 1.0))
        throw NumericError("survival probability " + std::to_string(p) +
                           " outside [0, 1] for gate " + gate_label(gate));
      uint64_t stream = (static_cast<uint64_t>(gate_key(gate)) << 32) |
                        (static_cast<uint64_t>(r) << 16) |
                        static_cast<uint64_t>(xi);
      KeyedStream rng(params.seed, stream);
      data.samples[r][xi] =
          static_cast<double>(rng.binomial(params.shots, p)) / params.shots;
    }
  }
  return data;
}

}  // namespace

std::vector<RBDecayData> simulate_direct_rb(const topo::DeviceTopology& t,
                                            const chains::Chain& chain,
                                            RBMode mode,
                                            const NoiseModel& model,
                                            const SimParams& params,
                                            int threads) {
  const auto& qs = chain.qubits();
  if (qs.size() < 2) throw DataError("chain must have at least 2 qubits");
  if (params.lengths.empty()) throw DataError("no Clifford lengths given");
  for (size_t i = 0; i + 1 < params.lengths.size(); ++i)
    if (params.lengths[i] >= params.lengths[i + 1])
      throw DataError("Clifford lengths must be strictly increasing");
  if (params.shots <= 0) throw DataError("shots must be positive");
  if (params.randomizations <= 0)
    throw DataError("randomizations must be positive");

  // disjoint layers: couplers at even chain offsets, then odd offsets
  LayerContext even_ctx, odd_ctx;
  for (size_t i = 0; i + 1 < qs.size(); ++i) {
    GateId g = GateId::two_qubit(qs[i], qs[i + 1]);
    (i % 2 == 0 ? even_ctx : odd_ctx).active.push_back(g);
  }
  for (auto* ctx : {&even_ctx, &odd_ctx})
    for (const auto& g : ctx->active)
      ctx->max_duration_ns =
          std::max(ctx->max_duration_ns, gate_duration(model, g));

  struct Job {
    GateId gate;
    const LayerContext* ctx;
  };
  std::vector<Job> jobs;
  for (size_t i = 0; i + 1 < qs.size(); ++i)
    jobs.push_back({GateId::two_qubit(qs[i], qs[i + 1]),
                    i % 2 == 0 ? &even_ctx : &odd_ctx});
  for (int q : qs) jobs.push_back({GateId::one_qubit(q), &even_ctx});

  std::vector<RBDecayData> out(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), threads, [&](int i) {
    double alpha_eff =
        effective_alpha(jobs[i].gate, mode, *jobs[i].ctx, model, t);
    out[i] = simulate_gate(jobs[i].gate, alpha_eff, mode, params);
  });
  return out;
}

NoiseModel apply_event(const NoiseModel& model, const DegradationEvent& event,
                       int day) {
  if (event.end_day < event.start_day)
    throw DataError("degradation event interval is empty");
  if (!(event.factor > 0.0 && event.factor <= 1.0))
    throw DataError("degradation factor must be in (0, 1]");
  NoiseModel result = model;
  if (day < event.start_day || day > event.end_day) return result;
  for (const auto& e : event.edges) {
    auto it = result.alpha2.find(e);
    if (it == result.alpha2.end())
      throw DataError("event references edge " + std::to_string(e.first) +
                      "-" + std::to_string(e.second) + " not in the model");
    it->second *= event.factor;
  }
  for (int q : event.qubits) {
    auto it = result.alpha1.find(q);
    if (it == result.alpha1.end())
      throw DataError("event references qubit " + std::to_string(q) +
                      " not in the model");
    it->second *= event.factor;
  }
  return result;
}

namespace {

// Per-gate fitted process errors for a batch of decays.
struct MeasuredErrors {
  std::map<topo::Edge, std::vector<double>> twoq;
  std::map<int, std::vector<double>> oneq;
};

void accumulate_errors(const std::vector<RBDecayData>& decays,
                       MeasuredErrors* acc, int threads) {
  std::vector<double> errors = fit::fitted_errors(decays, {}, threads);
  for (size_t i = 0; i < decays.size(); ++i) {
    const GateId& g = decays[i].gate;
    if (g.is_two_qubit())
      acc->twoq[{g.a, g.b}].push_back(errors[i]);
    else
      acc->oneq[g.a].push_back(errors[i]);
  }
}

chains::GateErrorTable table_from_measured(
    const MeasuredErrors& acc, const NoiseModel& model,
    chains::GateErrorTable::Provenance prov) {
  chains::GateErrorTable table;
  table.provenance = prov;
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  for (const auto& [e, vals] : acc.twoq) table.twoq_error[e] = mean(vals);
  for (const auto& [q, vals] : acc.oneq) table.oneq_error[q] = mean(vals);
  table.duration_ns = model.duration_ns;
  return table;
}

}  // namespace

chains::GateErrorTable grid_measurement(const topo::DeviceTopology& t,
                                        const chains::GridFamilies& grids,
                                        const NoiseModel& model,
                                        const SimParams& params,
                                        int threads) {
  validate_model(model, t);
  MeasuredErrors acc;
  int chain_ordinal = 0;
  for (const auto* family : {&grids.horizontal, &grids.vertical}) {
    for (const auto& chain : *family) {
      SimParams chain_params = params;
      chain_params.seed = derive_seed(params.seed, chain_ordinal++);
      auto decays = simulate_direct_rb(t, chain, RBMode::layered, model,
                                       chain_params, threads);
      accumulate_errors(decays, &acc, threads);
    }
  }
  // every coupler must have been exercised by the grid
  for (const auto& e : t.edges())
    if (!acc.twoq.count(e))
      throw DataError("grid measurement left edge " +
                      std::to_string(e.first) + "-" +
                      std::to_string(e.second) + " uncovered");
  return table_from_measured(acc, model,
                             chains::GateErrorTable::Provenance::grid);
}

std::vector<std::vector<GateId>> isolated_batches(
    const topo::DeviceTopology& t) {
  // pairwise BFS distances once; graphs here are small
  int n = t.qubit_count();
  std::vector<std::vector<int>> dist(n, std::vector<int>(n, -1));
  for (int s = 0; s < n; ++s) {
    std::deque<int> queue{s};
    dist[s][s] = 0;
    while (!queue.empty()) {
      int v = queue.front();
      queue.pop_front();
      for (int u : t.adjacent(v))
        if (dist[s][u] < 0) {
          dist[s][u] = dist[s][v] + 1;
          queue.push_back(u);
        }
    }
  }
  auto gate_distance = [&](const GateId& x, const GateId& y) {
    int best = -1;
    int xq[2] = {x.a, x.b}, yq[2] = {y.a, y.b};
    for (int i = 0; i < x.weight(); ++i)
      for (int j = 0; j < y.weight(); ++j) {
        int d = dist[xq[i]][yq[j]];
        if (d >= 0 && (best < 0 || d < best)) best = d;
      }
    return best;
  };

  // two idle qubits between simultaneously driven pairs => distance >= 3
  constexpr int kMinDistance = 3;
  std::vector<std::vector<GateId>> batches;
  for (const auto& e : t.edges()) {
    GateId g = GateId::two_qubit(e.first, e.second);
    bool placed = false;
    for (auto& batch : batches) {
      bool ok = true;
      for (const auto& other : batch) {
        int d = gate_distance(g, other);
        if (d >= 0 && d < kMinDistance) {
          ok = false;
          break;
        }
      }
      if (ok) {
        batch.push_back(g);
        placed = true;
        break;
      }
    }
    if (!placed) batches.push_back({g});
  }
  return batches;
}

chains::GateErrorTable isolated_measurement(const topo::DeviceTopology& t,
                                            const NoiseModel& model,
                                            const SimParams& params,
                                            int threads) {
  validate_model(model, t);
  auto batches = isolated_batches(t);
  MeasuredErrors acc;
  LayerContext empty_ctx;

  int batch_ordinal = 0;
  for (const auto& batch : batches) {
    SimParams batch_params = params;
    batch_params.seed = derive_seed(params.seed, batch_ordinal++);
    std::vector<RBDecayData> decays(batch.size());
    parallel_for(static_cast<int>(batch.size()), threads, [&](int i) {
      double alpha_eff =
          effective_alpha(batch[i], RBMode::isolated, empty_ctx, model, t);
      decays[i] = simulate_gate(batch[i], alpha_eff, RBMode::isolated,
                                batch_params);
    });
    accumulate_errors(decays, &acc, threads);
  }

  // single-qubit decays, one sweep
  SimParams oneq_params = params;
  oneq_params.seed = derive_seed(params.seed, 1u << 20);
  std::vector<RBDecayData> oneq_decays(t.qubit_count());
  parallel_for(t.qubit_count(), threads, [&](int q) {
    GateId g = GateId::one_qubit(q);
    double alpha_eff =
        effective_alpha(g, RBMode::isolated, empty_ctx, model, t);
    oneq_decays[q] = simulate_gate(g, alpha_eff, RBMode::isolated,
                                   oneq_params);
  });
  accumulate_errors(oneq_decays, &acc, threads);

  return table_from_measured(acc, model,
                             chains::GateErrorTable::Provenance::isolated);
}

namespace {

std::map<int, double> parse_qubit_map(const nlohmann::json& node,
                                      const topo::DeviceTopology& t,
                                      const char* what) {
  std::map<int, double> out;
  double default_value = 0.0;
  bool has_default = false;
  if (node.is_number()) {
    default_value = node.get<double>();
    has_default = true;
  } else if (node.is_object()) {
    for (auto& [key, value] : node.items()) {
      if (key == "default") {
        default_value = value.get<double>();
        has_default = true;
      } else {
        int q = std::stoi(key);
        if (q < 0 || q >= t.qubit_count())
          throw DataError(std::string(what) + " references unknown qubit " +
                          key);
        out[q] = value.get<double>();
      }
    }
  } else {
    throw DataError(std::string(what) + " must be a number or an object");
  }
  if (has_default)
    for (int q = 0; q < t.qubit_count(); ++q)
      if (!out.count(q)) out[q] = default_value;
  return out;
}

std::map<topo::Edge, double> parse_edge_map(const nlohmann::json& node,
                                            const topo::DeviceTopology& t,
                                            const char* what) {
  std::map<topo::Edge, double> out;
  double default_value = 0.0;
  bool has_default = false;
  if (node.is_number()) {
    default_value = node.get<double>();
    has_default = true;
  } else if (node.is_object()) {
    for (auto& [key, value] : node.items()) {
      if (key == "default") {
        default_value = value.get<double>();
        has_default = true;
      } else {
        auto dash = key.find('-');
        if (dash == std::string::npos)
          throw DataError(std::string(what) + " key '" + key +
                          "' is not of the form a-b");
        topo::Edge e = topo::make_edge(std::stoi(key.substr(0, dash)),
                                       std::stoi(key.substr(dash + 1)));
        if (!t.has_edge(e.first, e.second))
          throw DataError(std::string(what) + " references unknown edge " +
                          key);
        out[e] = value.get<double>();
      }
    }
  } else {
    throw DataError(std::string(what) + " must be a number or an object");
  }
  if (has_default)
    for (const auto& e : t.edges())
      if (!out.count(e)) out[e] = default_value;
  return out;
}

}  // namespace

Scenario parse_scenario_json(std::string_view text,
                             const topo::DeviceTopology& t) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("scenario JSON: ") + e.what());
  }
  if (!doc.contains("model")) throw DataError("scenario has no model section");
  const auto& m = doc["model"];

  Scenario scenario;
  scenario.model.alpha1 = parse_qubit_map(m.value("alpha1", nlohmann::json(1.0)), t, "alpha1");
  scenario.model.lambda = parse_qubit_map(m.value("lambda", nlohmann::json(0.0)), t, "lambda");
  scenario.model.alpha2 = parse_edge_map(m.value("alpha2", nlohmann::json(1.0)), t, "alpha2");
  scenario.model.duration_ns =
      parse_edge_map(m.value("durations", nlohmann::json(1.0)), t, "durations");
  scenario.model.chi = m.value("chi", 1.0);
  validate_model(scenario.model, t);

  for (const auto& ev : doc.value("events", nlohmann::json::array())) {
    DegradationEvent event;
    event.start_day = ev.at("start_day").get<int>();
    event.end_day = ev.at("end_day").get<int>();
    event.factor = ev.at("factor").get<double>();
    for (const auto& q : ev.value("qubits", nlohmann::json::array()))
      event.qubits.push_back(q.get<int>());
    for (const auto& key : ev.value("edges", nlohmann::json::array())) {
      std::string s = key.get<std::string>();
      auto dash = s.find('-');
      if (dash == std::string::npos)
        throw DataError("event edge '" + s + "' is not of the form a-b");
      event.edges.push_back(topo::make_edge(std::stoi(s.substr(0, dash)),
                                            std::stoi(s.substr(dash + 1))));
    }
    scenario.events.push_back(std::move(event));
  }

  if (doc.contains("sim")) {
    const auto& sim = doc["sim"];
    if (sim.contains("lengths"))
      scenario.sim.lengths = sim["lengths"].get<std::vector<int>>();
    scenario.sim.randomizations =
        sim.value("randomizations", scenario.sim.randomizations);
    scenario.sim.shots = sim.value("shots", scenario.sim.shots);
    scenario.sim.seed = sim.value("seed", scenario.sim.seed);
  }
  return scenario;
}

Scenario load_scenario_file(const std::string& path,
                            const topo::DeviceTopology& t) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scenario file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario_json(buf.str(), t);
}

}  // namespace lfb::rbsim

#include "locklab/graph.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace locklab {

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v{"in_degree", "out_degree", "to_pi", "to_ki",
                               "to_po"};
    for (int t = 0; t < kNumRealGateTypes; ++t) {
      std::string n = gate_type_name(GateType(t));
      for (auto& c : n) c = char(std::tolower((unsigned char)c));
      v.push_back("n2_" + n);
    }
    return v;
  }();
  return names;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

namespace {

// Gate-to-gate undirected adjacency, deduplicated, sorted.
std::vector<std::vector<int>> gate_adjacency(const Netlist& n) {
  std::vector<std::set<int>> adj(n.gates().size());
  for (const Gate& g : n.gates())
    for (SignalRef ref : g.fanin)
      if (ref.is_gate()) {
        adj[g.id].insert(ref.index);
        adj[ref.index].insert(g.id);
      }
  std::vector<std::vector<int>> out(adj.size());
  for (size_t i = 0; i < adj.size(); ++i)
    out[i].assign(adj[i].begin(), adj[i].end());
  return out;
}

std::array<float, kNumNodeFeatures> node_features(
    const Netlist& n, int gate_id, const std::vector<std::vector<int>>& adj) {
  std::array<float, kNumNodeFeatures> f{};
  const Gate& g = n.gate(gate_id);
  SignalRef ref{SignalRef::Kind::Gate, gate_id};
  f[0] = float(g.fanin.size());
  f[1] = float(n.loads(ref).size() + n.po_load_count(ref));
  for (SignalRef in : g.fanin) {
    if (in.kind == SignalRef::Kind::Pi) f[2] = 1.0f;
    if (in.kind == SignalRef::Kind::Ki) f[3] = 1.0f;
  }
  f[4] = n.po_load_count(ref) > 0 ? 1.0f : 0.0f;

  // Nodes within one or two hops, counted once each, self excluded.
  std::vector<char> seen(n.gates().size(), 0);
  for (int v : adj[gate_id]) {
    seen[v] = 1;
    for (int w : adj[v]) seen[w] = 1;
  }
  seen[gate_id] = 0;
  for (size_t v = 0; v < seen.size(); ++v)
    if (seen[v]) f[5 + int(n.gate(int(v)).type)] += 1.0f;
  return f;
}

}  // namespace

std::array<float, kNumNodeFeatures> extract_features(const Netlist& n,
                                                     int gate_id) {
  if (gate_id < 0 || gate_id >= int(n.gates().size()))
    throw NetlistError("extract_features: no gate with id " +
                       std::to_string(gate_id));
  return node_features(n, gate_id, gate_adjacency(n));
}

CircuitGraph encode(const Netlist& n, const GroundTruthLabels* labels,
                    std::string design, std::string instance) {
  CircuitGraph g;
  g.design = design.empty() ? n.name() : std::move(design);
  g.instance = std::move(instance);
  for (const Gate& gate : n.gates()) g.node_names.push_back(gate.name);

  auto adj = gate_adjacency(n);
  for (int u = 0; u < int(adj.size()); ++u)
    for (int v : adj[u])
      if (u < v) g.edges.emplace_back(u, v);

  int nodes = g.num_nodes();
  g.features.resize(size_t(nodes) * kNumNodeFeatures);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < nodes; ++i) {
    auto f = node_features(n, i, adj);
    std::copy(f.begin(), f.end(),
              g.features.begin() + size_t(i) * kNumNodeFeatures);
  }

  if (labels) {
    g.labels.reserve(nodes);
    for (const Gate& gate : n.gates()) {
      auto it = labels->find(gate.name);
      if (it == labels->end())
        throw NetlistError("no ground-truth label for gate '" + gate.name +
                           "'");
      g.labels.push_back(int(it->second));
    }
  }
  return g;
}

int Dataset::class_index(int gate_class) const {
  const char* want = gate_class_name(GateClass(gate_class));
  for (size_t i = 0; i < class_names.size(); ++i)
    if (class_names[i] == want) return int(i);
  return -1;
}

Dataset batch(std::vector<CircuitGraph> graphs) {
  Dataset ds;
  ds.node_offset.push_back(0);
  std::array<bool, 4> present{};
  for (auto& g : graphs) {
    if (g.features.size() != size_t(g.num_nodes()) * kNumNodeFeatures)
      throw NetlistError("feature matrix shape mismatch in graph '" +
                         g.instance + "'");
    if (g.has_labels() && int(g.labels.size()) != g.num_nodes())
      throw NetlistError("label count mismatch in graph '" + g.instance + "'");
    for (int c : g.labels) present.at(size_t(c)) = true;
    ds.node_offset.push_back(ds.node_offset.back() + g.num_nodes());
  }
  for (int c = 0; c < 4; ++c)
    if (present[c]) ds.class_names.push_back(gate_class_name(GateClass(c)));
  ds.splits.assign(graphs.size(), Split::Train);
  ds.graphs = std::move(graphs);
  return ds;
}

void split_loo(Dataset& ds, const std::string& test_design,
               const std::string& val_design) {
  if (test_design == val_design)
    throw NetlistError("test and validation design must differ");
  bool saw_test = false, saw_val = false;
  int train = 0;
  for (size_t i = 0; i < ds.graphs.size(); ++i) {
    const std::string& d = ds.graphs[i].design;
    if (d == test_design) {
      ds.splits[i] = Split::Test;
      saw_test = true;
    } else if (d == val_design) {
      ds.splits[i] = Split::Val;
      saw_val = true;
    } else {
      ds.splits[i] = Split::Train;
      ++train;
    }
  }
  if (!saw_test)
    throw NetlistError("no graphs for test design '" + test_design + "'");
  if (!saw_val)
    throw NetlistError("no graphs for validation design '" + val_design + "'");
  if (train == 0) throw NetlistError("splitting left no training graphs");
}

void save_dataset(const std::string& dir, const Dataset& ds) {
  fs::create_directories(dir);

  json top;
  top["num_features"] = kNumNodeFeatures;
  top["feature_names"] = feature_names();
  top["class_names"] = ds.class_names;
  top["node_offset"] = ds.node_offset;
  top["graphs"] = json::array();
  for (const auto& g : ds.graphs) {
    json jg;
    jg["design"] = g.design;
    jg["instance"] = g.instance;
    jg["num_nodes"] = g.num_nodes();
    jg["node_names"] = g.node_names;
    json edges = json::array();
    for (auto [u, v] : g.edges) edges.push_back({u, v});
    jg["edges"] = std::move(edges);
    top["graphs"].push_back(std::move(jg));
  }
  std::ofstream(dir + "/graphs.json") << top.dump(2) << "\n";

  std::ofstream fcsv(dir + "/features.csv");
  const auto& names = feature_names();
  for (size_t i = 0; i < names.size(); ++i)
    fcsv << (i ? "," : "") << names[i];
  fcsv << "\n";
  for (const auto& g : ds.graphs)
    for (int node = 0; node < g.num_nodes(); ++node) {
      const float* row = g.feature_row(node);
      for (int j = 0; j < kNumNodeFeatures; ++j)
        fcsv << (j ? "," : "") << (long long)(row[j]);
      fcsv << "\n";
    }

  std::ofstream lcsv(dir + "/labels.csv");
  lcsv << "label\n";
  for (const auto& g : ds.graphs)
    for (int node = 0; node < g.num_nodes(); ++node)
      lcsv << (g.has_labels() ? ds.class_index(g.labels[node]) : -1) << "\n";

  json sp;
  sp["train"] = json::array();
  sp["val"] = json::array();
  sp["test"] = json::array();
  for (size_t i = 0; i < ds.splits.size(); ++i)
    sp[split_name(ds.splits[i])].push_back(i);
  std::ofstream(dir + "/splits.json") << sp.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
  auto fail = [&](const std::string& what) -> NetlistError {
    return NetlistError("dataset at '" + dir + "': " + what);
  };
  std::ifstream gj(dir + "/graphs.json");
  if (!gj) throw fail("missing graphs.json");
  json top = json::parse(gj, nullptr, false);
  if (top.is_discarded()) throw fail("graphs.json is not valid JSON");
  if (top.value("num_features", -1) != kNumNodeFeatures)
    throw fail("unsupported feature schema");

  Dataset ds;
  ds.class_names = top.at("class_names").get<std::vector<std::string>>();
  ds.node_offset = top.at("node_offset").get<std::vector<int>>();
  for (const auto& jg : top.at("graphs")) {
    CircuitGraph g;
    g.design = jg.at("design").get<std::string>();
    g.instance = jg.at("instance").get<std::string>();
    g.node_names = jg.at("node_names").get<std::vector<std::string>>();
    for (const auto& e : jg.at("edges"))
      g.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    ds.graphs.push_back(std::move(g));
  }

  std::ifstream fcsv(dir + "/features.csv");
  if (!fcsv) throw fail("missing features.csv");
  std::string line;
  std::getline(fcsv, line);  // header
  for (auto& g : ds.graphs) {
    g.features.resize(size_t(g.num_nodes()) * kNumNodeFeatures);
    for (int node = 0; node < g.num_nodes(); ++node) {
      if (!std::getline(fcsv, line)) throw fail("features.csv is truncated");
      std::stringstream ss(line);
      std::string cell;
      for (int j = 0; j < kNumNodeFeatures; ++j) {
        if (!std::getline(ss, cell, ',')) throw fail("short feature row");
        g.features[size_t(node) * kNumNodeFeatures + j] =
            std::strtof(cell.c_str(), nullptr);
      }
    }
  }

  std::ifstream lcsv(dir + "/labels.csv");
  if (!lcsv) throw fail("missing labels.csv");
  std::getline(lcsv, line);  // header
  for (auto& g : ds.graphs) {
    std::vector<int> raw;
    for (int node = 0; node < g.num_nodes(); ++node) {
      if (!std::getline(lcsv, line)) throw fail("labels.csv is truncated");
      int idx = std::stoi(line);
      if (idx >= 0) {
        if (idx >= int(ds.class_names.size())) throw fail("label out of range");
        auto cls = gate_class_from_name(ds.class_names[size_t(idx)]);
        if (!cls) throw fail("unknown class name");
        raw.push_back(int(*cls));
      } else {
        raw.push_back(-1);
      }
    }
    bool none = std::all_of(raw.begin(), raw.end(),
                            [](int v) { return v < 0; });
    if (!none) {
      if (std::any_of(raw.begin(), raw.end(), [](int v) { return v < 0; }))
        throw fail("graph '" + g.instance + "' is only partially labelled");
      g.labels = std::move(raw);
    }
  }

  std::ifstream sj(dir + "/splits.json");
  if (!sj) throw fail("missing splits.json");
  json sp = json::parse(sj, nullptr, false);
  if (sp.is_discarded()) throw fail("splits.json is not valid JSON");
  ds.splits.assign(ds.graphs.size(), Split::Train);
  auto apply = [&](const char* key, Split s) {
    for (const auto& idx : sp.at(key)) {
      int i = idx.get<int>();
      if (i < 0 || i >= int(ds.graphs.size()))
        throw fail("split index out of range");
      ds.splits[size_t(i)] = s;
    }
  };
  apply("train", Split::Train);
  apply("val", Split::Val);
  apply("test", Split::Test);
  return ds;
}

}  // namespace locklab

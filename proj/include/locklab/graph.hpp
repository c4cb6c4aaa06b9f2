#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "locklab/locking.hpp"
#include "locklab/netlist.hpp"

namespace locklab {

// Per-node feature layout: degrees, direct-connection flags, then one
// two-hop neighbor count per gate type in GateType order. The order is part
// of the on-disk format; see feature_names().
inline constexpr int kNumNodeFeatures = kNumRealGateTypes + 5;

const std::vector<std::string>& feature_names();

// Undirected gate-connectivity graph of one locked netlist. Nodes are gates
// only; PIs, KIs and POs show up solely through features.
struct CircuitGraph {
  std::string design;    // benchmark design the instance came from
  std::string instance;  // free-form provenance id, e.g. "antisat/c17/8_0_1"
  std::vector<std::string> node_names;        // gate name per node id
  std::vector<std::pair<int, int>> edges;     // u < v, sorted, unique
  std::vector<float> features;                // row-major, 13 per node
  std::vector<int> labels;                    // GateClass per node, or empty

  int num_nodes() const { return int(node_names.size()); }
  bool has_labels() const { return !labels.empty(); }
  const float* feature_row(int node) const {
    return features.data() + size_t(node) * kNumNodeFeatures;
  }
};

// in_degree, out_degree (gate loads plus PO references), to_pi/to_ki/to_po
// direct-connection flags, and two-hop neighbor counts per type (set
// semantics, self excluded).
std::array<float, kNumNodeFeatures> extract_features(const Netlist& n,
                                                     int gate_id);

CircuitGraph encode(const Netlist& n, const GroundTruthLabels* labels = nullptr,
                    std::string design = "", std::string instance = "");

enum class Split : std::uint8_t { Train, Val, Test };
const char* split_name(Split s);  // "train", "val", "test"

// Multiple circuit graphs stacked into one block-diagonal graph. Per-graph
// boundaries are kept; global node ids are graph-local ids plus the offset.
struct Dataset {
  std::vector<CircuitGraph> graphs;
  std::vector<int> node_offset;          // size graphs+1, starts at 0
  std::vector<Split> splits;             // per graph, defaults to Train
  std::vector<std::string> class_names;  // label legend, GateClass order

  int total_nodes() const {
    return node_offset.empty() ? 0 : node_offset.back();
  }
  // Dataset-local class index for a raw GateClass value, -1 if absent.
  int class_index(int gate_class) const;
};

Dataset batch(std::vector<CircuitGraph> graphs);

// Leave-one-design-out: every graph of test_design goes to TEST, of
// val_design to VAL, everything else to TRAIN. At least one graph must
// remain in TRAIN.
void split_loo(Dataset& ds, const std::string& test_design,
               const std::string& val_design);

// Directory layout: graphs.json, features.csv, labels.csv, splits.json.
// All node, graph and class indices are 0-based; the float features are
// small integers, so the round trip is exact.
void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);

}  // namespace locklab

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "locklab/graph.hpp"
#include "locklab/kernels.hpp"
#include "locklab/rng.hpp"

namespace locklab {

struct GnnDims {
  int features = kNumNodeFeatures;
  int hidden = 512;  // Table-style default; tests shrink it via config
  int classes = 2;
  bool operator==(const GnnDims&) const = default;
};

// Two-layer mean-aggregation model with concatenation: hidden layers map
// [self, neighbor-mean] (2*hidden columns) back to hidden.
struct ModelParams {
  GnnDims dims;
  std::vector<double> w_in, b_in;    // [features x hidden], [hidden]
  std::vector<double> w_h1, b_h1;    // [2*hidden x hidden], [hidden]
  std::vector<double> w_h2, b_h2;    // [2*hidden x hidden], [hidden]
  std::vector<double> w_out, b_out;  // [hidden x classes], [classes]
};

// The parameter blocks in a fixed order, for optimizers and checkpoints.
std::array<std::vector<double> ModelParams::*, 8> param_blocks();
const char* param_block_name(int index);

// Weights are uniform in +-1/sqrt(fan-in), biases zero; same seed, same
// params.
ModelParams init_params(const GnnDims& dims, std::uint64_t seed);

struct TrainConfig {
  double learning_rate = 0.01;
  double dropout = 0.1;
  int max_epochs = 2000;
  int patience = 200;  // stop after this many epochs without VAL improvement
  int walk_length = 2;
  int num_roots = 3000;  // clamped to the number of training nodes
  int hidden = 512;
  bool class_weights = false;  // inverse-frequency cross-entropy weights
  std::uint64_t seed = 0;
};

// One split of a Dataset flattened into a single block-diagonal graph.
struct FlatGraph {
  int num_nodes = 0;
  kernels::Csr adj;
  std::vector<double> x;                       // row-major node features
  std::vector<int> label;                      // dataset class index, -1 none
  std::vector<std::pair<int, int>> origin;     // (dataset graph idx, local id)
};

FlatGraph flatten(const Dataset& ds, Split which);

struct SampledSubgraph {
  std::vector<int> nodes;  // parent ids, sorted unique
  kernels::Csr adj;        // induced edges over local indices
};

// Random-walk sampler: min(num_roots, n) uniform roots, each walked
// walk_length uniform-neighbor steps (stopping early at isolated nodes);
// returns the subgraph induced by every visited node.
SampledSubgraph sample_subgraph(const FlatGraph& g, int num_roots,
                                int walk_length, Rng& rng);

// Softmax probabilities, row per node. Dropout (inverted scaling) hits the
// three hidden activation blocks only, with masks replayed from seed.
std::vector<double> forward(const ModelParams& p, const kernels::Csr& adj,
                            const std::vector<double>& x, int num_nodes,
                            double dropout_rate = 0.0, std::uint64_t seed = 0);

// Mean cross-entropy over nodes with label >= 0 (optionally class-weighted)
// and its gradient in *grads. Throws when no node is labeled.
double loss_and_grads(const ModelParams& p, const kernels::Csr& adj,
                      const std::vector<double>& x, int num_nodes,
                      const std::vector<int>& labels,
                      const std::vector<double>* class_weight,
                      double dropout_rate, std::uint64_t seed,
                      ModelParams* grads);

struct AdamState {
  ModelParams m, v;  // first/second moment estimates, zero-initialized
  int step = 0;
};

void adam_update(ModelParams& p, const ModelParams& grads, AdamState& st,
                 double lr);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  ModelParams best;
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_val_accuracy = 0.0;
};

// Epoch loop: sample a training subgraph, one Adam step on its labeled
// nodes, then full-graph validation accuracy. Keeps the params of the best
// validation epoch (ties resolve to the earlier one). TEST graphs are never
// touched.
TrainResult train(const Dataset& ds, const TrainConfig& cfg);

struct Prediction {
  int cls = 0;
  double confidence = 0.0;  // probability of cls
};

// Argmax of forward() without dropout; ties break to the lowest class index.
std::vector<Prediction> predict(const ModelParams& p, const kernels::Csr& adj,
                                const std::vector<double>& x, int num_nodes);

struct Metrics {
  int evaluated = 0;
  double accuracy = 0.0;
  std::vector<std::vector<int>> confusion;  // [gold][pred]
  std::vector<double> precision, recall, f1;  // per class, 0/0 -> 0
  std::vector<int> misclassified;             // node indices, ascending
};

// Nodes with label < 0 are skipped. Throws on size mismatch.
Metrics evaluate(const std::vector<Prediction>& preds,
                 const std::vector<int>& labels, int num_classes);

// JSON checkpoint: schema version, dims, class legend, row-major weights,
// the train config and seed. Doubles round-trip exactly.
struct Checkpoint {
  ModelParams params;
  std::vector<std::string> class_names;
  TrainConfig config;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// CSV: epoch,train_loss,val_accuracy
void save_history(const std::string& path,
                  const std::vector<EpochStats>& history);

}  // namespace locklab

#include "locklab/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "json.hpp"

using nlohmann::json;

namespace locklab {

std::array<std::vector<double> ModelParams::*, 8> param_blocks() {
  return {&ModelParams::w_in,  &ModelParams::b_in,  &ModelParams::w_h1,
          &ModelParams::b_h1,  &ModelParams::w_h2,  &ModelParams::b_h2,
          &ModelParams::w_out, &ModelParams::b_out};
}

const char* param_block_name(int index) {
  static const char* names[] = {"w_in", "b_in", "w_h1", "b_h1",
                                "w_h2", "b_h2", "w_out", "b_out"};
  return names[index];
}

namespace {

void shape_params(ModelParams& p, const GnnDims& d) {
  p.dims = d;
  p.w_in.assign(size_t(d.features) * d.hidden, 0.0);
  p.b_in.assign(size_t(d.hidden), 0.0);
  p.w_h1.assign(size_t(2 * d.hidden) * d.hidden, 0.0);
  p.b_h1.assign(size_t(d.hidden), 0.0);
  p.w_h2.assign(size_t(2 * d.hidden) * d.hidden, 0.0);
  p.b_h2.assign(size_t(d.hidden), 0.0);
  p.w_out.assign(size_t(d.hidden) * d.classes, 0.0);
  p.b_out.assign(size_t(d.classes), 0.0);
}

}  // namespace

ModelParams init_params(const GnnDims& dims, std::uint64_t seed) {
  if (dims.features < 1 || dims.hidden < 1 || dims.classes < 1)
    throw NetlistError("model dimensions must be positive");
  ModelParams p;
  shape_params(p, dims);
  Rng rng(mix_seed(seed, 0x6E4E));
  auto fill = [&](std::vector<double>& w, int fanin) {
    double a = 1.0 / std::sqrt(double(fanin));
    for (double& x : w) x = rand_symmetric(rng, a);
  };
  fill(p.w_in, dims.features);
  fill(p.w_h1, 2 * dims.hidden);
  fill(p.w_h2, 2 * dims.hidden);
  fill(p.w_out, dims.hidden);
  return p;
}

namespace {

// Activations retained for the backward pass. hXd are the post-dropout
// copies that actually feed the next layer.
struct Acts {
  int n = 0;
  std::vector<double> h0, h0d, m1, c1;
  std::vector<double> h1, h1d, m2, c2;
  std::vector<double> h2, h2d, probs;
};

void concat_rows(const std::vector<double>& a, const std::vector<double>& b,
                 std::vector<double>& out, int n, int h) {
  out.resize(size_t(n) * 2 * h);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    std::memcpy(&out[size_t(i) * 2 * h], &a[size_t(i) * h],
                sizeof(double) * size_t(h));
    std::memcpy(&out[size_t(i) * 2 * h + h], &b[size_t(i) * h],
                sizeof(double) * size_t(h));
  }
}

void split_rows(const std::vector<double>& c, std::vector<double>& left,
                std::vector<double>& right, int n, int h) {
  left.resize(size_t(n) * h);
  right.resize(size_t(n) * h);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    std::memcpy(&left[size_t(i) * h], &c[size_t(i) * 2 * h],
                sizeof(double) * size_t(h));
    std::memcpy(&right[size_t(i) * h], &c[size_t(i) * 2 * h + h],
                sizeof(double) * size_t(h));
  }
}

void run_forward(const ModelParams& p, const kernels::Csr& adj,
                 const std::vector<double>& x, int n, double rate,
                 std::uint64_t seed, Acts& A) {
  const GnnDims& d = p.dims;
  if (int64_t(x.size()) != int64_t(n) * d.features)
    throw NetlistError("feature matrix does not match the model input size");
  if (adj.num_nodes() != n)
    throw NetlistError("adjacency node count mismatch");
  using namespace kernels;
  const int h = d.hidden;
  const std::int64_t nh = std::int64_t(n) * h;
  A.n = n;

  A.h0.resize(nh);
  matmul(x.data(), p.w_in.data(), A.h0.data(), n, d.features, h);
  add_bias(A.h0.data(), p.b_in.data(), n, h);
  relu(A.h0.data(), nh);
  A.h0d = A.h0;
  dropout(A.h0d.data(), nh, rate, mix_seed(seed, 11));

  A.m1.resize(nh);
  neighbor_mean(adj, A.h0d.data(), A.m1.data(), h);
  concat_rows(A.h0d, A.m1, A.c1, n, h);
  A.h1.resize(nh);
  matmul(A.c1.data(), p.w_h1.data(), A.h1.data(), n, 2 * h, h);
  add_bias(A.h1.data(), p.b_h1.data(), n, h);
  relu(A.h1.data(), nh);
  A.h1d = A.h1;
  dropout(A.h1d.data(), nh, rate, mix_seed(seed, 12));

  A.m2.resize(nh);
  neighbor_mean(adj, A.h1d.data(), A.m2.data(), h);
  concat_rows(A.h1d, A.m2, A.c2, n, h);
  A.h2.resize(nh);
  matmul(A.c2.data(), p.w_h2.data(), A.h2.data(), n, 2 * h, h);
  add_bias(A.h2.data(), p.b_h2.data(), n, h);
  relu(A.h2.data(), nh);
  A.h2d = A.h2;
  dropout(A.h2d.data(), nh, rate, mix_seed(seed, 13));

  A.probs.resize(size_t(n) * d.classes);
  matmul(A.h2d.data(), p.w_out.data(), A.probs.data(), n, h, d.classes);
  add_bias(A.probs.data(), p.b_out.data(), n, d.classes);
  softmax_rows(A.probs.data(), n, d.classes);
}

}  // namespace

std::vector<double> forward(const ModelParams& p, const kernels::Csr& adj,
                            const std::vector<double>& x, int num_nodes,
                            double dropout_rate, std::uint64_t seed) {
  Acts A;
  run_forward(p, adj, x, num_nodes, dropout_rate, seed, A);
  return std::move(A.probs);
}

double loss_and_grads(const ModelParams& p, const kernels::Csr& adj,
                      const std::vector<double>& x, int num_nodes,
                      const std::vector<int>& labels,
                      const std::vector<double>* class_weight,
                      double dropout_rate, std::uint64_t seed,
                      ModelParams* grads) {
  const GnnDims& d = p.dims;
  if (int(labels.size()) != num_nodes)
    throw NetlistError("label vector does not match the node count");
  Acts A;
  run_forward(p, adj, x, num_nodes, dropout_rate, seed, A);

  double total_weight = 0.0;
  for (int i = 0; i < num_nodes; ++i) {
    int y = labels[i];
    if (y < 0) continue;
    if (y >= d.classes) throw NetlistError("label out of range");
    total_weight += class_weight ? (*class_weight)[size_t(y)] : 1.0;
  }
  if (total_weight <= 0.0)
    throw NetlistError("no labeled nodes to compute a loss on");

  double loss = 0.0;
  std::vector<double> dlogits(size_t(num_nodes) * d.classes, 0.0);
  for (int i = 0; i < num_nodes; ++i) {
    int y = labels[i];
    if (y < 0) continue;
    double w = (class_weight ? (*class_weight)[size_t(y)] : 1.0);
    const double* prow = &A.probs[size_t(i) * d.classes];
    loss -= w * std::log(std::max(prow[y], 1e-300));
    double scale = w / total_weight;
    double* grow = &dlogits[size_t(i) * d.classes];
    for (int j = 0; j < d.classes; ++j)
      grow[j] = (prow[j] - (j == y ? 1.0 : 0.0)) * scale;
  }
  loss /= total_weight;
  if (!grads) return loss;

  using namespace kernels;
  const int h = d.hidden;
  const std::int64_t nh = std::int64_t(num_nodes) * h;
  shape_params(*grads, d);

  // output layer
  matmul_at(A.h2d.data(), dlogits.data(), grads->w_out.data(), num_nodes, h,
            d.classes);
  colsum(dlogits.data(), grads->b_out.data(), num_nodes, d.classes);
  std::vector<double> da2(nh);
  matmul_bt(dlogits.data(), p.w_out.data(), da2.data(), num_nodes, h,
            d.classes);
  dropout(da2.data(), nh, dropout_rate, mix_seed(seed, 13));
  relu_backward(da2.data(), A.h2.data(), nh);

  // hidden layer 2
  matmul_at(A.c2.data(), da2.data(), grads->w_h2.data(), num_nodes, 2 * h, h);
  colsum(da2.data(), grads->b_h2.data(), num_nodes, h);
  std::vector<double> dc2(size_t(num_nodes) * 2 * h);
  matmul_bt(da2.data(), p.w_h2.data(), dc2.data(), num_nodes, 2 * h, h);
  std::vector<double> da1, dm2;
  split_rows(dc2, da1, dm2, num_nodes, h);
  neighbor_mean_backward(adj, dm2.data(), da1.data(), h);
  dropout(da1.data(), nh, dropout_rate, mix_seed(seed, 12));
  relu_backward(da1.data(), A.h1.data(), nh);

  // hidden layer 1
  matmul_at(A.c1.data(), da1.data(), grads->w_h1.data(), num_nodes, 2 * h, h);
  colsum(da1.data(), grads->b_h1.data(), num_nodes, h);
  std::vector<double> dc1(size_t(num_nodes) * 2 * h);
  matmul_bt(da1.data(), p.w_h1.data(), dc1.data(), num_nodes, 2 * h, h);
  std::vector<double> da0, dm1;
  split_rows(dc1, da0, dm1, num_nodes, h);
  neighbor_mean_backward(adj, dm1.data(), da0.data(), h);
  dropout(da0.data(), nh, dropout_rate, mix_seed(seed, 11));
  relu_backward(da0.data(), A.h0.data(), nh);

  // input layer
  matmul_at(x.data(), da0.data(), grads->w_in.data(), num_nodes, d.features,
            h);
  colsum(da0.data(), grads->b_in.data(), num_nodes, h);
  return loss;
}

void adam_update(ModelParams& p, const ModelParams& grads, AdamState& st,
                 double lr) {
  if (st.step == 0) {
    shape_params(st.m, p.dims);
    shape_params(st.v, p.dims);
  }
  ++st.step;
  for (auto block : param_blocks()) {
    auto& pv = p.*block;
    const auto& gv = grads.*block;
    if (gv.size() != pv.size())
      throw NetlistError("gradient shape does not match the parameters");
    kernels::adam_step((p.*block).data(), gv.data(), (st.m.*block).data(),
                       (st.v.*block).data(), std::int64_t(pv.size()), st.step,
                       lr);
  }
}

FlatGraph flatten(const Dataset& ds, Split which) {
  FlatGraph fg;
  std::vector<std::pair<int, int>> edges;
  for (size_t gi = 0; gi < ds.graphs.size(); ++gi) {
    if (ds.splits[gi] != which) continue;
    const CircuitGraph& g = ds.graphs[gi];
    int base = fg.num_nodes;
    for (int i = 0; i < g.num_nodes(); ++i) {
      fg.origin.emplace_back(int(gi), i);
      const float* row = g.feature_row(i);
      for (int j = 0; j < kNumNodeFeatures; ++j) fg.x.push_back(double(row[j]));
      fg.label.push_back(g.has_labels() ? ds.class_index(g.labels[i]) : -1);
    }
    for (auto [u, v] : g.edges) edges.emplace_back(base + u, base + v);
    fg.num_nodes += g.num_nodes();
  }
  fg.adj = kernels::Csr::from_edges(fg.num_nodes, edges);
  return fg;
}

SampledSubgraph sample_subgraph(const FlatGraph& g, int num_roots,
                                int walk_length, Rng& rng) {
  if (g.num_nodes == 0) throw NetlistError("cannot sample an empty graph");
  int roots = std::min<std::int64_t>(num_roots, g.num_nodes);
  std::vector<char> in(size_t(g.num_nodes), 0);
  for (int r = 0; r < roots; ++r) {
    int v = int(rand_below(rng, std::uint64_t(g.num_nodes)));
    in[size_t(v)] = 1;
    for (int step = 0; step < walk_length; ++step) {
      int deg = g.adj.degree(v);
      if (deg == 0) break;
      v = g.adj.nbrs[size_t(g.adj.offs[v]) +
                     rand_below(rng, std::uint64_t(deg))];
      in[size_t(v)] = 1;
    }
  }
  SampledSubgraph sub;
  std::vector<int> local(size_t(g.num_nodes), -1);
  for (int v = 0; v < g.num_nodes; ++v)
    if (in[size_t(v)]) {
      local[size_t(v)] = int(sub.nodes.size());
      sub.nodes.push_back(v);
    }
  std::vector<std::pair<int, int>> edges;
  for (int v : sub.nodes)
    for (int e = g.adj.offs[v]; e < g.adj.offs[v + 1]; ++e) {
      int w = g.adj.nbrs[size_t(e)];
      if (w > v && in[size_t(w)])
        edges.emplace_back(local[size_t(v)], local[size_t(w)]);
    }
  sub.adj = kernels::Csr::from_edges(int(sub.nodes.size()), edges);
  return sub;
}

namespace {

double val_accuracy(const ModelParams& p, const FlatGraph& g) {
  auto preds = predict(p, g.adj, g.x, g.num_nodes);
  std::int64_t labeled = 0, correct = 0;
  for (int i = 0; i < g.num_nodes; ++i) {
    if (g.label[i] < 0) continue;
    ++labeled;
    correct += preds[size_t(i)].cls == g.label[i];
  }
  return labeled ? double(correct) / double(labeled) : 0.0;
}

}  // namespace

TrainResult train(const Dataset& ds, const TrainConfig& cfg) {
  if (cfg.learning_rate <= 0.0) throw NetlistError("learning rate must be positive");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
    throw NetlistError("dropout must be in [0, 1)");
  if (cfg.num_roots < 1) throw NetlistError("need at least one walk root");
  int classes = int(ds.class_names.size());
  if (classes < 2) throw NetlistError("dataset has fewer than two classes");

  FlatGraph gtrain = flatten(ds, Split::Train);
  FlatGraph gval = flatten(ds, Split::Val);
  std::int64_t train_labeled = 0, val_labeled = 0;
  std::vector<std::int64_t> class_count(size_t(classes), 0);
  for (int l : gtrain.label)
    if (l >= 0) {
      ++train_labeled;
      ++class_count[size_t(l)];
    }
  for (int l : gval.label) val_labeled += l >= 0;
  if (train_labeled == 0) throw NetlistError("no labeled training nodes");
  if (val_labeled == 0) throw NetlistError("no labeled validation nodes");

  std::vector<double> weights;
  if (cfg.class_weights) {
    weights.resize(size_t(classes));
    for (int c = 0; c < classes; ++c)
      weights[size_t(c)] =
          class_count[size_t(c)]
              ? double(train_labeled) / (double(classes) * class_count[c])
              : 0.0;
  }

  GnnDims dims{kNumNodeFeatures, cfg.hidden, classes};
  ModelParams params = init_params(dims, mix_seed(cfg.seed, 1));
  AdamState adam;
  ModelParams grads;

  TrainResult res;
  res.best = params;
  res.best_val_accuracy = -1.0;
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng walk_rng(mix_seed(cfg.seed, 0xE0000 + std::uint64_t(epoch)));
    SampledSubgraph sub =
        sample_subgraph(gtrain, cfg.num_roots, cfg.walk_length, walk_rng);
    int n = int(sub.nodes.size());
    std::vector<double> xsub(size_t(n) * kNumNodeFeatures);
    std::vector<int> lsub(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      std::memcpy(&xsub[size_t(i) * kNumNodeFeatures],
                  &gtrain.x[size_t(sub.nodes[i]) * kNumNodeFeatures],
                  sizeof(double) * kNumNodeFeatures);
      lsub[size_t(i)] = gtrain.label[size_t(sub.nodes[i])];
    }

    double loss = loss_and_grads(
        params, sub.adj, xsub, n, lsub, weights.empty() ? nullptr : &weights,
        cfg.dropout, mix_seed(cfg.seed, 0xD0000 + std::uint64_t(epoch)),
        &grads);
    adam_update(params, grads, adam, cfg.learning_rate);

    double acc = val_accuracy(params, gval);
    res.history.push_back({epoch, loss, acc});
    if (acc > res.best_val_accuracy) {
      res.best_val_accuracy = acc;
      res.best = params;
      res.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= cfg.patience) break;
  }
  return res;
}

std::vector<Prediction> predict(const ModelParams& p, const kernels::Csr& adj,
                                const std::vector<double>& x, int num_nodes) {
  std::vector<double> probs = forward(p, adj, x, num_nodes);
  std::vector<Prediction> out(static_cast<size_t>(num_nodes));
  int c = p.dims.classes;
  for (int i = 0; i < num_nodes; ++i) {
    const double* row = &probs[size_t(i) * c];
    int best = 0;
    for (int j = 1; j < c; ++j)
      if (row[j] > row[best]) best = j;
    out[size_t(i)] = {best, row[best]};
  }
  return out;
}

Metrics evaluate(const std::vector<Prediction>& preds,
                 const std::vector<int>& labels, int num_classes) {
  if (preds.size() != labels.size())
    throw NetlistError("prediction and label counts differ");
  Metrics m;
  m.confusion.assign(size_t(num_classes),
                     std::vector<int>(size_t(num_classes), 0));
  for (size_t i = 0; i < preds.size(); ++i) {
    int y = labels[i];
    if (y < 0) continue;
    if (y >= num_classes || preds[i].cls >= num_classes)
      throw NetlistError("class index out of range");
    ++m.evaluated;
    ++m.confusion[size_t(y)][size_t(preds[i].cls)];
    if (preds[i].cls != y) m.misclassified.push_back(int(i));
  }
  int correct = 0;
  for (int c = 0; c < num_classes; ++c) correct += m.confusion[c][c];
  m.accuracy = m.evaluated ? double(correct) / m.evaluated : 0.0;
  m.precision.assign(size_t(num_classes), 0.0);
  m.recall.assign(size_t(num_classes), 0.0);
  m.f1.assign(size_t(num_classes), 0.0);
  for (int c = 0; c < num_classes; ++c) {
    std::int64_t tp = m.confusion[c][c], fp = 0, fn = 0;
    for (int o = 0; o < num_classes; ++o) {
      if (o == c) continue;
      fp += m.confusion[o][c];
      fn += m.confusion[c][o];
    }
    if (tp + fp) m.precision[size_t(c)] = double(tp) / double(tp + fp);
    if (tp + fn) m.recall[size_t(c)] = double(tp) / double(tp + fn);
    double pr = m.precision[size_t(c)] + m.recall[size_t(c)];
    if (pr > 0.0)
      m.f1[size_t(c)] = 2.0 * m.precision[size_t(c)] * m.recall[size_t(c)] / pr;
  }
  return m;
}

static json config_to_json(const TrainConfig& cfg) {
  return json{{"learning_rate", cfg.learning_rate},
              {"dropout", cfg.dropout},
              {"max_epochs", cfg.max_epochs},
              {"patience", cfg.patience},
              {"walk_length", cfg.walk_length},
              {"num_roots", cfg.num_roots},
              {"hidden", cfg.hidden},
              {"class_weights", cfg.class_weights},
              {"seed", cfg.seed}};
}

static TrainConfig config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.max_epochs = j.at("max_epochs").get<int>();
  cfg.patience = j.at("patience").get<int>();
  cfg.walk_length = j.at("walk_length").get<int>();
  cfg.num_roots = j.at("num_roots").get<int>();
  cfg.hidden = j.at("hidden").get<int>();
  cfg.class_weights = j.at("class_weights").get<bool>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  json j;
  j["schema_version"] = 1;
  j["dims"] = {{"features", ckpt.params.dims.features},
               {"hidden", ckpt.params.dims.hidden},
               {"classes", ckpt.params.dims.classes}};
  j["class_names"] = ckpt.class_names;
  json w;
  auto blocks = param_blocks();
  for (size_t b = 0; b < blocks.size(); ++b)
    w[param_block_name(int(b))] = ckpt.params.*blocks[b];
  j["weights"] = std::move(w);
  j["train_config"] = config_to_json(ckpt.config);
  j["seed"] = ckpt.config.seed;
  std::ofstream out(path);
  if (!out) throw NetlistError("cannot write checkpoint '" + path + "'");
  out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NetlistError("cannot read checkpoint '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded())
    throw NetlistError("checkpoint '" + path + "' is not valid JSON");
  if (j.value("schema_version", -1) != 1)
    throw NetlistError("unsupported checkpoint schema");
  Checkpoint ckpt;
  GnnDims d;
  d.features = j.at("dims").at("features").get<int>();
  d.hidden = j.at("dims").at("hidden").get<int>();
  d.classes = j.at("dims").at("classes").get<int>();
  ckpt.params = init_params(d, 0);  // shapes only; overwritten below
  ckpt.class_names = j.at("class_names").get<std::vector<std::string>>();
  auto blocks = param_blocks();
  for (size_t b = 0; b < blocks.size(); ++b) {
    auto v = j.at("weights")
                 .at(param_block_name(int(b)))
                 .get<std::vector<double>>();
    if (v.size() != (ckpt.params.*blocks[b]).size())
      throw NetlistError("checkpoint weight block has the wrong shape");
    ckpt.params.*blocks[b] = std::move(v);
  }
  ckpt.config = config_from_json(j.at("train_config"));
  return ckpt;
}

void save_history(const std::string& path,
                  const std::vector<EpochStats>& history) {
  std::ofstream out(path);
  if (!out) throw NetlistError("cannot write history '" + path + "'");
  out << "epoch,train_loss,val_accuracy\n";
  char buf[96];
  for (const auto& e : history) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", e.epoch, e.train_loss,
                  e.val_accuracy);
    out << buf;
  }
}

}  // namespace locklab

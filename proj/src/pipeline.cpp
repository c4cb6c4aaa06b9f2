#include "locklab/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <mutex>
#include <set>
#include <thread>

#include "json.hpp"
#include "locklab/bitsim.hpp"
#include "locklab/graph.hpp"
#include "locklab/io_audit.hpp"
#include "locklab/postprocess.hpp"
#include "locklab/rng.hpp"
#include "locklab/transform.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace locklab {

namespace {

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t instance_seed(const ExperimentConfig& cfg,
                            const std::string& design, int k, int h,
                            int lock) {
  std::uint64_t s = mix_seed(cfg.seed, fnv1a64(design));
  s = mix_seed(s, std::uint64_t(k));
  s = mix_seed(s, std::uint64_t(h) + 0x1000);
  return mix_seed(s, std::uint64_t(lock) + 0x2000);
}

std::string design_stem(const std::string& path) {
  return fs::path(path).stem().string();
}

// Parallel index loop; the first worker exception is rethrown on the caller.
void run_parallel(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int count = std::min<std::size_t>(std::size_t(jobs), n);
  pool.reserve(std::size_t(count));
  for (int t = 0; t < count; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

// Wall times live in a sidecar, never in report.json, so reruns with the
// same seed stay byte-identical.
void timing_update(const std::string& out_dir, const std::string& key,
                   double seconds) {
  const std::string path = out_dir + "/timing.json";
  json j = json::object();
  try {
    j = json::parse(slurp(path));
  } catch (...) {
  }
  j[key] = seconds;
  spew(path, j.dump(2) + "\n");
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!known.count(key))
      throw ConfigError(where + ": unknown field '" + key + "'");
}

template <typename T>
T get_field(const json& j, const std::string& key, const T& fallback,
            const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": field '" + key + "' has the wrong type");
  }
}

json config_echo(const ExperimentConfig& cfg) {
  json t;
  t["learning_rate"] = cfg.train.learning_rate;
  t["dropout"] = cfg.train.dropout;
  t["max_epochs"] = cfg.train.max_epochs;
  t["patience"] = cfg.train.patience;
  t["walk_length"] = cfg.train.walk_length;
  t["num_roots"] = cfg.train.num_roots;
  t["hidden"] = cfg.train.hidden;
  t["class_weights"] = cfg.train.class_weights;
  t["seed"] = cfg.train.seed;
  json e;
  e["max_exhaustive"] = cfg.equiv.max_exhaustive;
  e["random_vectors"] = cfg.equiv.random_vectors;
  json j;
  j["benchmarks"] = cfg.benchmarks;
  j["scheme"] = lock_scheme_name(cfg.scheme);
  j["key_widths"] = cfg.key_widths;
  j["hd"] = cfg.hd_values;
  j["locks_per_setting"] = cfg.locks_per_setting;
  j["seed"] = cfg.seed;
  j["augmentation_passes"] = cfg.augmentation_passes;
  j["test_design"] = cfg.test_design;
  j["val_design"] = cfg.val_design;
  j["train"] = t;
  j["equiv"] = e;
  return j;
}

struct PlannedInstance {
  std::size_t design_idx = 0;
  InstanceRef ref;
};

Split split_for(const ExperimentConfig& cfg, const std::string& design) {
  if (design == cfg.test_design) return Split::Test;
  if (design == cfg.val_design) return Split::Val;
  return Split::Train;
}

LockResult lock_instance(const ExperimentConfig& cfg, const Netlist& n,
                         const InstanceRef& ref) {
  switch (cfg.scheme) {
    case LockScheme::AntiSat:
      return lock_antisat(n, ref.key_width, ref.seed);
    case LockScheme::TtLock:
      return lock_ttlock(n, ref.key_width, ref.seed);
    case LockScheme::SfllHd:
      return lock_sfll_hd(n, ref.key_width, ref.hd, ref.seed);
  }
  throw ConfigError("unknown scheme");
}

// True when the design has enough inputs for the setting; otherwise fills
// *why for the skip warning.
bool setting_fits(const ExperimentConfig& cfg, const Netlist& n, int k,
                  std::string* why) {
  const int pis = int(n.pis().size());
  if (cfg.scheme == LockScheme::AntiSat) {
    if (pis >= k / 2) return true;
    *why = "needs " + std::to_string(k / 2) + " inputs";
  } else {
    if (pis >= k) return true;
    *why = "needs " + std::to_string(k) + " inputs";
  }
  *why += ", design has " + std::to_string(pis);
  return false;
}

std::string instance_id(const ExperimentConfig& cfg, const InstanceRef& r) {
  return std::string(lock_scheme_name(cfg.scheme)) + "/" + r.design + "/" +
         std::to_string(r.key_width) + "_" + std::to_string(r.hd) + "_" +
         std::to_string(r.seed);
}

json manifest_entry(const InstanceRef& r, const std::string& source) {
  json j;
  j["design"] = r.design;
  j["source"] = source;
  j["key_width"] = r.key_width;
  j["hd"] = r.hd;
  j["seed"] = r.seed;
  j["dir"] = r.dir;
  j["split"] = split_name(r.split);
  return j;
}

int class_index_of(const std::vector<std::string>& names, GateClass c) {
  const std::string want = gate_class_name(c);
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == want) return int(i);
  return -1;
}

std::string class_abbrev_of(const std::string& class_name) {
  auto c = gate_class_from_name(class_name);
  return c ? gate_class_abbrev(*c) : class_name;
}

std::vector<std::string> misclassified_pairs(
    const Metrics& m, const std::vector<std::string>& class_names) {
  struct Pair {
    int count, gold, pred;
  };
  std::vector<Pair> pairs;
  for (std::size_t g = 0; g < m.confusion.size(); ++g)
    for (std::size_t p = 0; p < m.confusion[g].size(); ++p)
      if (g != p && m.confusion[g][p] > 0)
        pairs.push_back({m.confusion[g][p], int(g), int(p)});
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.count != b.count) return a.count > b.count;
    if (a.gold != b.gold) return a.gold < b.gold;
    return a.pred < b.pred;
  });
  std::vector<std::string> out;
  for (const Pair& p : pairs)
    out.push_back(std::to_string(p.count) + " " +
                  class_abbrev_of(class_names[std::size_t(p.gold)]) + " as " +
                  class_abbrev_of(class_names[std::size_t(p.pred)]));
  return out;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  json j;
  try {
    j = json::parse(slurp(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const NetlistError& e) {
    throw ConfigError(e.what());
  }
  if (!j.is_object()) throw ConfigError(path + ": top level must be an object");
  reject_unknown_keys(j,
                      {"benchmarks", "scheme", "key_widths", "hd",
                       "locks_per_setting", "seed", "augmentation_passes",
                       "test_design", "val_design", "out", "train", "equiv"},
                      path);

  ExperimentConfig cfg;
  cfg.benchmarks =
      get_field<std::vector<std::string>>(j, "benchmarks", {}, path);
  const std::string scheme_name =
      get_field<std::string>(j, "scheme", "", path);
  auto scheme = lock_scheme_from_name(scheme_name);
  if (!scheme)
    throw ConfigError(path + ": field 'scheme': unknown scheme '" +
                      scheme_name + "'");
  cfg.scheme = *scheme;
  cfg.key_widths = get_field<std::vector<int>>(j, "key_widths", {8}, path);
  cfg.hd_values = get_field<std::vector<int>>(j, "hd", {0}, path);
  cfg.locks_per_setting = get_field<int>(j, "locks_per_setting", 2, path);
  cfg.seed = get_field<std::uint64_t>(j, "seed", 1, path);
  cfg.augmentation_passes =
      get_field<int>(j, "augmentation_passes", 0, path);
  cfg.test_design = get_field<std::string>(j, "test_design", "", path);
  cfg.val_design = get_field<std::string>(j, "val_design", "", path);
  cfg.out_dir = get_field<std::string>(j, "out", "out", path);

  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown_keys(t,
                        {"learning_rate", "dropout", "max_epochs", "patience",
                         "walk_length", "num_roots", "hidden", "class_weights",
                         "seed"},
                        path + ": train");
    const std::string w = path + ": train";
    cfg.train.learning_rate =
        get_field<double>(t, "learning_rate", cfg.train.learning_rate, w);
    cfg.train.dropout = get_field<double>(t, "dropout", cfg.train.dropout, w);
    cfg.train.max_epochs =
        get_field<int>(t, "max_epochs", cfg.train.max_epochs, w);
    cfg.train.patience = get_field<int>(t, "patience", cfg.train.patience, w);
    cfg.train.walk_length =
        get_field<int>(t, "walk_length", cfg.train.walk_length, w);
    cfg.train.num_roots =
        get_field<int>(t, "num_roots", cfg.train.num_roots, w);
    cfg.train.hidden = get_field<int>(t, "hidden", cfg.train.hidden, w);
    cfg.train.class_weights =
        get_field<bool>(t, "class_weights", cfg.train.class_weights, w);
    cfg.train.seed = get_field<std::uint64_t>(t, "seed", cfg.train.seed, w);
  }
  if (j.contains("equiv")) {
    const json& e = j.at("equiv");
    reject_unknown_keys(e, {"max_exhaustive", "random_vectors"},
                        path + ": equiv");
    cfg.equiv.max_exhaustive = get_field<std::uint64_t>(
        e, "max_exhaustive", cfg.equiv.max_exhaustive, path + ": equiv");
    cfg.equiv.random_vectors = get_field<std::uint64_t>(
        e, "random_vectors", cfg.equiv.random_vectors, path + ": equiv");
  }
  cfg.equiv.seed = cfg.seed;

  // Cross-field validation.
  if (cfg.benchmarks.size() < 3)
    throw ConfigError(path +
                      ": field 'benchmarks': need at least 3 designs for a "
                      "train/val/test split");
  std::set<std::string> stems;
  for (const std::string& b : cfg.benchmarks) {
    if (!fs::exists(b))
      throw ConfigError(path + ": field 'benchmarks': no such file '" + b +
                        "'");
    if (!stems.insert(design_stem(b)).second)
      throw ConfigError(path + ": field 'benchmarks': duplicate design '" +
                        design_stem(b) + "'");
  }
  if (cfg.key_widths.empty())
    throw ConfigError(path + ": field 'key_widths': must not be empty");
  for (int k : cfg.key_widths) {
    if (k < 1)
      throw ConfigError(path + ": field 'key_widths': " + std::to_string(k) +
                        " is not positive");
    if (cfg.scheme == LockScheme::AntiSat && k % 2 != 0)
      throw ConfigError(path + ": field 'key_widths': " + std::to_string(k) +
                        " is odd; this scheme splits the key in halves");
  }
  if (cfg.hd_values.empty())
    throw ConfigError(path + ": field 'hd': must not be empty");
  if (cfg.scheme != LockScheme::SfllHd) {
    for (int h : cfg.hd_values)
      if (h != 0)
        throw ConfigError(path +
                          ": field 'hd': distances apply to sfll_hd only");
  }
  const int min_k = *std::min_element(cfg.key_widths.begin(),
                                      cfg.key_widths.end());
  for (int h : cfg.hd_values) {
    if (h < 0)
      throw ConfigError(path + ": field 'hd': negative distance");
    if (h > min_k)
      throw ConfigError(path + ": field 'hd': " + std::to_string(h) +
                        " exceeds the smallest key width " +
                        std::to_string(min_k));
  }
  if (cfg.locks_per_setting < 0)
    throw ConfigError(path + ": field 'locks_per_setting': negative");
  if (cfg.augmentation_passes < 0)
    throw ConfigError(path + ": field 'augmentation_passes': negative");
  if (cfg.test_design.empty() || !stems.count(cfg.test_design))
    throw ConfigError(path + ": field 'test_design': '" + cfg.test_design +
                      "' is not among the benchmarks");
  if (cfg.val_design.empty() || !stems.count(cfg.val_design))
    throw ConfigError(path + ": field 'val_design': '" + cfg.val_design +
                      "' is not among the benchmarks");
  if (cfg.test_design == cfg.val_design)
    throw ConfigError(path + ": test_design and val_design must differ");
  if (cfg.train.learning_rate <= 0 || cfg.train.max_epochs < 1 ||
      cfg.train.patience < 1 || cfg.train.walk_length < 1 ||
      cfg.train.num_roots < 1 || cfg.train.hidden < 1 ||
      cfg.train.dropout < 0 || cfg.train.dropout >= 1)
    throw ConfigError(path + ": train: parameter out of range");
  if (cfg.equiv.max_exhaustive < 1 || cfg.equiv.random_vectors < 1)
    throw ConfigError(path + ": equiv: budgets must be positive");
  return cfg;
}

GenSummary gen_dataset(const ExperimentConfig& cfg, int jobs) {
  StageScope stage("gen-dataset");
  Stopwatch watch;
  GenSummary out;

  std::vector<std::string> names;
  std::vector<Netlist> designs;
  for (const std::string& path : cfg.benchmarks) {
    names.push_back(design_stem(path));
    designs.push_back(parse_bench(slurp(path)));
  }

  std::vector<PlannedInstance> plan;
  for (std::size_t d = 0; d < designs.size(); ++d) {
    for (int k : cfg.key_widths) {
      std::string why;
      if (!setting_fits(cfg, designs[d], k, &why)) {
        out.warnings.push_back(names[d] + ": skipped K=" + std::to_string(k) +
                               " (" + why + ")");
        continue;
      }
      for (int h : cfg.hd_values) {
        if (cfg.scheme == LockScheme::SfllHd && h > k) continue;
        for (int lock = 0; lock < cfg.locks_per_setting; ++lock) {
          InstanceRef r;
          r.design = names[d];
          r.key_width = k;
          r.hd = cfg.scheme == LockScheme::SfllHd ? h : 0;
          r.seed = instance_seed(cfg, names[d], k, r.hd, lock);
          r.dir = cfg.out_dir + "/" + lock_scheme_name(cfg.scheme) + "/" +
                  names[d] + "/" + std::to_string(k) + "_" +
                  std::to_string(r.hd) + "_" + std::to_string(r.seed);
          r.split = split_for(cfg, names[d]);
          plan.push_back({d, r});
        }
      }
    }
  }
  if (cfg.locks_per_setting == 0)
    out.warnings.push_back("locks_per_setting is 0: dataset is empty");

  // graph slots per planned instance keep encode order deterministic under
  // --jobs; test instances are not encoded (the attack re-encodes them).
  std::vector<std::vector<CircuitGraph>> graph_slots(plan.size());
  run_parallel(plan.size(), jobs, [&](std::size_t i) {
    const PlannedInstance& p = plan[i];
    LockResult lr = lock_instance(cfg, designs[p.design_idx], p.ref);
    fs::create_directories(p.ref.dir);
    spew(p.ref.dir + "/locked.bench", write_bench(lr.locked));

    std::string labels = "gate,class\n";
    for (const auto& [gate, cls] : lr.labels)
      labels += gate + "," + gate_class_name(cls) + "\n";
    spew(p.ref.dir + "/labels.csv", labels);

    json meta;
    meta["schema_version"] = 1;
    meta["design"] = p.ref.design;
    meta["scheme"] = lock_scheme_name(cfg.scheme);
    meta["key_width"] = p.ref.key_width;
    meta["hd"] = p.ref.hd;
    meta["seed"] = p.ref.seed;
    meta["num_gates"] = lr.locked.gates().size();
    meta["num_pis"] = lr.locked.pis().size();
    meta["num_kis"] = lr.locked.kis().size();
    meta["num_pos"] = lr.locked.pos().size();
    spew(p.ref.dir + "/meta.json", meta.dump(2) + "\n");

    std::string key_bits;
    for (bool b : lr.key) key_bits += b ? '1' : '0';
    json secret;
    secret["key"] = key_bits;
    secret["protected_inputs"] = lr.protected_inputs;
    secret["target_net"] = lr.target_net;
    secret["renamed_driver"] = lr.renamed_driver;
    secret["antisat_out"] = lr.antisat_out;
    secret["perturb_out"] = lr.perturb_out;
    secret["restore_out"] = lr.restore_out;
    secret["integration_gates"] = lr.integration_gates;
    spew(p.ref.dir + "/secret.json", secret.dump(2) + "\n");

    if (p.ref.split == Split::Test) return;
    const std::string id = instance_id(cfg, p.ref);
    graph_slots[i].push_back(encode(lr.locked, &lr.labels, p.ref.design, id));
    if (p.ref.split == Split::Train) {
      for (int a = 0; a < cfg.augmentation_passes; ++a) {
        RewriteResult rw =
            rewrite_augment_traced(lr.locked, all_rewrite_rules(),
                                   mix_seed(p.ref.seed, 0xA500 + a), 1);
        GroundTruthLabels moved;
        for (const Gate& g : rw.netlist.gates())
          moved[g.name] = lr.labels.at(rw.origin.at(g.name));
        graph_slots[i].push_back(encode(rw.netlist, &moved, p.ref.design,
                                        id + "#a" + std::to_string(a)));
      }
    }
  });

  std::vector<CircuitGraph> graphs;
  for (std::vector<CircuitGraph>& slot : graph_slots)
    for (CircuitGraph& g : slot) graphs.push_back(std::move(g));
  if (!graphs.empty()) {
    Dataset ds = batch(std::move(graphs));
    for (std::size_t g = 0; g < ds.graphs.size(); ++g)
      ds.splits[g] = split_for(cfg, ds.graphs[g].design);
    fs::create_directories(cfg.out_dir + "/encoded");
    AccessLog::instance().record(cfg.out_dir + "/encoded", "write");
    save_dataset(cfg.out_dir + "/encoded", ds);
  }

  json manifest;
  manifest["schema_version"] = 1;
  manifest["scheme"] = lock_scheme_name(cfg.scheme);
  manifest["seed"] = cfg.seed;
  manifest["locks_per_setting"] = cfg.locks_per_setting;
  manifest["test_design"] = cfg.test_design;
  manifest["val_design"] = cfg.val_design;
  json entries = json::array();
  for (const PlannedInstance& p : plan) {
    out.instances.push_back(p.ref);
    entries.push_back(
        manifest_entry(p.ref, cfg.benchmarks[p.design_idx]));
  }
  manifest["instances"] = entries;
  manifest["warnings"] = out.warnings;
  fs::create_directories(cfg.out_dir);
  spew(cfg.out_dir + "/dataset_manifest.json", manifest.dump(2) + "\n");

  timing_update(cfg.out_dir, "gen_dataset_seconds", watch.seconds());
  return out;
}

TrainSummary train_pipeline(const ExperimentConfig& cfg) {
  StageScope stage("train");
  Stopwatch watch;
  AccessLog::instance().record(cfg.out_dir + "/encoded", "read");
  Dataset ds = load_dataset(cfg.out_dir + "/encoded");
  // Leave-one-out by design, like split_loo, except the held-out design is
  // absent by construction: its graphs never enter the encoded dataset.
  bool saw_val = false;
  int train_graphs = 0;
  for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
    const std::string& d = ds.graphs[i].design;
    if (d == cfg.test_design)
      throw NetlistError("encoded dataset contains the held-out design '" +
                         d + "'");
    if (d == cfg.val_design) {
      ds.splits[i] = Split::Val;
      saw_val = true;
    } else {
      ds.splits[i] = Split::Train;
      ++train_graphs;
    }
  }
  if (!saw_val)
    throw NetlistError("no graphs for validation design '" + cfg.val_design +
                       "'");
  if (train_graphs == 0)
    throw NetlistError("splitting left no training graphs");

  TrainResult res = train(ds, cfg.train);

  TrainSummary s;
  s.checkpoint_path = cfg.out_dir + "/checkpoint.json";
  s.history_path = cfg.out_dir + "/history.csv";
  s.epochs = int(res.history.size());
  s.best_epoch = res.best_epoch;
  s.best_val_accuracy = res.best_val_accuracy;
  AccessLog::instance().record(s.checkpoint_path, "write");
  save_checkpoint(s.checkpoint_path, {res.best, ds.class_names, cfg.train});
  AccessLog::instance().record(s.history_path, "write");
  save_history(s.history_path, res.history);
  timing_update(cfg.out_dir, "train_seconds", watch.seconds());
  return s;
}

namespace {

// Everything the attack stage hands to the evaluation stage, in memory.
struct AttackWork {
  InstanceRef ref;
  std::string source;                    // original bench path
  std::vector<std::string> node_names;
  std::vector<Prediction> raw;
  std::vector<Prediction> rectified;
  int rectify_events = 0;
  bool removal_ok = false;
  std::string removal_error;
  Netlist recovered;  // valid iff removal_ok
};

std::vector<InstanceRef> manifest_instances(const json& manifest,
                                            std::vector<std::string>* sources) {
  std::vector<InstanceRef> out;
  for (const json& e : manifest.at("instances")) {
    InstanceRef r;
    r.design = e.at("design").get<std::string>();
    r.key_width = e.at("key_width").get<int>();
    r.hd = e.at("hd").get<int>();
    r.seed = e.at("seed").get<std::uint64_t>();
    r.dir = e.at("dir").get<std::string>();
    const std::string sp = e.at("split").get<std::string>();
    r.split = sp == "test" ? Split::Test
              : sp == "val" ? Split::Val
                            : Split::Train;
    out.push_back(r);
    sources->push_back(e.at("source").get<std::string>());
  }
  return out;
}

}  // namespace

AttackSummary attack_pipeline(const ExperimentConfig& cfg, int jobs) {
  Stopwatch watch;
  std::vector<AttackWork> work;
  Checkpoint ckpt;
  {
    StageScope stage("attack");
    json manifest = json::parse(slurp(cfg.out_dir + "/dataset_manifest.json"));
    if (!manifest.contains("schema_version") ||
        manifest.at("schema_version").get<int>() != 1)
      throw NetlistError("dataset manifest schema mismatch");
    std::vector<std::string> sources;
    std::vector<InstanceRef> all = manifest_instances(manifest, &sources);
    for (std::size_t i = 0; i < all.size(); ++i)
      if (all[i].split == Split::Test)
        work.push_back({all[i], sources[i], {}, {}, {}, 0, false, "", {}});
    if (work.empty())
      throw NetlistError("no test instances in the dataset manifest");

    AccessLog::instance().record(cfg.out_dir + "/checkpoint.json", "read");
    ckpt = load_checkpoint(cfg.out_dir + "/checkpoint.json");
    for (const std::string& name : ckpt.class_names)
      if (!gate_class_from_name(name))
        throw NetlistError("checkpoint class '" + name +
                           "' is not a gate class");

    run_parallel(work.size(), jobs, [&](std::size_t i) {
      AttackWork& w = work[i];
      Netlist locked = parse_bench(slurp(w.ref.dir + "/locked.bench"));
      CircuitGraph g =
          encode(locked, nullptr, w.ref.design, instance_id(cfg, w.ref));
      const int nn = g.num_nodes();
      std::vector<double> x(std::size_t(nn) * kNumNodeFeatures);
      for (int node = 0; node < nn; ++node)
        for (int f = 0; f < kNumNodeFeatures; ++f)
          x[std::size_t(node) * kNumNodeFeatures + f] = g.feature_row(node)[f];
      kernels::Csr adj = kernels::Csr::from_edges(nn, g.edges);
      w.node_names = g.node_names;
      w.raw = predict(ckpt.params, adj, x, nn);

      std::string pred_csv = "gate,predicted_class,confidence\n";
      for (int node = 0; node < nn; ++node)
        pred_csv += g.node_names[std::size_t(node)] + "," +
                    ckpt.class_names[std::size_t(w.raw[std::size_t(node)].cls)] +
                    "," + fmt6(w.raw[std::size_t(node)].confidence) + "\n";
      spew(w.ref.dir + "/predictions.csv", pred_csv);

      PredictionMap pm;
      pm.scheme = cfg.scheme;
      for (int node = 0; node < nn; ++node) {
        const Prediction& p = w.raw[std::size_t(node)];
        auto cls = gate_class_from_name(ckpt.class_names[std::size_t(p.cls)]);
        pm.nodes[g.node_names[std::size_t(node)]] = {*cls, p.confidence};
      }
      PredictionMap after = pm;
      try {
        RectifyResult rr = rectify(locked, pm);
        after = rr.preds;
        w.rectify_events = int(rr.log.size());
        AccessLog::instance().record(w.ref.dir + "/rectify_log.csv", "write");
        save_rectify_log(w.ref.dir + "/rectify_log.csv", rr.log);
      } catch (const NetlistError&) {
        // Nothing rectifiable (e.g. no restore class at all): attack the raw
        // predictions and let verification flag the instance.
      }
      w.rectified.resize(std::size_t(nn));
      for (int node = 0; node < nn; ++node) {
        const NodePrediction& p = after.nodes.at(g.node_names[std::size_t(node)]);
        const int idx = class_index_of(ckpt.class_names, p.cls);
        w.rectified[std::size_t(node)] = {idx < 0 ? 0 : idx, p.confidence};
      }
      try {
        w.recovered = remove_protection(locked, after);
        w.removal_ok = true;
        spew(w.ref.dir + "/recovered.bench", write_bench(w.recovered));
      } catch (const NetlistError& e) {
        w.removal_error = e.what();
      }
    });
  }

  AttackSummary sum;
  sum.outcomes.resize(work.size());
  {
    StageScope stage("evaluate");
    const int nc = int(ckpt.class_names.size());
    run_parallel(work.size(), jobs, [&](std::size_t i) {
      const AttackWork& w = work[i];
      InstanceOutcome& o = sum.outcomes[i];
      o.ref = w.ref;
      o.nodes = int(w.node_names.size());
      o.rectify_events = w.rectify_events;
      o.removal_ok = w.removal_ok;
      o.removal_error = w.removal_error;

      std::map<std::string, std::string> gold_by_gate;
      const std::string labels_csv = slurp(w.ref.dir + "/labels.csv");
      std::size_t pos = labels_csv.find('\n');
      while (pos != std::string::npos && pos + 1 < labels_csv.size()) {
        const std::size_t end = labels_csv.find('\n', pos + 1);
        const std::string line =
            labels_csv.substr(pos + 1, end == std::string::npos
                                           ? std::string::npos
                                           : end - pos - 1);
        const std::size_t comma = line.find(',');
        if (comma != std::string::npos)
          gold_by_gate[line.substr(0, comma)] = line.substr(comma + 1);
        pos = end;
      }
      std::vector<int> gold(w.node_names.size(), -1);
      for (std::size_t node = 0; node < w.node_names.size(); ++node) {
        auto it = gold_by_gate.find(w.node_names[node]);
        if (it == gold_by_gate.end())
          throw NetlistError("labels.csv misses gate '" + w.node_names[node] +
                             "'");
        auto cls = gate_class_from_name(it->second);
        if (!cls)
          throw NetlistError("labels.csv has unknown class '" + it->second +
                             "'");
        gold[node] = class_index_of(ckpt.class_names, *cls);
      }
      Metrics pre = evaluate(w.raw, gold, nc);
      Metrics post = evaluate(w.rectified, gold, nc);
      o.pre_accuracy = pre.accuracy;
      o.post_accuracy = post.accuracy;
      o.misclassified = misclassified_pairs(post, ckpt.class_names);
      o.precision = post.precision;
      o.recall = post.recall;
      o.f1 = post.f1;

      if (w.removal_ok) {
        Netlist original = parse_bench(slurp(w.source));
        try {
          EquivalenceVerdict v =
              check_equivalence(original, w.recovered, cfg.equiv);
          o.equiv_status = equiv_status_name(v.status);
          o.vectors_checked = v.vectors_checked;
        } catch (const NetlistError& e) {
          o.removal_ok = false;
          o.removal_error = e.what();
        }
      }
    });

    int equivalent = 0;
    for (const InstanceOutcome& o : sum.outcomes)
      equivalent += o.equiv_status.rfind("equivalent", 0) == 0;
    sum.removal_success =
        sum.outcomes.empty() ? 0.0
                             : double(equivalent) / double(sum.outcomes.size());
    sum.all_verified = equivalent == int(sum.outcomes.size());

    double pre_sum = 0, post_sum = 0;
    json rows = json::array();
    std::string csv =
        "design,key_width,hd,seed,nodes,pre_accuracy,post_accuracy,"
        "rectify_events,misclassified,removal,vectors_checked\n";
    for (const InstanceOutcome& o : sum.outcomes) {
      pre_sum += o.pre_accuracy;
      post_sum += o.post_accuracy;
      json r;
      r["design"] = o.ref.design;
      r["key_width"] = o.ref.key_width;
      r["hd"] = o.ref.hd;
      r["seed"] = o.ref.seed;
      r["nodes"] = o.nodes;
      r["pre_accuracy"] = o.pre_accuracy;
      r["post_accuracy"] = o.post_accuracy;
      r["rectify_events"] = o.rectify_events;
      r["removal_ok"] = o.removal_ok;
      r["removal_error"] = o.removal_error;
      r["equiv_status"] = o.equiv_status;
      r["vectors_checked"] = o.vectors_checked;
      r["misclassified"] = o.misclassified;
      r["classes"] = ckpt.class_names;
      r["precision"] = o.precision;
      r["recall"] = o.recall;
      r["f1"] = o.f1;
      rows.push_back(r);

      std::string mis;
      for (std::size_t m = 0; m < o.misclassified.size(); ++m)
        mis += (m ? "; " : "") + o.misclassified[m];
      const std::string removal =
          o.equiv_status.empty()
              ? (o.removal_error.empty() ? "" : "failed: " + o.removal_error)
              : o.equiv_status;
      csv += o.ref.design + "," + std::to_string(o.ref.key_width) + "," +
             std::to_string(o.ref.hd) + "," + std::to_string(o.ref.seed) +
             "," + std::to_string(o.nodes) + "," + fmt6(o.pre_accuracy) +
             "," + fmt6(o.post_accuracy) + "," +
             std::to_string(o.rectify_events) + "," + csv_cell(mis) + "," +
             csv_cell(removal) + "," + std::to_string(o.vectors_checked) +
             "\n";
    }

    json report;
    report["schema_version"] = 1;
    report["tool"] = std::string("locklab ") + LOCKLAB_VERSION;
    report["config"] = config_echo(cfg);
    report["scheme"] = lock_scheme_name(cfg.scheme);
    report["test_design"] = cfg.test_design;
    report["instances"] = rows;
    json agg;
    agg["instances"] = sum.outcomes.size();
    agg["pre_accuracy_avg"] =
        sum.outcomes.empty() ? 0.0 : pre_sum / double(sum.outcomes.size());
    agg["post_accuracy_avg"] =
        sum.outcomes.empty() ? 0.0 : post_sum / double(sum.outcomes.size());
    agg["removal_success"] = sum.removal_success;
    report["aggregate"] = agg;

    sum.report_json_path = cfg.out_dir + "/report.json";
    sum.report_csv_path = cfg.out_dir + "/report.csv";
    spew(sum.report_json_path, report.dump(2) + "\n");
    spew(sum.report_csv_path, csv);
  }
  timing_update(cfg.out_dir, "attack_seconds", watch.seconds());
  return sum;
}

void aggregate_reports(const std::vector<std::string>& report_paths,
                       const std::string& out_dir) {
  if (report_paths.empty())
    throw ConfigError("no reports to aggregate");
  StageScope stage("report");
  json rows = json::array();
  double pre = 0, post = 0, removal = 0;
  std::uint64_t instances = 0;
  std::string csv =
      "report,scheme,test_design,instances,pre_accuracy,post_accuracy,"
      "removal_success\n";
  for (const std::string& path : report_paths) {
    json r;
    try {
      r = json::parse(slurp(path));
    } catch (const json::parse_error& e) {
      throw ConfigError(path + ": " + e.what());
    }
    if (!r.contains("schema_version") ||
        r.at("schema_version").get<int>() != 1)
      throw ConfigError(path + ": report schema mismatch");
    const json& agg = r.at("aggregate");
    json row;
    row["report"] = path;
    row["scheme"] = r.at("scheme");
    row["test_design"] = r.at("test_design");
    row["instances"] = agg.at("instances");
    row["pre_accuracy"] = agg.at("pre_accuracy_avg");
    row["post_accuracy"] = agg.at("post_accuracy_avg");
    row["removal_success"] = agg.at("removal_success");
    rows.push_back(row);
    pre += agg.at("pre_accuracy_avg").get<double>();
    post += agg.at("post_accuracy_avg").get<double>();
    removal += agg.at("removal_success").get<double>() *
               agg.at("instances").get<double>();
    instances += agg.at("instances").get<std::uint64_t>();
    csv += csv_cell(path) + "," + r.at("scheme").get<std::string>() + "," +
           r.at("test_design").get<std::string>() + "," +
           std::to_string(agg.at("instances").get<std::uint64_t>()) + "," +
           fmt6(agg.at("pre_accuracy_avg").get<double>()) + "," +
           fmt6(agg.at("post_accuracy_avg").get<double>()) + "," +
           fmt6(agg.at("removal_success").get<double>()) + "\n";
  }
  json overall;
  overall["reports"] = report_paths.size();
  overall["instances"] = instances;
  overall["pre_accuracy_avg"] = pre / double(report_paths.size());
  overall["post_accuracy_avg"] = post / double(report_paths.size());
  overall["removal_success"] =
      instances == 0 ? 0.0 : removal / double(instances);
  json out;
  out["schema_version"] = 1;
  out["reports"] = rows;
  out["overall"] = overall;
  fs::create_directories(out_dir);
  spew(out_dir + "/aggregate.json", out.dump(2) + "\n");
  spew(out_dir + "/aggregate.csv", csv);
}

namespace {

constexpr const char* kSmokeBench =
    "INPUT(1)\nINPUT(2)\nINPUT(3)\nINPUT(6)\nINPUT(7)\n"
    "OUTPUT(22)\nOUTPUT(23)\n"
    "10 = NAND(1, 3)\n"
    "11 = NAND(3, 6)\n"
    "16 = NAND(2, 11)\n"
    "19 = NAND(11, 7)\n"
    "22 = NAND(10, 16)\n"
    "23 = NAND(16, 19)\n";

}  // namespace

int selfcheck() {
  int failed = 0;
  auto check = [&](const char* name, bool ok) {
    std::printf("selfcheck: %-32s %s\n", name, ok ? "ok" : "FAIL");
    failed += !ok;
  };
  try {
    const Netlist base = parse_bench(kSmokeBench);
    check("bench round trip",
          structural_equal(base, parse_bench(write_bench(base))));

    LockResult anti = lock_antisat(base, 4, 1);
    check("lock adds key inputs", anti.locked.kis().size() == 4);
    check("unlock restores the function",
          check_equivalence(base, apply_key(anti.locked, anti.key)).status ==
              EquivStatus::EquivalentExhaustive);

    LockResult sfll = lock_sfll_hd(base, 4, 1, 2);
    check("stripped function differs under a wrong key", [&] {
      std::vector<bool> wrong = sfll.key;
      wrong[0] = !wrong[0];
      return check_equivalence(base, apply_key(sfll.locked, wrong)).status ==
             EquivStatus::NotEquivalent;
    }());
    check("unlock cancels the perturbation",
          check_equivalence(base, apply_key(sfll.locked, sfll.key)).status ==
              EquivStatus::EquivalentExhaustive);

    PredictionMap oracle =
        predictions_from_labels(sfll.labels, LockScheme::SfllHd);
    check("reference removal recovers the design",
          structural_equal(base, remove_protection(sfll.locked, oracle)));

    const PatternSource src = random_patterns(7, int(base.pis().size()));
    BatchResult par = simulate_batch(base, src, 1000);
    BatchResult ser = ref::simulate_batch(base, src, 1000);
    bool agree = par.po_names == ser.po_names;
    const Word last_mask = (Word{1} << (1000 % 64)) - 1;
    for (std::size_t p = 0; agree && p < par.po_words.size(); ++p)
      for (std::size_t w = 0; agree && w < par.po_words[p].size(); ++w) {
        Word a = par.po_words[p][w], b = ser.po_words[p][w];
        if (w + 1 == par.po_words[p].size()) {
          a &= last_mask;
          b &= last_mask;
        }
        agree = a == b;
      }
    check("parallel and serial simulation agree", agree);

    const std::string ckpt_path =
        (fs::temp_directory_path() / "locklab_selfcheck.json").string();
    Checkpoint ck{init_params(GnnDims{kNumNodeFeatures, 8, 3}, 42),
                  {"design", "perturb", "restore"},
                  TrainConfig{}};
    save_checkpoint(ckpt_path, ck);
    Checkpoint back = load_checkpoint(ckpt_path);
    fs::remove(ckpt_path);
    check("checkpoint round trip",
          back.params.w_in == ck.params.w_in &&
              back.params.b_out == ck.params.b_out &&
              back.class_names == ck.class_names);
  } catch (const std::exception& e) {
    std::printf("selfcheck: exception: %s\n", e.what());
    ++failed;
  }
  return failed;
}

}  // namespace locklab

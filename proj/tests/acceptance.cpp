// Acceptance gate: every release-blocking property checked end to end, one
// verdict line each. Run with an optional substring argument to select a
// subset. Exit status is the number of failed checks.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "locklab/circuitgen.hpp"
#include "locklab/gnn.hpp"
#include "locklab/io_audit.hpp"
#include "locklab/pipeline.hpp"
#include "locklab/postprocess.hpp"
#include "locklab/rng.hpp"
#include "locklab/transform.hpp"
#include "oracles.hpp"

using namespace locklab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string data_path(const std::string& name) {
  return std::string(LOCKLAB_DATA_DIR) + "/" + name;
}

Netlist load_bench(const std::string& name) {
  std::ifstream in(data_path(name), std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_bench(ss.str());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t n_choose_k(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * std::uint64_t(n - k + i) / i;
  return r;
}

LockResult lock_with(LockScheme scheme, const Netlist& n, int k, int h,
                     std::uint64_t seed) {
  switch (scheme) {
    case LockScheme::AntiSat: return lock_antisat(n, k, seed);
    case LockScheme::TtLock: return lock_ttlock(n, k, seed);
    case LockScheme::SfllHd: return lock_sfll_hd(n, k, h, seed);
  }
  throw NetlistError("unknown scheme");
}

bool scheme_fits(LockScheme scheme, int pis, int k) {
  return scheme == LockScheme::AntiSat ? pis >= k / 2 : pis >= k;
}

// Every key width and distance the round-trip check exercises, against all
// bundled circuits that can host them, three seeds each.
Outcome check_roundtrip() {
  const char* circuits[] = {"c17.bench", "small_a.bench", "small_b.bench",
                            "small_c.bench"};
  int total = 0, good = 0;
  for (const char* file : circuits) {
    const Netlist base = load_bench(file);
    const int pis = int(base.pis().size());
    for (LockScheme scheme :
         {LockScheme::AntiSat, LockScheme::TtLock, LockScheme::SfllHd}) {
      for (int k : {8, 16, 32}) {
        if (!scheme_fits(scheme, pis, k)) continue;
        const std::vector<int> hs =
            scheme == LockScheme::SfllHd ? std::vector<int>{0, 2, 4}
                                         : std::vector<int>{0};
        for (int h : hs) {
          if (h > k) continue;
          for (std::uint64_t seed : {1, 2, 3}) {
            ++total;
            LockResult lr = lock_with(scheme, base, k, h, seed);
            const bool unlocked =
                check_equivalence(base, apply_key(lr.locked, lr.key)).status ==
                EquivStatus::EquivalentExhaustive;
            Netlist stripped = remove_protection(
                lr.locked, predictions_from_labels(lr.labels, scheme));
            const bool removed =
                check_equivalence(base, stripped).status ==
                EquivStatus::EquivalentExhaustive;
            good += unlocked && removed;
          }
        }
      }
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "%d/%d lock+unlock and oracle removals exact",
                good, total);
  return {good == total && total > 0, buf};
}

// With the restore side pinned off, the locked design must differ from the
// original on exactly the input patterns at the configured distance from
// the hard-coded key, C(K,h) of them.
Outcome check_stripped_difference() {
  const Netlist base = load_bench("small_a.bench");
  const int npi = int(base.pis().size());
  int checked = 0;
  for (int h : {0, 1, 2, 4}) {
    LockResult lr = lock_sfll_hd(base, 8, h, 5 + std::uint64_t(h));
    Netlist stripped =
        constant_propagate(lr.locked, {{lr.restore_out, false}});
    stripped = remove_dead_logic(stripped, {false, true}).netlist;
    if (!stripped.kis().empty()) return {false, "key inputs survived the pin"};

    std::map<std::string, int> prot_pos;
    for (std::size_t i = 0; i < lr.protected_inputs.size(); ++i)
      prot_pos[lr.protected_inputs[i]] = int(i);

    std::uint64_t differing = 0;
    for (std::uint64_t pat = 0; pat < (std::uint64_t{1} << npi); ++pat) {
      std::map<std::string, bool> in;
      for (int b = 0; b < npi; ++b)
        in[base.pis()[std::size_t(b)]] = (pat >> b) & 1;
      const bool differs = base.simulate(in) != stripped.simulate(in);
      int dist = 0;
      for (const auto& [pi, pos] : prot_pos)
        dist += in.at(pi) != lr.key[std::size_t(pos)];
      if (differs != (dist == h))
        return {false, "difference set is not the distance-" +
                           std::to_string(h) + " shell"};
      differing += differs;
    }
    if (differing != n_choose_k(8, h))
      return {false, "h=" + std::to_string(h) + " differs on " +
                         std::to_string(differing) + " patterns, want C(8," +
                         std::to_string(h) + ")"};
    ++checked;
  }
  return {checked == 4, "difference counts match C(8,h) for h in {0,1,2,4}"};
}

// Independent recomputation of every node feature from names and fanin
// lists alone, on a spread of random netlists.
Outcome check_feature_oracle() {
  int netlists = 0;
  long nodes_checked = 0;
  for (int i = 0; i < 100; ++i) {
    CircuitGenConfig cfg;
    cfg.name = "feat" + std::to_string(i);
    cfg.num_pis = 6 + i % 19;
    cfg.num_pos = 2 + i % 4;
    cfg.num_gates = 40 + (i * 37) % 461;  // up to 500
    cfg.seed = 9000 + std::uint64_t(i);
    const Netlist n = generate_circuit(cfg);
    ++netlists;

    auto flat = oracle::FlatCircuit::from(n);
    std::set<std::string> pis(n.pis().begin(), n.pis().end());
    std::set<std::string> kis(n.kis().begin(), n.kis().end());
    for (const Gate& g : n.gates()) {
      std::vector<float> want(kNumNodeFeatures, 0.0f);
      want[0] = float(g.fanin.size());
      int out = 0;
      for (const auto& [name, fg] : flat.gates)
        for (const auto& fin : fg.fanin) out += fin == g.name;
      for (const auto& po : n.pos()) out += po == g.name;
      want[1] = float(out);
      for (const auto& fin : flat.gates.at(g.name).fanin) {
        if (pis.count(fin)) want[2] = 1.0f;
        if (kis.count(fin)) want[3] = 1.0f;
      }
      for (const auto& po : n.pos())
        if (po == g.name) want[4] = 1.0f;
      for (const auto& [name, d] : oracle::bfs_hops(n, g.name))
        if (d == 1 || d == 2) want[5 + int(flat.gates.at(name).type)] += 1.0f;

      const auto got = extract_features(n, g.id);
      for (int f = 0; f < kNumNodeFeatures; ++f)
        if (got[std::size_t(f)] != want[std::size_t(f)])
          return {false, "feature '" + feature_names()[std::size_t(f)] +
                             "' of gate '" + g.name + "' in netlist " +
                             std::to_string(i)};
      ++nodes_checked;
    }
  }
  return {netlists == 100,
          std::to_string(nodes_checked) + " nodes across 100 netlists match"};
}

// Central finite differences over every parameter block.
Outcome check_gradients() {
  const GnnDims dims{5, 4, 3};
  const kernels::Csr adj = kernels::Csr::from_edges(
      7, {{0, 1}, {1, 2}, {1, 4}, {2, 3}, {3, 4}, {4, 5}, {5, 6}});
  const std::vector<int> labels{0, 1, 2, -1, 0, 2, 1};
  const double eps = 1e-4;
  long params_checked = 0;
  for (std::uint64_t seed : {11, 12, 13, 14, 15, 16}) {
    ModelParams p = init_params(dims, seed);
    Rng rng(seed * 131);
    std::vector<double> x(7 * 5);
    for (double& v : x) v = rand_symmetric(rng, 1.0);

    ModelParams grads;
    loss_and_grads(p, adj, x, 7, labels, nullptr, 0.0, 0, &grads);
    for (auto block : param_blocks()) {
      auto& vec = p.*block;
      const auto& gvec = grads.*block;
      for (std::size_t i = 0; i < vec.size(); ++i) {
        const double keep = vec[i];
        vec[i] = keep + eps;
        const double lp =
            loss_and_grads(p, adj, x, 7, labels, nullptr, 0.0, 0, nullptr);
        vec[i] = keep - eps;
        const double lm =
            loss_and_grads(p, adj, x, 7, labels, nullptr, 0.0, 0, nullptr);
        vec[i] = keep;
        const double fd = (lp - lm) / (2 * eps);
        const double an = gvec[i];
        const double tol =
            std::max(1e-8, 1e-4 * std::max(std::abs(fd), std::abs(an)));
        if (std::abs(fd - an) > tol)
          return {false, "gradient off at seed " + std::to_string(seed)};
        ++params_checked;
      }
    }
  }
  return {true, std::to_string(params_checked) +
                    " parameters within 1e-4 over 6 seeds"};
}

ExperimentConfig attack_config(LockScheme scheme, int h,
                               const std::string& out) {
  ExperimentConfig cfg;
  for (const char* d :
       {"gen_a.bench", "gen_b.bench", "gen_c.bench", "gen_d.bench",
        "gen_e.bench", "gen_f.bench"})
    cfg.benchmarks.push_back(data_path(d));
  cfg.scheme = scheme;
  cfg.key_widths = {8, 16, 32};
  cfg.hd_values = {h};
  cfg.locks_per_setting = 2;
  cfg.seed = 77;
  cfg.equiv.seed = 77;
  cfg.test_design = "gen_f";
  cfg.val_design = "gen_e";
  cfg.out_dir = out;
  cfg.train.hidden = 64;
  cfg.train.max_epochs = 220;
  cfg.train.patience = 220;
  cfg.train.num_roots = 600;
  cfg.train.seed = 3;
  return cfg;
}

struct AttackStats {
  double post_accuracy = 0.0;
  double removal = 0.0;
  int instances = 0;
  AttackSummary summary;
  ExperimentConfig cfg;
};

AttackStats run_attack(LockScheme scheme, int h, const std::string& subdir) {
  const std::string out =
      (fs::temp_directory_path() / "locklab_acceptance" / subdir).string();
  fs::remove_all(out);
  AttackStats st;
  st.cfg = attack_config(scheme, h, out);
  gen_dataset(st.cfg);
  train_pipeline(st.cfg);
  st.summary = attack_pipeline(st.cfg);
  st.instances = int(st.summary.outcomes.size());
  for (const InstanceOutcome& o : st.summary.outcomes)
    st.post_accuracy += o.post_accuracy / st.instances;
  st.removal = st.summary.removal_success;
  return st;
}

AttackStats g_antisat_run;  // shared by the audit and determinism checks

// Held-out designs attacked with the learned model: the point-function
// scheme must be classified near-perfectly after rectification and removed
// almost always.
Outcome check_antisat_attack() {
  AccessLog::instance().clear();
  AccessLog::instance().set_stage("");
  g_antisat_run = run_attack(LockScheme::AntiSat, 0, "antisat");
  const AttackStats& st = g_antisat_run;
  char buf[128];
  std::snprintf(buf, sizeof buf,
                "%d instances, post accuracy %.4f, removal %.2f", st.instances,
                st.post_accuracy, st.removal);
  return {st.instances >= 6 && st.post_accuracy >= 0.99 && st.removal >= 0.95,
          buf};
}

// Same protocol for the stripped-function schemes, slightly looser bars.
Outcome check_stripped_attack() {
  AttackStats tt = run_attack(LockScheme::TtLock, 0, "ttlock");
  AttackStats sf = run_attack(LockScheme::SfllHd, 2, "sfll_hd");
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "ttlock acc %.4f removal %.2f; hd2 acc %.4f removal %.2f",
                tt.post_accuracy, tt.removal, sf.post_accuracy, sf.removal);
  const bool ok = tt.instances >= 6 && sf.instances >= 6 &&
                  tt.post_accuracy >= 0.98 && tt.removal >= 0.90 &&
                  sf.post_accuracy >= 0.98 && sf.removal >= 0.90;
  return {ok, buf};
}

// One label flipped at every position of freshly locked instances: the
// rectifier must restore the oracle labeling almost everywhere and must be
// a fixed point on its own output everywhere.
Outcome check_rectifier_repair() {
  const int hs[] = {0, 1, 2, 4};
  long positions = 0, repaired = 0, idempotent = 0;
  for (int i = 0; i < 100; ++i) {
    CircuitGenConfig gen;
    gen.name = "rep" + std::to_string(i);
    gen.num_pis = 10 + i % 5;
    gen.num_pos = 3;
    gen.num_gates = 40 + i % 21;
    gen.seed = 5000 + std::uint64_t(i);
    const Netlist base = generate_circuit(gen);
    LockResult lr = lock_sfll_hd(base, 8, hs[i % 4], 600 + std::uint64_t(i));
    const PredictionMap oracle =
        predictions_from_labels(lr.labels, LockScheme::SfllHd);

    for (const auto& [name, node] : oracle.nodes) {
      ++positions;
      PredictionMap corrupt = oracle;
      corrupt.nodes.at(name).cls =
          node.cls == GateClass::Design    ? GateClass::Perturb
          : node.cls == GateClass::Perturb ? GateClass::Restore
                                           : GateClass::Design;
      PredictionMap fixed;
      try {
        fixed = rectify(lr.locked, corrupt).preds;
      } catch (const NetlistError&) {
        continue;  // unrepairable and unrectifiable: counts as not repaired
      }
      bool match = true;
      for (const auto& [g, cls] : lr.labels)
        match &= fixed.nodes.at(g).cls == cls;
      repaired += match;
      PredictionMap again = rectify(lr.locked, fixed).preds;
      bool stable = true;
      for (const auto& [g, node2] : fixed.nodes)
        stable &= again.nodes.at(g).cls == node2.cls;
      idempotent += stable;
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof buf,
                "%ld/%ld positions repaired, %ld/%ld idempotent", repaired,
                positions, idempotent, positions);
  return {repaired >= (positions * 95 + 99) / 100 && idempotent == positions,
          buf};
}

// The file-access log from the learned attack: the attack stage may read
// only the manifest, the checkpoint and locked netlists. Ground truth
// (labels, originals) is touched first by the evaluation stage, and the
// per-instance key material is never read at all.
Outcome check_oracle_less_audit() {
  if (g_antisat_run.instances == 0)
    return {false, "attack run unavailable"};
  int attack_reads = 0;
  bool evaluate_read_labels = false;
  for (const FileAccess& a : AccessLog::instance().snapshot()) {
    if (a.mode == "read" && a.path.find("secret.json") != std::string::npos)
      return {false, "key material was read in stage '" + a.stage + "'"};
    if (a.stage == "attack" && a.mode == "read") {
      ++attack_reads;
      const bool allowed =
          a.path.find("locked.bench") != std::string::npos ||
          a.path.find("dataset_manifest.json") != std::string::npos ||
          a.path.find("checkpoint.json") != std::string::npos;
      if (!allowed) return {false, "attack stage read " + a.path};
      if (a.path.find("labels.csv") != std::string::npos)
        return {false, "attack stage read ground-truth labels"};
    }
    if (a.stage == "evaluate" && a.mode == "read" &&
        a.path.find("labels.csv") != std::string::npos)
      evaluate_read_labels = true;
  }
  if (!evaluate_read_labels) return {false, "evaluation never scored labels"};
  return {true, std::to_string(attack_reads) +
                    " attack-stage reads, all manifest/checkpoint/locked"};
}

// Re-running the attack with the same configuration and seed must rewrite
// every artifact byte for byte.
Outcome check_determinism() {
  if (g_antisat_run.instances == 0)
    return {false, "attack run unavailable"};
  const AttackStats& st = g_antisat_run;
  const std::string report1 = read_file(st.summary.report_json_path);
  std::vector<std::string> recovered1;
  for (const InstanceOutcome& o : st.summary.outcomes)
    recovered1.push_back(read_file(o.ref.dir + "/recovered.bench"));

  AttackSummary again = attack_pipeline(st.cfg);
  if (read_file(st.summary.report_json_path) != report1)
    return {false, "report.json changed between runs"};
  for (std::size_t i = 0; i < again.outcomes.size(); ++i)
    if (read_file(again.outcomes[i].ref.dir + "/recovered.bench") !=
        recovered1[i])
      return {false, "recovered netlist changed between runs"};
  char buf[96];
  std::snprintf(buf, sizeof buf,
                "report and %zu recovered netlists byte-identical",
                recovered1.size());
  return {true, buf};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string filter = argc > 1 ? argv[1] : "";
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"lock-unlock-roundtrip", check_roundtrip},
      {"stripped-difference-count", check_stripped_difference},
      {"feature-oracle", check_feature_oracle},
      {"gradient-check", check_gradients},
      {"point-function-attack", check_antisat_attack},
      {"stripped-function-attack", check_stripped_attack},
      {"rectifier-repair", check_rectifier_repair},
      {"oracle-less-audit", check_oracle_less_audit},
      {"determinism", check_determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!filter.empty() && std::string(name).find(filter) == std::string::npos)
      continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::printf("[%s] %-28s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed;
}

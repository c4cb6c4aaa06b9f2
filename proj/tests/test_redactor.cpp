#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "locklab/circuitgen.hpp"
#include "locklab/locking.hpp"
#include "locklab/netlist.hpp"
#include "locklab/postprocess.hpp"
#include "locklab/redactor.hpp"
#include "locklab/transform.hpp"

using namespace locklab;

namespace {

Netlist base_circuit(int seed, int pis = 14, int gates = 60) {
  CircuitGenConfig cfg;
  cfg.name = "rd" + std::to_string(seed);
  cfg.num_pis = pis;
  cfg.num_pos = 3;
  cfg.num_gates = gates;
  cfg.seed = static_cast<std::uint64_t>(seed);
  return generate_circuit(cfg);
}

PredictionMap all_design(const Netlist& n, LockScheme scheme) {
  PredictionMap p;
  p.scheme = scheme;
  for (const Gate& g : n.gates()) p.nodes[g.name] = {GateClass::Design, 1.0};
  return p;
}

std::vector<std::string> integration_names(const Netlist& n,
                                           const PredictionMap& preds) {
  std::vector<std::string> names;
  for (int id : find_integration_gates(n, preds))
    names.push_back(n.gate(id).name);
  return names;
}

std::vector<std::string> sorted_copy(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// 30-input shell around a tiny two-input function; wide enough that the
// checker must sample instead of enumerating.
Netlist wide_pair_circuit(GateType type) {
  NetlistBuilder b;
  b.set_name("wide");
  for (int i = 0; i < 30; ++i) b.add_input("pi" + std::to_string(i));
  b.add_gate("y", type, {"pi0", "pi1"});
  b.add_output("y");
  return b.build();
}

}  // namespace

TEST_SUITE("redactor") {

TEST_CASE("integration gates match the lock's splice points") {
  Netlist n = base_circuit(1);

  LockResult anti = lock_antisat(n, 8, 11);
  PredictionMap pa = predictions_from_labels(anti.labels, LockScheme::AntiSat);
  CHECK(sorted_copy(integration_names(anti.locked, pa)) ==
        sorted_copy(anti.integration_gates));
  CHECK(anti.integration_gates.size() == 1);

  LockResult sfll = lock_sfll_hd(n, 8, 2, 12);
  PredictionMap ps = predictions_from_labels(sfll.labels, LockScheme::SfllHd);
  CHECK(sorted_copy(integration_names(sfll.locked, ps)) ==
        sorted_copy(sfll.integration_gates));
  CHECK(sfll.integration_gates.size() == 2);

  LockResult tt = lock_ttlock(n, 8, 13);
  PredictionMap pt = predictions_from_labels(tt.labels, LockScheme::TtLock);
  CHECK(sorted_copy(integration_names(tt.locked, pt)) ==
        sorted_copy(tt.integration_gates));
}

TEST_CASE("no splice point in the classification is an error") {
  Netlist n = base_circuit(2);
  LockResult lr = lock_antisat(n, 8, 21);
  PredictionMap preds = all_design(lr.locked, LockScheme::AntiSat);
  CHECK_THROWS_AS(find_integration_gates(lr.locked, preds), NetlistError);
  CHECK_THROWS_AS(remove_protection(lr.locked, preds), NetlistError);
}

TEST_CASE("removing correctly classified protection restores the design") {
  struct Case {
    LockScheme scheme;
    int key_width;
    int hd;
  };
  const std::vector<Case> cases = {
      {LockScheme::AntiSat, 8, 0},  {LockScheme::AntiSat, 12, 0},
      {LockScheme::TtLock, 8, 0},   {LockScheme::SfllHd, 8, 1},
      {LockScheme::SfllHd, 8, 2},   {LockScheme::SfllHd, 8, 4},
  };
  for (const Case& c : cases) {
    for (int seed : {1, 2, 3}) {
      CAPTURE(lock_scheme_name(c.scheme));
      CAPTURE(c.key_width);
      CAPTURE(c.hd);
      CAPTURE(seed);
      Netlist n = base_circuit(seed);
      LockResult lr =
          c.scheme == LockScheme::AntiSat
              ? lock_antisat(n, c.key_width, static_cast<std::uint64_t>(seed))
          : c.scheme == LockScheme::TtLock
              ? lock_ttlock(n, c.key_width, static_cast<std::uint64_t>(seed))
              : lock_sfll_hd(n, c.key_width, c.hd,
                             static_cast<std::uint64_t>(seed));
      PredictionMap preds = predictions_from_labels(lr.labels, c.scheme);

      Netlist out = remove_protection(lr.locked, preds);
      CHECK(out.kis().empty());
      CHECK(structural_equal(n, out));

      EquivalenceVerdict v = check_equivalence(n, out);
      CHECK(v.status == EquivStatus::EquivalentExhaustive);
      CHECK(v.vectors_checked == (std::uint64_t{1} << n.pis().size()));
      CHECK(v.counterexample.empty());
    }
  }
}

TEST_CASE("removal is the identity when nothing is protection") {
  Netlist n = base_circuit(3);
  Netlist out = remove_protection(n, all_design(n, LockScheme::TtLock));
  CHECK(structural_equal(n, out));
}

TEST_CASE("key logic missed by the classification is reported") {
  Netlist n = base_circuit(4);
  LockResult lr = lock_sfll_hd(n, 8, 2, 41);
  PredictionMap preds = predictions_from_labels(lr.labels, LockScheme::SfllHd);
  // Hide the cancel stage: only the perturb-side splice point is left, so
  // the keyed compare cone stays live and its key inputs survive.
  preds.nodes.at(lr.integration_gates[1]).cls = GateClass::Design;
  try {
    remove_protection(lr.locked, preds);
    FAIL("expected surviving key inputs to raise");
  } catch (const NetlistError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("keyinput") != std::string::npos);
    CHECK(msg.find("->") != std::string::npos);
  }
}

TEST_CASE("perturb logic left behind fails the equivalence check") {
  Netlist n = base_circuit(5);
  LockResult lr = lock_sfll_hd(n, 8, 2, 51);
  PredictionMap preds = predictions_from_labels(lr.labels, LockScheme::SfllHd);
  // Mislabel the perturb side as design: removal cuts only the restore
  // cone and leaves a corrupted circuit behind.
  for (const auto& [name, cls] : lr.labels)
    if (cls == GateClass::Perturb) preds.nodes.at(name).cls = GateClass::Design;

  Netlist out = remove_protection(lr.locked, preds);
  CHECK(out.kis().empty());

  EquivalenceVerdict v = check_equivalence(n, out);
  REQUIRE(v.status == EquivStatus::NotEquivalent);
  REQUIRE(!v.counterexample.empty());
  CHECK(v.counterexample.size() == n.pis().size());
  CHECK(n.simulate(v.counterexample) != out.simulate(v.counterexample));
}

TEST_CASE("rectified predictions drive a clean removal") {
  Netlist n = base_circuit(6);
  LockResult lr = lock_sfll_hd(n, 8, 2, 61);
  PredictionMap preds = predictions_from_labels(lr.labels, LockScheme::SfllHd);
  // A few wrong node classes, as a trained model would produce.
  int flipped = 0;
  for (const auto& [name, cls] : lr.labels) {
    if (flipped >= 4) break;
    if (cls != GateClass::Design) continue;
    const Gate& g = lr.locked.gate(lr.locked.find(name)->index);
    if (g.fanin.size() < 2) continue;
    preds.nodes.at(name).cls = GateClass::Perturb;
    ++flipped;
  }
  REQUIRE(flipped == 4);
  RectifyResult rr = rectify(lr.locked, preds);
  Netlist out = remove_protection(lr.locked, rr.preds);
  CHECK(check_equivalence(n, out).status == EquivStatus::EquivalentExhaustive);
}

TEST_CASE("hand-built mismatch yields the first differing pattern") {
  Netlist x = parse_bench(
      "INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = XOR(a, b)\n");
  Netlist o = parse_bench(
      "INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = OR(a, b)\n");

  EquivalenceVerdict v = check_equivalence(x, o);
  CHECK(v.status == EquivStatus::NotEquivalent);
  CHECK(std::string(equiv_status_name(v.status)) == "not_equivalent");
  // Patterns walk the sorted-input space in order; (a=1, b=1) is index 3.
  CHECK(v.vectors_checked == 4);
  REQUIRE(v.counterexample.size() == 2);
  CHECK(v.counterexample.at("a"));
  CHECK(v.counterexample.at("b"));

  EquivalenceVerdict w = check_equivalence(o, x);
  CHECK(w.status == v.status);
  CHECK(w.vectors_checked == v.vectors_checked);
  CHECK(w.counterexample == v.counterexample);

  EquivalenceVerdict self = check_equivalence(x, x);
  CHECK(self.status == EquivStatus::EquivalentExhaustive);
  CHECK(self.vectors_checked == 4);
}

TEST_CASE("interface mismatches are rejected") {
  Netlist ab = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n");
  Netlist ac = parse_bench("INPUT(a)\nINPUT(c)\nOUTPUT(y)\ny = AND(a, c)\n");
  Netlist zo = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(z)\nz = AND(a, b)\n");
  Netlist keyed = parse_bench(
      "INPUT(a)\nINPUT(b)\nINPUT(keyinput0)\nOUTPUT(y)\n"
      "t = XOR(a, keyinput0)\ny = AND(t, b)\n");
  CHECK_THROWS_AS(check_equivalence(ab, ac), NetlistError);
  CHECK_THROWS_AS(check_equivalence(ab, zo), NetlistError);
  CHECK_THROWS_AS(check_equivalence(keyed, keyed), NetlistError);
}

TEST_CASE("wide inputs fall back to sampled comparison") {
  Netlist a = wide_pair_circuit(GateType::Xor);
  Netlist b = wide_pair_circuit(GateType::Xor);
  Netlist c = wide_pair_circuit(GateType::Or);

  EquivBudget budget;
  budget.random_vectors = 2048;

  EquivalenceVerdict same = check_equivalence(a, b, budget);
  CHECK(same.status == EquivStatus::EquivalentSampled);
  CHECK(same.vectors_checked == 2048);

  EquivalenceVerdict diff = check_equivalence(a, c, budget);
  REQUIRE(diff.status == EquivStatus::NotEquivalent);
  CHECK(diff.counterexample.at("pi0"));
  CHECK(diff.counterexample.at("pi1"));
  CHECK(diff.vectors_checked <= 2048);

  EquivalenceVerdict swapped = check_equivalence(c, a, budget);
  CHECK(swapped.vectors_checked == diff.vectors_checked);
  CHECK(swapped.counterexample == diff.counterexample);
}

TEST_CASE("a tight budget forces sampling on small circuits") {
  Netlist x = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = XOR(a, b)\n");
  EquivBudget budget;
  budget.max_exhaustive = 2;
  budget.random_vectors = 512;
  EquivalenceVerdict v = check_equivalence(x, x, budget);
  CHECK(v.status == EquivStatus::EquivalentSampled);
  CHECK(v.vectors_checked == 512);
}

TEST_CASE("rewrite-augmented variants check equivalent") {
  Netlist n = base_circuit(7, 12, 50);
  Netlist aug = rewrite_augment(n, all_rewrite_rules(), 123, 2);
  EquivalenceVerdict v = check_equivalence(n, aug);
  CHECK(v.status == EquivStatus::EquivalentExhaustive);
}

}  // TEST_SUITE

#include <bit>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "locklab/circuitgen.hpp"
#include "locklab/locking.hpp"
#include "locklab/netlist.hpp"
#include "oracles.hpp"

using namespace locklab;

namespace {

Netlist small_design(int pis, int gates, std::uint64_t seed) {
  CircuitGenConfig cfg;
  cfg.name = "design";
  cfg.num_pis = pis;
  cfg.num_pos = 3;
  cfg.num_gates = gates;
  cfg.seed = seed;
  return generate_circuit(cfg);
}

std::map<std::string, bool> assign_bits(const std::vector<std::string>& names,
                                        std::uint64_t value) {
  std::map<std::string, bool> m;
  for (size_t i = 0; i < names.size(); ++i) m[names[i]] = (value >> i) & 1;
  return m;
}

std::uint64_t to_int(const std::vector<bool>& bits) {
  std::uint64_t v = 0;
  for (size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) v |= 1ull << i;
  return v;
}

std::vector<bool> to_bits(std::uint64_t v, int n) {
  std::vector<bool> bits(n);
  for (int i = 0; i < n; ++i) bits[i] = (v >> i) & 1;
  return bits;
}

// All-pattern functional comparison through the naive oracle simulator.
void require_equiv_exhaustive(const Netlist& a, const Netlist& b) {
  REQUIRE(a.kis().empty());
  REQUIRE(b.kis().empty());
  REQUIRE(a.pis() == b.pis());
  REQUIRE(a.pos() == b.pos());
  int w = int(a.pis().size());
  REQUIRE(w <= 14);
  auto fa = oracle::FlatCircuit::from(a);
  auto fb = oracle::FlatCircuit::from(b);
  for (std::uint64_t x = 0; x < (1ull << w); ++x) {
    auto in = assign_bits(a.pis(), x);
    auto ra = oracle::simulate(fa, in);
    auto rb = oracle::simulate(fb, in);
    CAPTURE(x);
    REQUIRE(ra == rb);
  }
}

int count_labels(const GroundTruthLabels& labels, GateClass c) {
  int n = 0;
  for (const auto& [name, cls] : labels)
    if (cls == c) ++n;
  return n;
}

}  // namespace

TEST_SUITE("locking") {

TEST_CASE("hd checker matches integer popcount for every width and distance") {
  for (int w = 1; w <= 6; ++w) {
    for (int h = 0; h <= w; ++h) {
      std::uint64_t kint = 0xB5ull & ((1ull << w) - 1);
      auto key = to_bits(kint, w);

      Netlist hard = hd_checker_circuit(w, h, &key);
      auto fhard = oracle::FlatCircuit::from(hard);
      for (std::uint64_t x = 0; x < (1ull << w); ++x) {
        bool expect = std::popcount(x ^ kint) == h;
        CHECK(oracle::simulate(fhard, assign_bits(hard.pis(), x)).at("hd") ==
              expect);
      }

      Netlist keyed = hd_checker_circuit(w, h, nullptr);
      REQUIRE(int(keyed.kis().size()) == w);
      auto fkeyed = oracle::FlatCircuit::from(keyed);
      for (std::uint64_t x = 0; x < (1ull << w); ++x) {
        for (std::uint64_t k = 0; k < (1ull << w); ++k) {
          auto in = assign_bits(keyed.pis(), x);
          auto kin = assign_bits(keyed.kis(), k);
          in.insert(kin.begin(), kin.end());
          bool expect = std::popcount(x ^ k) == h;
          CHECK(oracle::simulate(fkeyed, in).at("hd") == expect);
        }
      }
    }
  }
}

TEST_CASE("equality checker folds to inverters and one and-tree") {
  auto key = to_bits(0x5C, 8);
  Netlist c = hd_checker_circuit(8, 0, &key);
  for (const Gate& g : c.gates()) {
    bool simple = g.type == GateType::Not || g.type == GateType::Buf ||
                  g.type == GateType::And;
    CAPTURE(g.name);
    CHECK(simple);
  }
  // 8 key-fold gates, 8 inverters, 7 tree nodes, 1 named output buffer.
  CHECK(c.gates().size() == 24);
}

TEST_CASE("anti-sat adds 2K+1 gates, all labelled as protection") {
  Netlist n = small_design(16, 50, 7);
  for (int k : {2, 8, 16}) {
    LockResult r = lock_antisat(n, k, 21);
    CHECK(r.locked.gates().size() == n.gates().size() + 2 * k + 1);
    CHECK(count_labels(r.labels, GateClass::AntiSat) == 2 * k + 1);
    CHECK(count_labels(r.labels, GateClass::Design) == int(n.gates().size()));
    CHECK(r.labels.size() == r.locked.gates().size());
    CHECK(int(r.locked.kis().size()) == k);
    CHECK(r.locked.kis().front() == "keyinput0");
    REQUIRE(int(r.key.size()) == k);
    for (int i = 0; i < k / 2; ++i) CHECK(r.key[i] == r.key[k / 2 + i]);
    CHECK(int(r.protected_inputs.size()) == k / 2);
    CHECK(r.locked.pis() == n.pis());
    CHECK(r.locked.pos() == n.pos());
  }
}

TEST_CASE("anti-sat output stays silent exactly when the key halves agree") {
  Netlist n = small_design(8, 40, 11);
  LockResult r = lock_antisat(n, 8, 3);
  auto f = oracle::FlatCircuit::from(r.locked);
  int na = 4;

  auto count_firings = [&](const std::vector<bool>& key) {
    int fired = 0;
    for (std::uint64_t x = 0; x < 256; ++x) {
      auto in = assign_bits(r.locked.pis(), x);
      auto kin = assign_bits(r.locked.kis(), to_int(key));
      in.insert(kin.begin(), kin.end());
      std::map<std::string, bool> memo;
      if (oracle::eval_signal(f, r.antisat_out, in, memo)) ++fired;
    }
    return fired;
  };

  CHECK(count_firings(r.key) == 0);

  // Any key with equal halves is a correct key, not just the returned one.
  std::vector<bool> other(8, false);
  other[2] = other[na + 2] = true;
  CHECK(count_firings(other) == 0);

  // Differing halves let the first branch fire on exactly one protected
  // pattern; the other four inputs are free, giving 2^4 full patterns.
  std::vector<bool> bad = r.key;
  bad[na] = !bad[na];
  CHECK(count_firings(bad) == 16);
}

TEST_CASE("anti-sat is transparent under the right key") {
  Netlist n = small_design(8, 40, 13);
  LockResult r = lock_antisat(n, 8, 5);
  require_equiv_exhaustive(apply_key(r.locked, r.key), n);

  std::vector<bool> other(8, true);
  require_equiv_exhaustive(apply_key(r.locked, other), n);
}

TEST_CASE("anti-sat corrupts the spliced net under a bad key") {
  Netlist n = small_design(8, 40, 17);
  LockResult r = lock_antisat(n, 8, 9);
  REQUIRE(!r.integration_gates.empty());
  const std::string mix = r.integration_gates.front();

  std::vector<bool> bad = r.key;
  bad[4] = !bad[4];
  auto f = oracle::FlatCircuit::from(r.locked);
  int diffs = 0;
  for (std::uint64_t x = 0; x < 256; ++x) {
    auto good_in = assign_bits(r.locked.pis(), x);
    auto bad_in = good_in;
    auto gk = assign_bits(r.locked.kis(), to_int(r.key));
    auto bk = assign_bits(r.locked.kis(), to_int(bad));
    good_in.insert(gk.begin(), gk.end());
    bad_in.insert(bk.begin(), bk.end());
    std::map<std::string, bool> m1, m2;
    if (oracle::eval_signal(f, mix, good_in, m1) !=
        oracle::eval_signal(f, mix, bad_in, m2))
      ++diffs;
  }
  CHECK(diffs == 16);
}

TEST_CASE("sfll perturb unit fires on a binomial number of patterns") {
  Netlist n = small_design(8, 40, 19);
  const std::map<int, int> expected{
      {0, 1}, {1, 8}, {2, 28}, {3, 56}, {4, 70}};  // h -> C(8,h)
  for (auto [h, want] : expected) {
    LockResult r = lock_sfll_hd(n, 8, h, 23);
    auto f = oracle::FlatCircuit::from(r.locked);
    int fired = 0;
    int restored = 0;
    for (std::uint64_t x = 0; x < 256; ++x) {
      std::map<std::string, bool> in;
      for (size_t i = 0; i < r.protected_inputs.size(); ++i)
        in[r.protected_inputs[i]] = (x >> i) & 1;
      for (const auto& pi : r.locked.pis())
        if (!in.count(pi)) in[pi] = false;
      auto kin = assign_bits(r.locked.kis(), to_int(r.key));
      in.insert(kin.begin(), kin.end());
      std::map<std::string, bool> memo;
      bool p = oracle::eval_signal(f, r.perturb_out, in, memo);
      bool q = oracle::eval_signal(f, r.restore_out, in, memo);
      fired += p;
      restored += q;
      CHECK(p == q);  // correct key: restore mirrors perturb everywhere
    }
    CHECK(fired == want);
    CHECK(restored == want);
  }
}

TEST_CASE("sfll locked design equals the original under the right key") {
  Netlist n = small_design(8, 40, 29);
  for (int h : {0, 2}) {
    LockResult r = lock_sfll_hd(n, 8, h, 31);
    require_equiv_exhaustive(apply_key(r.locked, r.key), n);
  }
}

TEST_CASE("ttlock under a wrong key differs on exactly the two key cubes") {
  Netlist n = small_design(8, 40, 37);
  LockResult r = lock_ttlock(n, 8, 41);
  CHECK(r.scheme == LockScheme::TtLock);
  CHECK(r.hd == 0);

  std::vector<bool> wrong = r.key;
  wrong[0] = !wrong[0];
  wrong[5] = !wrong[5];
  Netlist applied = apply_key(r.locked, wrong);
  auto fa = oracle::FlatCircuit::from(applied);
  auto fo = oracle::FlatCircuit::from(n);

  std::set<std::uint64_t> diff_patterns;
  for (std::uint64_t x = 0; x < 256; ++x) {
    std::map<std::string, bool> in;
    for (size_t i = 0; i < r.protected_inputs.size(); ++i)
      in[r.protected_inputs[i]] = (x >> i) & 1;
    auto ra = oracle::simulate(fa, in);
    auto ro = oracle::simulate(fo, in);
    for (const auto& po : n.pos()) {
      if (ra.at(po) != ro.at(po)) {
        CHECK(po == r.target_net);  // only the protected output may move
        diff_patterns.insert(x);
      }
    }
  }
  std::set<std::uint64_t> expected{to_int(r.key), to_int(wrong)};
  CHECK(diff_patterns == expected);
}

TEST_CASE("sfll-hd wrong-key error census matches the popcount model") {
  Netlist n = small_design(8, 40, 43);
  LockResult r = lock_sfll_hd(n, 8, 2, 47);
  std::vector<bool> wrong = r.key;
  wrong[1] = !wrong[1];
  std::uint64_t ks = to_int(r.key), kw = to_int(wrong);

  Netlist applied = apply_key(r.locked, wrong);
  auto fa = oracle::FlatCircuit::from(applied);
  auto fo = oracle::FlatCircuit::from(n);
  int diffs = 0, expected = 0;
  for (std::uint64_t x = 0; x < 256; ++x) {
    std::map<std::string, bool> in;
    for (size_t i = 0; i < r.protected_inputs.size(); ++i)
      in[r.protected_inputs[i]] = (x >> i) & 1;
    bool model = (std::popcount(x ^ ks) == 2) != (std::popcount(x ^ kw) == 2);
    expected += model;
    diffs +=
        oracle::simulate(fa, in).at(r.target_net) !=
        oracle::simulate(fo, in).at(r.target_net);
  }
  CHECK(diffs == expected);
  CHECK(expected > 0);
}

TEST_CASE("sfll labels partition the locked netlist") {
  Netlist n = small_design(16, 50, 53);
  LockResult r = lock_sfll_hd(n, 8, 2, 59);

  CHECK(r.labels.size() == r.locked.gates().size());
  for (const Gate& g : r.locked.gates()) CHECK(r.labels.count(g.name) == 1);
  CHECK(count_labels(r.labels, GateClass::Design) == int(n.gates().size()));
  CHECK(count_labels(r.labels, GateClass::Perturb) > 0);
  CHECK(count_labels(r.labels, GateClass::Restore) > 0);

  CHECK(r.renamed_driver == r.target_net + "_str");
  CHECK(r.labels.at(r.renamed_driver) == GateClass::Design);
  CHECK(r.labels.at(r.target_net) == GateClass::Restore);
  REQUIRE(r.integration_gates.size() == 2);
  CHECK(r.labels.at(r.integration_gates[0]) == GateClass::Perturb);
  CHECK(r.integration_gates[1] == r.target_net);

  // The rename is the only change to original gates: same types, fanins up
  // to the target -> renamed substitution.
  auto fl = oracle::FlatCircuit::from(r.locked);
  for (const Gate& g : n.gates()) {
    std::string name = g.name == r.target_net ? r.renamed_driver : g.name;
    const auto& lg = fl.gates.at(name);
    CHECK(lg.type == g.type);
    for (size_t i = 0; i < g.fanin.size(); ++i) {
      std::string want = n.signal_name(g.fanin[i]);
      if (want == r.target_net) want = r.renamed_driver;
      CHECK(lg.fanin[i] == want);
    }
  }
}

TEST_CASE("locking is reproducible from the seed") {
  Netlist n = small_design(16, 50, 61);
  for (auto scheme : {LockScheme::AntiSat, LockScheme::SfllHd}) {
    auto lock = [&](std::uint64_t seed) {
      return scheme == LockScheme::AntiSat ? lock_antisat(n, 8, seed)
                                           : lock_sfll_hd(n, 8, 2, seed);
    };
    LockResult a = lock(77), b = lock(77), c = lock(78);
    CHECK(structural_equal(a.locked, b.locked));
    CHECK(a.key == b.key);
    CHECK(a.labels == b.labels);
    CHECK(a.protected_inputs == b.protected_inputs);
    bool same_everything = structural_equal(a.locked, c.locked) &&
                           a.key == c.key &&
                           a.protected_inputs == c.protected_inputs;
    CHECK(!same_everything);
  }
}

TEST_CASE("selection policies pick the requested inputs and target") {
  Netlist n = small_design(12, 40, 67);

  LockOptions first;
  first.inputs.kind = SelectionPolicy::Kind::FirstK;
  LockResult rf = lock_sfll_hd(n, 4, 1, 1, first);
  CHECK(rf.protected_inputs ==
        std::vector<std::string>(n.pis().begin(), n.pis().begin() + 4));

  LockOptions expl;
  expl.inputs.kind = SelectionPolicy::Kind::Explicit;
  expl.inputs.explicit_names = {n.pis()[3], n.pis()[0], n.pis()[7], n.pis()[9]};
  expl.target.kind = SelectionPolicy::Kind::Explicit;
  expl.target.explicit_target = n.pos().front();
  LockResult re = lock_sfll_hd(n, 4, 1, 1, expl);
  CHECK(re.protected_inputs == expl.inputs.explicit_names);
  CHECK(re.target_net == n.pos().front());

  // The protection function must depend on exactly the chosen inputs.
  auto cone = oracle::fanin_cone(re.locked, re.perturb_out);
  std::set<std::string> want(expl.inputs.explicit_names.begin(),
                             expl.inputs.explicit_names.end());
  CHECK(cone.pis == want);

  LockOptions bad;
  bad.inputs.kind = SelectionPolicy::Kind::Explicit;
  bad.inputs.explicit_names = {n.pis()[0]};
  CHECK_THROWS_AS(lock_sfll_hd(n, 4, 1, 1, bad), NetlistError);
}

TEST_CASE("lock parameter validation") {
  Netlist n = small_design(8, 30, 71);
  CHECK_THROWS_AS(lock_antisat(n, 7, 1), NetlistError);    // odd
  CHECK_THROWS_AS(lock_antisat(n, 0, 1), NetlistError);
  CHECK_THROWS_AS(lock_antisat(n, 18, 1), NetlistError);   // K/2 > |PIs|
  CHECK_THROWS_AS(lock_sfll_hd(n, 9, 1, 1), NetlistError); // K > |PIs|
  CHECK_THROWS_AS(lock_sfll_hd(n, 4, 5, 1), NetlistError); // h > K
  LockResult r = lock_antisat(n, 4, 1);
  CHECK_THROWS_AS(lock_antisat(r.locked, 4, 1), NetlistError);  // already keyed
  CHECK_THROWS_AS(apply_key(r.locked, std::vector<bool>(3, false)),
                  NetlistError);
  Netlist unlocked = apply_key(r.locked, r.key);
  CHECK(unlocked.kis().empty());
  CHECK(unlocked.pis() == n.pis());
}

}  // TEST_SUITE

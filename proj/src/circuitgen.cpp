#include "locklab/circuitgen.hpp"

#include <algorithm>
#include <set>

#include "locklab/rng.hpp"
#include "locklab/transform.hpp"

namespace locklab {

namespace {

GateType pick_type(Rng& rng) {
  // Weighted mix; inverters and buffers are rare, like synthesized logic.
  static constexpr struct {
    GateType type;
    int weight;
  } kMix[] = {
      {GateType::And, 18}, {GateType::Nand, 16}, {GateType::Or, 16},
      {GateType::Nor, 14}, {GateType::Xor, 12},  {GateType::Xnor, 8},
      {GateType::Not, 10}, {GateType::Buf, 2},
  };
  int total = 0;
  for (const auto& m : kMix) total += m.weight;
  int roll = int(rand_below(rng, std::uint64_t(total)));
  for (const auto& m : kMix) {
    roll -= m.weight;
    if (roll < 0) return m.type;
  }
  return GateType::And;
}

}  // namespace

Netlist generate_circuit(const CircuitGenConfig& cfg) {
  if (cfg.num_pis < 2 || cfg.num_gates < 1 || cfg.num_pos < 1)
    throw NetlistError("generate_circuit: degenerate configuration");
  Rng rng(mix_seed(cfg.seed, 0x67656e));

  NetlistBuilder b;
  b.set_name(cfg.name);
  std::vector<std::string> signals;
  for (int i = 0; i < cfg.num_pis; ++i) {
    std::string s = "pi" + std::to_string(i);
    b.add_input(s);
    signals.push_back(s);
  }

  std::set<std::string> unloaded(signals.begin(), signals.end());
  for (int i = 0; i < cfg.num_gates; ++i) {
    GateType type = pick_type(rng);
    int arity = 1;
    if (!is_unary_type(type))
      arity = 2 + int(rand_below(rng, std::uint64_t(cfg.max_arity - 1)));

    std::vector<std::string> fanin;
    std::set<std::string> used;
    for (int a = 0; a < arity; ++a) {
      // Bias toward recent signals so depth grows; sweep up unloaded PIs
      // while gates remain to place them in.
      std::string pick;
      if (cfg.connect_all && !unloaded.empty() &&
          int(unloaded.size()) >= cfg.num_gates - i) {
        auto it = unloaded.begin();
        std::advance(it, rand_below(rng, unloaded.size()));
        pick = *it;
      } else {
        std::uint64_t span = signals.size();
        std::uint64_t r = std::max(rand_below(rng, span), rand_below(rng, span));
        pick = signals[size_t(r)];
      }
      if (used.insert(pick).second) fanin.push_back(pick);
    }
    if (int(fanin.size()) < (is_unary_type(type) ? 1 : 2)) {
      --i;
      continue;  // duplicate collapse left too few distinct inputs; redraw
    }
    std::string name = "g" + std::to_string(i);
    b.add_gate(name, type, fanin);
    signals.push_back(name);
    unloaded.insert(name);
    for (const auto& f : fanin) unloaded.erase(f);
  }

  // Route every unloaded gate output toward a PO; pick the rest at random
  // from the deepest region.
  std::vector<std::string> pos;
  for (const auto& s : unloaded)
    if (s.rfind("g", 0) == 0) pos.push_back(s);
  std::sort(pos.begin(), pos.end());
  std::uint64_t window = std::uint64_t(cfg.num_gates) / 4 + 1;
  for (int tries = 0; int(pos.size()) < cfg.num_pos && tries < 64 * cfg.num_pos;
       ++tries) {
    std::string cand =
        signals[signals.size() - 1 -
                rand_below(rng, std::min<std::uint64_t>(signals.size(), window))];
    if (cand.rfind("g", 0) == 0 &&
        std::find(pos.begin(), pos.end(), cand) == pos.end())
      pos.push_back(cand);
    else
      window = std::min<std::uint64_t>(window + 1, signals.size());
  }
  if (int(pos.size()) < cfg.num_pos)
    throw NetlistError("generate_circuit: not enough distinct output candidates");
  for (const auto& po : pos) b.add_output(po);

  Netlist out = b.build();
  if (cfg.connect_all) {
    // Defensive: generation above should leave nothing dead, but keep the
    // guarantee explicit.
    auto cleaned = remove_dead_logic(out, {false, false});
    out = std::move(cleaned.netlist);
  }
  return out;
}

}  // namespace locklab

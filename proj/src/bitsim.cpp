#include "locklab/bitsim.hpp"

#include <omp.h>

#include <algorithm>
#include <stdexcept>

#include "locklab/rng.hpp"

namespace locklab {

PatternSource exhaustive_patterns(int num_inputs) {
  return [num_inputs](std::uint64_t base, std::vector<Word>& out) {
    out.assign(num_inputs, 0);
    for (int i = 0; i < num_inputs; ++i) {
      if (i < 6) {
        // Within a 64-lane word, input i alternates in runs of 2^i.
        static constexpr Word kMasks[6] = {
            0xaaaaaaaaaaaaaaaaULL, 0xccccccccccccccccULL,
            0xf0f0f0f0f0f0f0f0ULL, 0xff00ff00ff00ff00ULL,
            0xffff0000ffff0000ULL, 0xffffffff00000000ULL};
        out[i] = kMasks[i];
      } else {
        out[i] = ((base >> i) & 1) ? ~Word(0) : Word(0);
      }
    }
  };
}

PatternSource random_patterns(std::uint64_t seed, int num_inputs) {
  return [seed, num_inputs](std::uint64_t base, std::vector<Word>& out) {
    out.assign(num_inputs, 0);
    std::uint64_t block = base >> 6;
    for (int i = 0; i < num_inputs; ++i)
      out[i] = mix_seed(mix_seed(seed, block), std::uint64_t(i) + 0x1000);
  };
}

namespace {

Word eval_gate_word(GateType type, const Gate& g,
                    const std::vector<Word>& values,
                    const std::vector<int>& slot_of_fanin, int fanin_base) {
  auto in = [&](size_t i) { return values[slot_of_fanin[fanin_base + int(i)]]; };
  switch (type) {
    case GateType::And:
    case GateType::Nand: {
      Word acc = ~Word(0);
      for (size_t i = 0; i < g.fanin.size(); ++i) acc &= in(i);
      return type == GateType::And ? acc : ~acc;
    }
    case GateType::Or:
    case GateType::Nor: {
      Word acc = 0;
      for (size_t i = 0; i < g.fanin.size(); ++i) acc |= in(i);
      return type == GateType::Or ? acc : ~acc;
    }
    case GateType::Xor:
    case GateType::Xnor: {
      Word acc = 0;
      for (size_t i = 0; i < g.fanin.size(); ++i) acc ^= in(i);
      return type == GateType::Xor ? acc : ~acc;
    }
    case GateType::Not: return ~in(0);
    case GateType::Buf: return in(0);
    case GateType::Const0: return 0;
    case GateType::Const1: return ~Word(0);
  }
  return 0;
}

struct BatchPlan {
  // Flattened evaluation plan so the inner loop is index arithmetic only.
  std::vector<int> order;            // gate ids, topo
  std::vector<int> gate_slot;        // slot per gate id
  std::vector<int> fanin_base;       // per gate id, offset into fanin_slots
  std::vector<int> fanin_slots;
  std::vector<int> input_slot;       // per unbound input (pattern source order)
  std::vector<std::pair<int, bool>> bound;  // slot -> constant
  std::vector<int> po_slots;
  int num_slots = 0;
};

BatchPlan make_plan(const Netlist& n,
                    const std::vector<InputBinding>& bindings) {
  BatchPlan plan;
  int npi = int(n.pis().size()), nki = int(n.kis().size());
  plan.num_slots = npi + nki + int(n.gates().size());
  auto slot = [&](SignalRef r) {
    switch (r.kind) {
      case SignalRef::Kind::Pi: return r.index;
      case SignalRef::Kind::Ki: return npi + r.index;
      default: return npi + nki + r.index;
    }
  };

  std::vector<bool> is_bound(npi + nki, false);
  for (const auto& bind : bindings) {
    auto ref = n.find(bind.name);
    if (!ref || ref->is_gate())
      throw NetlistError("binding target '" + bind.name + "' is not an input");
    int s = slot(*ref);
    if (is_bound[s])
      throw NetlistError("duplicate binding for input '" + bind.name + "'");
    is_bound[s] = true;
    plan.bound.emplace_back(s, bind.value);
  }
  for (int s = 0; s < npi + nki; ++s)
    if (!is_bound[s]) plan.input_slot.push_back(s);

  plan.order = n.topo_order();
  plan.gate_slot.resize(n.gates().size());
  plan.fanin_base.resize(n.gates().size());
  for (const Gate& g : n.gates()) {
    plan.gate_slot[g.id] = slot({SignalRef::Kind::Gate, g.id});
    plan.fanin_base[g.id] = int(plan.fanin_slots.size());
    for (SignalRef r : g.fanin) plan.fanin_slots.push_back(slot(r));
  }
  for (SignalRef r : n.po_refs()) plan.po_slots.push_back(slot(r));
  return plan;
}

void eval_block(const Netlist& n, const BatchPlan& plan,
                const PatternSource& source, std::uint64_t base,
                std::vector<Word>& values, std::vector<Word>& inputs) {
  source(base, inputs);
  if (inputs.size() != plan.input_slot.size())
    throw NetlistError("pattern source width does not match unbound inputs");
  for (size_t i = 0; i < inputs.size(); ++i)
    values[plan.input_slot[i]] = inputs[i];
  for (const auto& [s, v] : plan.bound) values[s] = v ? ~Word(0) : Word(0);
  for (int id : plan.order) {
    const Gate& g = n.gate(id);
    values[plan.gate_slot[id]] =
        eval_gate_word(g.type, g, values, plan.fanin_slots,
                       plan.fanin_base[id]);
  }
}

BatchResult run_batch(const Netlist& n, const PatternSource& source,
                      std::uint64_t num_patterns,
                      const std::vector<InputBinding>& bindings,
                      bool parallel) {
  BatchPlan plan = make_plan(n, bindings);
  std::uint64_t num_words = (num_patterns + 63) / 64;
  BatchResult res;
  res.po_names = n.pos();
  res.po_words.assign(n.pos().size(),
                      std::vector<Word>(std::size_t(num_words), 0));

  auto body = [&](std::int64_t w, std::vector<Word>& values,
                  std::vector<Word>& inputs) {
    eval_block(n, plan, source, std::uint64_t(w) * 64, values, inputs);
    for (size_t p = 0; p < plan.po_slots.size(); ++p)
      res.po_words[p][std::size_t(w)] = values[plan.po_slots[p]];
  };

  if (parallel) {
#pragma omp parallel
    {
      std::vector<Word> values(plan.num_slots, 0);
      std::vector<Word> inputs;
#pragma omp for schedule(static)
      for (std::int64_t w = 0; w < std::int64_t(num_words); ++w)
        body(w, values, inputs);
    }
  } else {
    std::vector<Word> values(plan.num_slots, 0);
    std::vector<Word> inputs;
    for (std::int64_t w = 0; w < std::int64_t(num_words); ++w)
      body(w, values, inputs);
  }
  return res;
}

}  // namespace

BatchResult simulate_batch(const Netlist& n, const PatternSource& source,
                           std::uint64_t num_patterns,
                           const std::vector<InputBinding>& bindings) {
  return run_batch(n, source, num_patterns, bindings, true);
}

namespace ref {
BatchResult simulate_batch(const Netlist& n, const PatternSource& source,
                           std::uint64_t num_patterns,
                           const std::vector<InputBinding>& bindings) {
  return run_batch(n, source, num_patterns, bindings, false);
}
}  // namespace ref

}  // namespace locklab

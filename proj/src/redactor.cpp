#include "locklab/redactor.hpp"

#include <algorithm>
#include <bit>
#include <set>

#include "locklab/bitsim.hpp"
#include "locklab/transform.hpp"

namespace locklab {

namespace {

bool is_xor_type(GateType t) {
  return t == GateType::Xor || t == GateType::Xnor;
}

GateClass class_of(const PredictionMap& preds, const std::string& name) {
  auto it = preds.nodes.find(name);
  return it == preds.nodes.end() ? GateClass::Design : it->second.cls;
}

// Rebuilds without the pass-through buffer `buf_id`, giving its driver the
// buffer's (output) name.
Netlist splice_out_buffer(const Netlist& n, int buf_id) {
  const Gate& buf = n.gate(buf_id);
  const std::string to = buf.name;
  const std::string from = n.gate(buf.fanin[0].index).name;
  auto mapped = [&](const std::string& s) { return s == from ? to : s; };

  NetlistBuilder b;
  b.set_name(n.name());
  for (const std::string& pi : n.pis()) b.add_input(pi);
  for (const std::string& ki : n.kis()) b.add_key_input(ki);
  for (int id : n.topo_order()) {
    if (id == buf_id) continue;
    const Gate& g = n.gate(id);
    std::vector<std::string> fanin;
    fanin.reserve(g.fanin.size());
    for (const SignalRef& r : g.fanin) fanin.push_back(mapped(n.signal_name(r)));
    b.add_gate(mapped(g.name), g.type, fanin);
  }
  for (const std::string& po : n.pos()) b.add_output(po);
  return b.build();
}

}  // namespace

std::vector<int> find_integration_gates(const Netlist& n,
                                        const PredictionMap& preds) {
  std::vector<GateClass> cls = prediction_classes(n, preds);
  std::vector<char> chosen(n.gates().size(), 0);
  std::vector<int> out;
  for (int id : n.topo_order()) {
    const Gate& g = n.gate(id);
    if (!is_protection_class(cls[size_t(id)]) || !is_xor_type(g.type)) continue;
    bool design_side = false;
    bool prot_side = false;
    bool via_splice = false;
    for (const SignalRef& in : g.fanin) {
      if (in.kind == SignalRef::Kind::Ki) {
        prot_side = true;
      } else if (in.is_gate()) {
        if (cls[size_t(in.index)] == GateClass::Design) design_side = true;
        else if (chosen[size_t(in.index)]) via_splice = true;
        else prot_side = true;
      }
    }
    if (prot_side && (design_side || via_splice)) {
      chosen[size_t(id)] = 1;
      out.push_back(id);
    }
  }
  if (out.empty())
    throw NetlistError(
        "no integration gate: the classification marks no splice point");
  std::sort(out.begin(), out.end());
  return out;
}

Netlist remove_protection(const Netlist& n, const PredictionMap& preds) {
  std::vector<GateClass> cls = prediction_classes(n, preds);
  bool any_protection = false;
  for (GateClass c : cls) any_protection = any_protection || is_protection_class(c);
  if (!any_protection && n.kis().empty()) return n;

  std::vector<int> integration = find_integration_gates(n, preds);
  std::set<int> integration_set(integration.begin(), integration.end());

  // Pinning the protection-side fanins to 0 turns each splice XOR into a
  // pass-through of its design side; the fold then erases the whole
  // protection cone as dead logic.
  std::map<std::string, bool> pins;
  for (int id : integration) {
    for (const SignalRef& in : n.gate(id).fanin) {
      if (in.kind == SignalRef::Kind::Ki)
        pins[n.kis()[size_t(in.index)]] = false;
      else if (in.is_gate() && is_protection_class(cls[size_t(in.index)]) &&
               !integration_set.count(in.index))
        pins[n.gate(in.index).name] = false;
    }
  }
  if (pins.empty())
    throw NetlistError("integration gates expose no protection-side net to pin");

  Netlist folded = constant_propagate(n, pins);
  DeadLogicOptions dead;
  dead.drop_unloaded_pis = false;
  dead.drop_unloaded_kis = true;
  Netlist out = remove_dead_logic(folded, dead).netlist;

  // When the splice point drove a PO, the fold leaves a protection-named
  // buffer aliasing the design driver on that output. Splice it out so the
  // driver gets its output name back.
  for (;;) {
    int alias = -1;
    for (const Gate& g : out.gates()) {
      if (g.type != GateType::Buf || g.fanin.size() != 1) continue;
      if (!is_protection_class(class_of(preds, g.name))) continue;
      const SignalRef src = g.fanin[0];
      if (!src.is_gate()) continue;
      const Gate& driver = out.gate(src.index);
      if (class_of(preds, driver.name) != GateClass::Design) continue;
      if (out.is_po_net(driver.name)) continue;
      alias = g.id;
      break;
    }
    if (alias < 0) break;
    out = splice_out_buffer(out, alias);
  }

  if (!out.kis().empty()) {
    std::string msg = "key inputs survive the removal:";
    int shown = 0;
    for (const std::string& ki : out.kis()) {
      if (++shown > 4) {
        msg += " ...";
        break;
      }
      msg += " " + ki + " ->";
      const std::vector<int>& lds = out.loads(*out.find(ki));
      for (std::size_t i = 0; i < lds.size() && i < 4; ++i)
        msg += " " + out.gate(lds[i]).name;
      msg += ";";
    }
    throw NetlistError(msg);
  }
  return out;
}

const char* equiv_status_name(EquivStatus s) {
  switch (s) {
    case EquivStatus::EquivalentExhaustive: return "equivalent_exhaustive";
    case EquivStatus::EquivalentSampled: return "equivalent_sampled";
    case EquivStatus::NotEquivalent: return "not_equivalent";
  }
  return "unknown";
}

namespace {

// Adapts a pattern source laid out in sorted-PI-name order to the netlist's
// own PI order, shifted by `offset` patterns. Stateless, safe to call from
// simulation worker threads.
PatternSource reorder_source(const Netlist& n,
                             const std::vector<std::string>& canon,
                             const PatternSource& src, std::uint64_t offset) {
  std::vector<std::size_t> rank(n.pis().size());
  for (std::size_t i = 0; i < n.pis().size(); ++i)
    rank[i] = std::size_t(std::lower_bound(canon.begin(), canon.end(),
                                           n.pis()[i]) -
                          canon.begin());
  return [rank, src, offset](std::uint64_t base, std::vector<Word>& out) {
    std::vector<Word> canon_words;
    src(offset + base, canon_words);
    out.assign(rank.size(), 0);
    for (std::size_t i = 0; i < rank.size(); ++i) out[i] = canon_words[rank[i]];
  };
}

// PI assignment for pattern index p, keyed by sorted name.
std::map<std::string, bool> assignment_at(const std::vector<std::string>& canon,
                                          const PatternSource& src,
                                          std::uint64_t p) {
  std::vector<Word> words;
  src(p & ~std::uint64_t{63}, words);
  const unsigned lane = unsigned(p & 63);
  std::map<std::string, bool> a;
  for (std::size_t i = 0; i < canon.size(); ++i)
    a[canon[i]] = (words[i] >> lane) & 1;
  return a;
}

std::vector<std::string> sorted_names(const std::vector<std::string>& v) {
  std::vector<std::string> s = v;
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace

EquivalenceVerdict check_equivalence(const Netlist& a, const Netlist& b,
                                     const EquivBudget& budget) {
  if (!a.kis().empty() || !b.kis().empty())
    throw NetlistError("equivalence checking expects key-free netlists");
  const std::vector<std::string> pis = sorted_names(a.pis());
  if (pis != sorted_names(b.pis()))
    throw NetlistError("primary input name sets differ");
  if (sorted_names(a.pos()) != sorted_names(b.pos()))
    throw NetlistError("primary output name sets differ");

  const int npi = int(pis.size());
  const bool exhaustive =
      npi < 64 && (std::uint64_t{1} << npi) <= budget.max_exhaustive;
  const std::uint64_t total =
      exhaustive ? std::uint64_t{1} << npi : budget.random_vectors;
  const PatternSource canon =
      exhaustive ? exhaustive_patterns(npi) : random_patterns(budget.seed, npi);

  std::vector<std::size_t> b_po(a.pos().size());
  {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < b.pos().size(); ++i) index[b.pos()[i]] = i;
    for (std::size_t i = 0; i < a.pos().size(); ++i)
      b_po[i] = index.at(a.pos()[i]);
  }

  EquivalenceVerdict v;
  const std::uint64_t chunk = std::uint64_t{1} << 16;
  for (std::uint64_t base = 0; base < total; base += chunk) {
    const std::uint64_t len = std::min(chunk, total - base);
    BatchResult ra = simulate_batch(a, reorder_source(a, pis, canon, base), len);
    BatchResult rb = simulate_batch(b, reorder_source(b, pis, canon, base), len);
    const std::uint64_t words = (len + 63) / 64;
    for (std::uint64_t w = 0; w < words; ++w) {
      Word diff = 0;
      for (std::size_t p = 0; p < ra.po_words.size(); ++p)
        diff |= ra.po_words[p][w] ^ rb.po_words[b_po[p]][w];
      if (const std::uint64_t rem = len - w * 64; rem < 64)
        diff &= (Word{1} << rem) - 1;  // high lanes of a partial word are junk
      if (!diff) continue;
      const std::uint64_t p =
          base + w * 64 + std::uint64_t(std::countr_zero(diff));
      v.status = EquivStatus::NotEquivalent;
      v.vectors_checked = p + 1;
      v.counterexample = assignment_at(pis, canon, p);
      std::map<std::string, bool> oa = a.simulate(v.counterexample);
      std::map<std::string, bool> ob = b.simulate(v.counterexample);
      if (oa == ob)
        throw NetlistError("counterexample failed single-vector re-simulation");
      return v;
    }
  }
  v.status = exhaustive ? EquivStatus::EquivalentExhaustive
                        : EquivStatus::EquivalentSampled;
  v.vectors_checked = total;
  return v;
}

}  // namespace locklab

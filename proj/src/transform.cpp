#include "locklab/transform.hpp"

#include <algorithm>
#include <cassert>

#include "locklab/rng.hpp"

namespace locklab {

namespace {

// Resolution state of a signal during propagation.
struct Folded {
  enum class Kind { Live, Const, Alias } kind = Kind::Live;
  bool value = false;       // Const
  std::string target;       // Alias: name of a surviving signal
};

}  // namespace

Netlist constant_propagate(const Netlist& n,
                           const std::map<std::string, bool>& pins) {
  for (const auto& [name, value] : pins) {
    auto ref = n.find(name);
    if (!ref) throw NetlistError("pin target '" + name + "' does not exist");
    if (ref->is_input() && n.is_po_net(name))
      throw NetlistError("pinning input '" + name +
                         "' that is referenced as an output is unsupported");
  }

  // State by signal name. Live/Alias both carry the name of the surviving
  // signal to read instead; unpinned inputs resolve to themselves.
  std::map<std::string, Folded> state;
  auto resolved = [&](const std::string& name) -> Folded {
    auto it = state.find(name);
    if (it == state.end()) return Folded{Folded::Kind::Live, false, name};
    return it->second;
  };

  for (const auto& s : n.pis())
    if (auto it = pins.find(s); it != pins.end())
      state[s] = Folded{Folded::Kind::Const, it->second, {}};
  for (const auto& s : n.kis())
    if (auto it = pins.find(s); it != pins.end())
      state[s] = Folded{Folded::Kind::Const, it->second, {}};

  struct OutGate {
    std::string name;
    GateType type;
    std::vector<std::string> fanin;
  };
  std::vector<OutGate> out_gates;

  for (int id : n.topo_order()) {
    const Gate& g = n.gate(id);
    if (auto it = pins.find(g.name); it != pins.end()) {
      state[g.name] = Folded{Folded::Kind::Const, it->second, {}};
      continue;
    }

    std::vector<std::string> live;  // resolved surviving fanin names
    int num_true = 0, num_false = 0;
    for (SignalRef r : g.fanin) {
      Folded f = resolved(n.signal_name(r));
      if (f.kind == Folded::Kind::Const)
        ++(f.value ? num_true : num_false);
      else
        live.push_back(f.target);
    }

    if (num_true == 0 && num_false == 0) {
      // No constants involved; the gate survives as-is (with redirected
      // fanins when a feeder collapsed to a pass-through).
      out_gates.push_back(OutGate{g.name, g.type, std::move(live)});
      state[g.name] = Folded{Folded::Kind::Live, false, g.name};
      continue;
    }

    auto set_const = [&](bool v) {
      state[g.name] = Folded{Folded::Kind::Const, v, {}};
    };
    auto set_alias = [&](const std::string& t) {
      state[g.name] = Folded{Folded::Kind::Alias, false, t};
    };
    auto set_live = [&](GateType t, std::vector<std::string> fanin) {
      out_gates.push_back(OutGate{g.name, t, std::move(fanin)});
      state[g.name] = Folded{Folded::Kind::Live, false, g.name};
    };

    switch (g.type) {
      case GateType::And:
      case GateType::Nand: {
        bool inv = g.type == GateType::Nand;
        if (num_false > 0)
          set_const(inv);
        else if (live.empty())
          set_const(!inv);
        else if (live.size() == 1)
          inv ? set_live(GateType::Not, {live[0]}) : set_alias(live[0]);
        else
          set_live(g.type, std::move(live));
        break;
      }
      case GateType::Or:
      case GateType::Nor: {
        bool inv = g.type == GateType::Nor;
        if (num_true > 0)
          set_const(!inv);
        else if (live.empty())
          set_const(inv);
        else if (live.size() == 1)
          inv ? set_live(GateType::Not, {live[0]}) : set_alias(live[0]);
        else
          set_live(g.type, std::move(live));
        break;
      }
      case GateType::Xor:
      case GateType::Xnor: {
        bool invert = (num_true % 2 == 1) != (g.type == GateType::Xnor);
        if (live.empty())
          set_const(invert);
        else if (live.size() == 1)
          invert ? set_live(GateType::Not, {live[0]}) : set_alias(live[0]);
        else
          set_live(invert ? GateType::Xnor : GateType::Xor, std::move(live));
        break;
      }
      case GateType::Not: {
        set_const(!(num_true > 0));
        break;
      }
      case GateType::Buf: {
        set_const(num_true > 0);
        break;
      }
      case GateType::Const0: set_const(false); break;
      case GateType::Const1: set_const(true); break;
    }
  }

  // Rebuild. POs whose driver folded away get a BUF (pass-through) or a CONST
  // pseudo-gate under the original net name, keeping the interface intact.
  NetlistBuilder b;
  b.set_name(n.name());
  for (const auto& s : n.pis()) b.add_input(s);
  for (const auto& s : n.kis()) b.add_key_input(s);
  for (auto& og : out_gates) b.add_gate(og.name, og.type, std::move(og.fanin));
  for (const auto& po : n.pos()) {
    Folded f = resolved(po);
    if (f.kind == Folded::Kind::Const) {
      if (!b.has_signal(po))
        b.add_gate(po, f.value ? GateType::Const1 : GateType::Const0, {});
    } else if (f.kind == Folded::Kind::Alias) {
      if (!b.has_signal(po)) b.add_gate(po, GateType::Buf, {f.target});
    }
    b.add_output(po);
  }
  return b.build();
}

DeadLogicResult remove_dead_logic(const Netlist& n,
                                  const DeadLogicOptions& opts) {
  // Mark gates reachable backwards from the POs.
  std::vector<bool> live(n.gates().size(), false);
  std::vector<int> stack;
  for (SignalRef r : n.po_refs())
    if (r.is_gate() && !live[r.index]) {
      live[r.index] = true;
      stack.push_back(r.index);
    }
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    for (SignalRef r : n.gate(id).fanin)
      if (r.is_gate() && !live[r.index]) {
        live[r.index] = true;
        stack.push_back(r.index);
      }
  }

  std::vector<bool> input_used_pi(n.pis().size(), false);
  std::vector<bool> input_used_ki(n.kis().size(), false);
  for (const Gate& g : n.gates()) {
    if (!live[g.id]) continue;
    for (SignalRef r : g.fanin) {
      if (r.kind == SignalRef::Kind::Pi) input_used_pi[r.index] = true;
      if (r.kind == SignalRef::Kind::Ki) input_used_ki[r.index] = true;
    }
  }
  for (SignalRef r : n.po_refs()) {
    if (r.kind == SignalRef::Kind::Pi) input_used_pi[r.index] = true;
    if (r.kind == SignalRef::Kind::Ki) input_used_ki[r.index] = true;
  }

  DeadLogicResult res;
  NetlistBuilder b;
  b.set_name(n.name());
  for (int i = 0; i < int(n.pis().size()); ++i) {
    if (input_used_pi[i] || !opts.drop_unloaded_pis)
      b.add_input(n.pis()[i]);
    else
      res.dropped_pis.push_back(n.pis()[i]);
  }
  for (int i = 0; i < int(n.kis().size()); ++i) {
    if (input_used_ki[i] || !opts.drop_unloaded_kis)
      b.add_key_input(n.kis()[i]);
    else
      res.dropped_kis.push_back(n.kis()[i]);
  }
  for (const Gate& g : n.gates()) {
    if (!live[g.id]) continue;
    std::vector<std::string> fanin;
    fanin.reserve(g.fanin.size());
    for (SignalRef r : g.fanin) fanin.push_back(n.signal_name(r));
    b.add_gate(g.name, g.type, std::move(fanin));
  }
  for (const auto& po : n.pos()) b.add_output(po);
  res.netlist = b.build();
  return res;
}

std::vector<RewriteRule> all_rewrite_rules() {
  return {RewriteRule::XorExpand, RewriteRule::XnorToNotXor,
          RewriteRule::DeMorgan, RewriteRule::NotPairCollapse,
          RewriteRule::AssocRebalance};
}

namespace {

bool rule_applies(const Netlist& n, const Gate& g, RewriteRule rule) {
  switch (rule) {
    case RewriteRule::XorExpand:
      return (g.type == GateType::Xor || g.type == GateType::Xnor) &&
             g.fanin.size() == 2;
    case RewriteRule::XnorToNotXor:
      return g.type == GateType::Xnor;
    case RewriteRule::DeMorgan:
      return g.type == GateType::Nand || g.type == GateType::Nor;
    case RewriteRule::NotPairCollapse:
      return g.type == GateType::Not && g.fanin[0].is_gate() &&
             n.gate(g.fanin[0].index).type == GateType::Not;
    case RewriteRule::AssocRebalance:
      return (g.type == GateType::And || g.type == GateType::Or ||
              g.type == GateType::Xor) &&
             g.fanin.size() >= 3;
  }
  return false;
}

struct PassContext {
  const Netlist& n;
  NetlistBuilder& b;
  std::map<std::string, std::string>& origin;
  std::string site;  // gate whose rewrite is being emitted

  std::string fresh(const char* tag) {
    std::string name = b.fresh_name(site + "_" + tag);
    origin[name] = origin.at(site);
    return name;
  }
};

// Builds a balanced 2-input tree over `leaves`, pairing in ascending index
// order. Returns the name of the root's output.
std::string emit_balanced_tree(PassContext& ctx, GateType type,
                               std::vector<std::string> leaves,
                               const std::string& root_name) {
  while (leaves.size() > 2) {
    std::vector<std::string> next;
    for (size_t i = 0; i + 1 < leaves.size(); i += 2) {
      std::string t = ctx.fresh("t");
      ctx.b.add_gate(t, type, {leaves[i], leaves[i + 1]});
      next.push_back(t);
    }
    if (leaves.size() % 2) next.push_back(leaves.back());
    leaves = std::move(next);
  }
  ctx.b.add_gate(root_name, type, {leaves[0], leaves[1]});
  return root_name;
}

void emit_rewrite(PassContext& ctx, const Gate& g, RewriteRule rule) {
  const Netlist& n = ctx.n;
  std::vector<std::string> ins;
  for (SignalRef r : g.fanin) ins.push_back(n.signal_name(r));

  switch (rule) {
    case RewriteRule::XorExpand: {
      // a^b = (a & !b) | (!a & b); for XNOR the complement via NOR.
      std::string na = ctx.fresh("na"), nb = ctx.fresh("nb");
      std::string t1 = ctx.fresh("p"), t2 = ctx.fresh("q");
      ctx.b.add_gate(na, GateType::Not, {ins[0]});
      ctx.b.add_gate(nb, GateType::Not, {ins[1]});
      ctx.b.add_gate(t1, GateType::And, {ins[0], nb});
      ctx.b.add_gate(t2, GateType::And, {na, ins[1]});
      ctx.b.add_gate(g.name,
                     g.type == GateType::Xor ? GateType::Or : GateType::Nor,
                     {t1, t2});
      return;
    }
    case RewriteRule::XnorToNotXor: {
      std::string x = ctx.fresh("x");
      ctx.b.add_gate(x, GateType::Xor, ins);
      ctx.b.add_gate(g.name, GateType::Not, {x});
      return;
    }
    case RewriteRule::DeMorgan: {
      std::vector<std::string> nots;
      for (const auto& in : ins) {
        std::string ni = ctx.fresh("n");
        ctx.b.add_gate(ni, GateType::Not, {in});
        nots.push_back(ni);
      }
      GateType t =
          g.type == GateType::Nand ? GateType::Or : GateType::And;
      if (nots.size() == 2)
        ctx.b.add_gate(g.name, t, nots);
      else
        emit_balanced_tree(ctx, t, nots, g.name);
      return;
    }
    case RewriteRule::NotPairCollapse: {
      const Gate& inner = n.gate(g.fanin[0].index);
      ctx.b.add_gate(g.name, GateType::Buf,
                     {n.signal_name(inner.fanin[0])});
      return;
    }
    case RewriteRule::AssocRebalance: {
      emit_balanced_tree(ctx, g.type, ins, g.name);
      return;
    }
  }
}

}  // namespace

RewriteResult rewrite_augment_traced(const Netlist& n,
                                     const std::vector<RewriteRule>& rules,
                                     std::uint64_t seed, int passes) {
  Netlist cur = n;
  std::map<std::string, std::string> origin;
  for (const Gate& g : n.gates()) origin[g.name] = g.name;

  for (int pass = 0; pass < passes; ++pass) {
    Rng rng(mix_seed(seed, std::uint64_t(pass)));
    NetlistBuilder b;
    b.set_name(cur.name());
    for (const auto& s : cur.pis()) b.add_input(s);
    for (const auto& s : cur.kis()) b.add_key_input(s);

    std::map<std::string, std::string> next_origin;
    for (const Gate& g : cur.gates()) next_origin[g.name] = origin.at(g.name);
    PassContext ctx{cur, b, next_origin, {}};

    for (const Gate& g : cur.gates()) {
      std::vector<RewriteRule> applicable;
      for (RewriteRule r : rules)
        if (rule_applies(cur, g, r)) applicable.push_back(r);
      // Half of the applicable sites are rewritten; which ones depends only
      // on the seed.
      if (!applicable.empty() && rand_bit(rng)) {
        RewriteRule pick =
            applicable[size_t(rand_below(rng, applicable.size()))];
        ctx.site = g.name;
        emit_rewrite(ctx, g, pick);
      } else {
        std::vector<std::string> fanin;
        for (SignalRef r : g.fanin) fanin.push_back(cur.signal_name(r));
        b.add_gate(g.name, g.type, std::move(fanin));
      }
    }
    for (const auto& po : cur.pos()) b.add_output(po);
    cur = b.build();
    origin = std::move(next_origin);
  }
  return RewriteResult{std::move(cur), std::move(origin)};
}

Netlist rewrite_augment(const Netlist& n,
                        const std::vector<RewriteRule>& rules,
                        std::uint64_t seed, int passes) {
  return rewrite_augment_traced(n, rules, seed, passes).netlist;
}

}  // namespace locklab

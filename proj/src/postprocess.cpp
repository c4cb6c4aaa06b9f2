#include "locklab/postprocess.hpp"

#include <cstdint>
#include <fstream>

namespace locklab {

namespace {

// Static cone facts, one topological sweep. Cone PI sets are bitsets so the
// subset tests in the rules stay cheap on repeated sweeps.
struct ConeFacts {
  int pi_words = 0;
  std::vector<char> ki_in_cone;
  std::vector<char> direct_ki;
  std::vector<char> has_gate_fanin;
  std::vector<std::vector<std::uint64_t>> cone_pis;
};

ConeFacts cone_facts(const Netlist& n) {
  const int ng = static_cast<int>(n.gates().size());
  ConeFacts f;
  f.pi_words = (static_cast<int>(n.pis().size()) + 63) / 64;
  f.ki_in_cone.assign(ng, 0);
  f.direct_ki.assign(ng, 0);
  f.has_gate_fanin.assign(ng, 0);
  f.cone_pis.assign(ng, std::vector<std::uint64_t>(f.pi_words, 0));
  for (int g : n.topo_order()) {
    for (const SignalRef& in : n.gate(g).fanin) {
      switch (in.kind) {
        case SignalRef::Kind::Pi:
          f.cone_pis[g][in.index / 64] |= std::uint64_t{1} << (in.index % 64);
          break;
        case SignalRef::Kind::Ki:
          f.direct_ki[g] = 1;
          f.ki_in_cone[g] = 1;
          break;
        case SignalRef::Kind::Gate:
          f.has_gate_fanin[g] = 1;
          f.ki_in_cone[g] |= f.ki_in_cone[in.index];
          for (int w = 0; w < f.pi_words; ++w)
            f.cone_pis[g][w] |= f.cone_pis[in.index][w];
          break;
      }
    }
  }
  return f;
}

bool any_bit(const std::vector<std::uint64_t>& a) {
  for (std::uint64_t w : a)
    if (w) return true;
  return false;
}

bool subset_of(const std::vector<std::uint64_t>& a,
               const std::vector<std::uint64_t>& b) {
  for (std::size_t w = 0; w < a.size(); ++w)
    if (a[w] & ~b[w]) return false;
  return true;
}

}  // namespace

std::vector<GateClass> prediction_classes(const Netlist& n,
                                          const PredictionMap& preds) {
  const bool antisat = preds.scheme == LockScheme::AntiSat;
  if (preds.nodes.size() != n.gates().size())
    throw NetlistError("prediction map does not cover the netlist: " +
                       std::to_string(preds.nodes.size()) + " entries for " +
                       std::to_string(n.gates().size()) + " gates");
  std::vector<GateClass> cls(n.gates().size(), GateClass::Design);
  for (const Gate& g : n.gates()) {
    auto it = preds.nodes.find(g.name);
    if (it == preds.nodes.end())
      throw NetlistError("no prediction for gate '" + g.name + "'");
    GateClass c = it->second.cls;
    bool ok = antisat ? (c == GateClass::Design || c == GateClass::AntiSat)
                      : (c != GateClass::AntiSat);
    if (!ok)
      throw NetlistError("class '" + std::string(gate_class_name(c)) +
                         "' is not valid under scheme '" +
                         lock_scheme_name(preds.scheme) + "'");
    cls[g.id] = c;
  }
  return cls;
}

namespace {

// Can the gate's output reach a `target`-classified gate through loads?
std::vector<char> reaches_class(const Netlist& n,
                                const std::vector<GateClass>& cls,
                                GateClass target) {
  std::vector<char> reach(n.gates().size(), 0);
  const std::vector<int>& order = n.topo_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    for (int load : n.loads(SignalRef{SignalRef::Kind::Gate, *it})) {
      if (cls[load] == target || reach[load]) {
        reach[*it] = 1;
        break;
      }
    }
  }
  return reach;
}

// XOR/XNOR mixing a design-classified gate fanin with a protection-side
// fanin (key input or protection-classified gate): the shape of the splice
// point where a flip signal enters the design. Bare-PI fanins do not count
// as the design side; key comparators share that shape but never splice.
bool integration_shaped(const Gate& g, const std::vector<GateClass>& cls) {
  if (g.type != GateType::Xor && g.type != GateType::Xnor) return false;
  bool design_side = false;
  bool prot_side = false;
  for (const SignalRef& in : g.fanin) {
    if (in.is_gate()) {
      if (cls[in.index] == GateClass::Design)
        design_side = true;
      else
        prot_side = true;
    } else if (in.kind == SignalRef::Kind::Ki) {
      prot_side = true;
    }
  }
  return design_side && prot_side;
}

// The key-compare layer is the only place a gate reads a primary input and a
// key input side by side; it anchors the protected set X independently of
// what the classifier said about it.
bool reads_pi_and_ki(const Gate& g) {
  bool pi = false;
  bool ki = false;
  for (const SignalRef& in : g.fanin) {
    pi |= in.kind == SignalRef::Kind::Pi;
    ki |= in.kind == SignalRef::Kind::Ki;
  }
  return pi && ki;
}

void finish(RectifyResult& res, const Netlist& n, const PredictionMap& in,
            const std::vector<GateClass>& cls) {
  res.preds.scheme = in.scheme;
  for (const Gate& g : n.gates())
    res.preds.nodes[g.name] = {cls[g.id], in.nodes.at(g.name).confidence};
}

}  // namespace

PredictionMap predictions_from_labels(const GroundTruthLabels& labels,
                                      LockScheme scheme) {
  PredictionMap p;
  p.scheme = scheme;
  for (const auto& [gate, cls] : labels) p.nodes[gate] = {cls, 1.0};
  return p;
}

RectifyResult rectify_antisat(const Netlist& n, const PredictionMap& preds) {
  if (preds.scheme != LockScheme::AntiSat)
    throw NetlistError("rectify_antisat got a '" +
                       std::string(lock_scheme_name(preds.scheme)) +
                       "' prediction map");
  std::vector<GateClass> cls = prediction_classes(n, preds);
  const ConeFacts cf = cone_facts(n);
  const int ng = static_cast<int>(n.gates().size());
  RectifyResult res;

  bool changed = true;
  while (changed) {
    if (res.iterations++ > ng)
      throw NetlistError("rectification did not settle within the node budget");
    changed = false;
    // Per-sweep cone aggregates over the evolving classes. Fanins precede
    // their readers in topo order, so values fold forward within the sweep.
    std::vector<char> pure_antisat(ng, 0);
    std::vector<char> design_in(ng, 0);
    for (int g : n.topo_order()) {
      const Gate& gate = n.gate(g);
      char pure = 1;
      char des = 0;
      for (const SignalRef& in : gate.fanin) {
        if (!in.is_gate()) continue;
        pure &= static_cast<char>(cls[in.index] == GateClass::AntiSat &&
                                  pure_antisat[in.index]);
        des |= static_cast<char>(cls[in.index] == GateClass::Design ||
                                 design_in[in.index]);
      }
      pure_antisat[g] = pure;
      design_in[g] = des;

      GateClass after = cls[g];
      const char* rule = nullptr;
      if (cls[g] == GateClass::AntiSat) {
        if (!cf.ki_in_cone[g]) {
          after = GateClass::Design;
          rule = "drop-no-ki";
        } else if (des && !integration_shaped(gate, cls)) {
          // Key influence arrives only through design logic it also depends
          // on: downstream of the splice, not inside the protection block.
          after = GateClass::Design;
          rule = "drop-design-cone";
        }
      } else {
        // A keyed cone with no design logic inside can only be the flip
        // block; an XOR mixing its output into design logic is the splice,
        // whatever the model called it.
        auto keyed_pure_fanin = [&] {
          for (const SignalRef& in : gate.fanin)
            if (in.is_gate() && cls[in.index] == GateClass::AntiSat &&
                cf.ki_in_cone[in.index] && !design_in[in.index])
              return true;
          return false;
        };
        if (cf.has_gate_fanin[g] && pure) {
          after = GateClass::AntiSat;
          rule = "absorb-pure-cone";
        } else if (cf.direct_ki[g]) {
          after = GateClass::AntiSat;
          rule = "absorb-direct-ki";
        } else if (integration_shaped(gate, cls) && keyed_pure_fanin()) {
          after = GateClass::AntiSat;
          rule = "absorb-splice";
        }
      }
      if (after != cls[g]) {
        res.log.push_back({gate.name, cls[g], after, rule});
        cls[g] = after;
        changed = true;
      }
    }
  }
  finish(res, n, preds, cls);
  return res;
}

std::set<std::string> infer_protected_inputs(const Netlist& n,
                                             const PredictionMap& preds) {
  if (preds.scheme == LockScheme::AntiSat)
    throw NetlistError("protected inputs are only defined for stripped-"
                       "functionality schemes");
  std::vector<GateClass> cls = prediction_classes(n, preds);
  std::set<std::string> x;
  bool any_restore = false;
  for (const Gate& g : n.gates()) {
    if (cls[g.id] == GateClass::Restore) any_restore = true;
    if (cls[g.id] != GateClass::Restore && !reads_pi_and_ki(g)) continue;
    for (const SignalRef& in : g.fanin)
      if (in.kind == SignalRef::Kind::Pi) x.insert(n.pis()[in.index]);
  }
  if (!any_restore)
    throw NetlistError("nothing classified restore; cannot infer protected "
                       "inputs");
  return x;
}

RectifyResult rectify_sfll(const Netlist& n, const PredictionMap& preds) {
  if (preds.scheme == LockScheme::AntiSat)
    throw NetlistError("rectify_sfll got an '" +
                       std::string(lock_scheme_name(preds.scheme)) +
                       "' prediction map");
  std::vector<GateClass> cls = prediction_classes(n, preds);
  const ConeFacts cf = cone_facts(n);
  const int ng = static_cast<int>(n.gates().size());
  RectifyResult res;

  // Class-independent anchor for the restore side: the cancel stage is an
  // XOR reading a keyed cone supported only by inputs the key-compare layer
  // touches. Folding it into the reachability test keeps one bad label on
  // the cancel gate from unravelling the perturb rules.
  std::vector<char> reach_cancel(ng, 0);
  {
    std::vector<std::uint64_t> xs(cf.pi_words, 0);
    for (const Gate& g : n.gates())
      if (reads_pi_and_ki(g))
        for (const SignalRef& in : g.fanin)
          if (in.kind == SignalRef::Kind::Pi)
            xs[in.index / 64] |= std::uint64_t{1} << (in.index % 64);
    for (const Gate& g : n.gates()) {
      if (g.type != GateType::Xor && g.type != GateType::Xnor) continue;
      for (const SignalRef& in : g.fanin)
        if (in.is_gate() && cf.ki_in_cone[in.index] &&
            any_bit(cf.cone_pis[in.index]) &&
            subset_of(cf.cone_pis[in.index], xs))
          reach_cancel[g.id] = 1;
    }
    const std::vector<int>& order = n.topo_order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const SignalRef ref{SignalRef::Kind::Gate, *it};
      for (int l : n.loads(ref)) reach_cancel[*it] |= reach_cancel[l];
    }
  }

  bool changed = true;
  while (changed) {
    if (res.iterations++ > ng)
      throw NetlistError("rectification did not settle within the node budget");
    changed = false;

    // Protected inputs X: fed by the current restore set plus the
    // class-independent key-compare shape, so one bad label on a compare
    // gate cannot evict its input and cascade into the perturb rules.
    std::vector<std::uint64_t> x(cf.pi_words, 0);
    bool any_restore = false;
    for (const Gate& g : n.gates()) {
      if (cls[g.id] == GateClass::Restore) any_restore = true;
      if (cls[g.id] != GateClass::Restore && !reads_pi_and_ki(g)) continue;
      for (const SignalRef& in : g.fanin)
        if (in.kind == SignalRef::Kind::Pi)
          x[in.index / 64] |= std::uint64_t{1} << (in.index % 64);
    }
    if (!any_restore)
      throw NetlistError("nothing classified restore; cannot rectify");

    const std::vector<char> reach_restore =
        reaches_class(n, cls, GateClass::Restore);
    std::vector<char> perturb_in(ng, 0);
    std::vector<char> design_in(ng, 0);
    for (int g : n.topo_order()) {
      const Gate& gate = n.gate(g);
      char pert = 0;
      char des = 0;
      for (const SignalRef& in : gate.fanin) {
        if (!in.is_gate()) continue;
        pert |= static_cast<char>(cls[in.index] == GateClass::Perturb ||
                                  perturb_in[in.index]);
        des |= static_cast<char>(cls[in.index] == GateClass::Design ||
                                 design_in[in.index]);
      }
      perturb_in[g] = pert;
      design_in[g] = des;

      const bool to_restore = reach_restore[g] || reach_cancel[g];
      const bool pis_protected =
          any_bit(cf.cone_pis[g]) && subset_of(cf.cone_pis[g], x);
      // A perturb claim stands when the gate feeds the restore side and is
      // either the splice XOR itself or a pure function of protected inputs.
      auto perturb_holds = [&] {
        if (!to_restore) return false;
        if (integration_shaped(gate, cls)) return true;
        return pis_protected && !cf.ki_in_cone[g];
      };
      // Hard-coded key bits fold to inverters and buffers on single
      // protected inputs; they sit below the perturb cone, so recognize them
      // by their loads instead.
      auto fold_shaped = [&] {
        if (!is_unary_type(gate.type) || gate.fanin.size() != 1 ||
            gate.fanin[0].kind != SignalRef::Kind::Pi)
          return false;
        const SignalRef ref{SignalRef::Kind::Gate, g};
        const std::vector<int>& ls = n.loads(ref);
        if (ls.empty() || n.po_load_count(ref) > 0) return false;
        for (int l : ls)
          if (cls[l] != GateClass::Perturb) return false;
        return true;
      };

      GateClass after = cls[g];
      const char* rule = nullptr;
      if (cls[g] == GateClass::Restore) {
        if (!cf.ki_in_cone[g]) {
          // Restore logic cancels the perturbation only when the key
          // matches, so a restore gate must see key inputs.
          if (perturb_holds()) {
            after = GateClass::Perturb;
            rule = "restore-to-perturb";
          } else {
            after = GateClass::Design;
            rule = "drop-restore";
          }
        }
      } else if (cls[g] == GateClass::Perturb) {
        if (!perturb_holds()) {
          after = GateClass::Design;
          rule = "drop-perturb";
        }
      } else {
        // Splice and cancel stages mix the classified sides: the splice XOR
        // joins design logic with a keyless cone of protected inputs, the
        // cancel XOR joins a perturb signal with a keyed restore cone. Both
        // are recoverable from their fanins when the model calls them
        // design; cone purity keeps mislabeled design fanins from matching.
        const bool xor_typed =
            gate.type == GateType::Xor || gate.type == GateType::Xnor;
        bool design_fanin = false;
        bool pure_perturb_fanin = false;
        bool keyed_restore_fanin = false;
        bool perturb_fanin = false;
        for (const SignalRef& in : gate.fanin) {
          if (!in.is_gate()) continue;
          const int f = in.index;
          if (cls[f] == GateClass::Design) design_fanin = true;
          if (cls[f] == GateClass::Perturb) {
            perturb_fanin = true;
            pure_perturb_fanin |= !cf.ki_in_cone[f] && !design_in[f] &&
                                  any_bit(cf.cone_pis[f]) &&
                                  subset_of(cf.cone_pis[f], x);
          }
          if (cls[f] == GateClass::Restore)
            keyed_restore_fanin |= cf.ki_in_cone[f] && !design_in[f];
        }
        if (!cf.ki_in_cone[g] && pis_protected && !des) {
          if (pert) {
            after = GateClass::Perturb;
            rule = "absorb-perturb-cone";
          } else if (fold_shaped()) {
            after = GateClass::Perturb;
            rule = "absorb-perturb-loads";
          }
        } else if (cf.ki_in_cone[g] && pis_protected && !des && to_restore) {
          after = GateClass::Restore;
          rule = "absorb-restore-cone";
        } else if (xor_typed && keyed_restore_fanin && perturb_fanin) {
          after = GateClass::Restore;
          rule = "absorb-cancel";
        } else if (xor_typed && design_fanin && pure_perturb_fanin &&
                   to_restore) {
          after = GateClass::Perturb;
          rule = "absorb-splice";
        }
      }
      if (after != cls[g]) {
        res.log.push_back({gate.name, cls[g], after, rule});
        cls[g] = after;
        changed = true;
      }
    }
  }
  finish(res, n, preds, cls);
  return res;
}

RectifyResult rectify(const Netlist& n, const PredictionMap& preds) {
  return preds.scheme == LockScheme::AntiSat ? rectify_antisat(n, preds)
                                             : rectify_sfll(n, preds);
}

void save_rectify_log(const std::string& path,
                      const std::vector<RectifyEvent>& log) {
  std::ofstream out(path);
  if (!out) throw NetlistError("cannot write rectification log: " + path);
  out << "gate,predicted_class,rectified_class,rule_fired\n";
  for (const RectifyEvent& e : log)
    out << e.gate << ',' << gate_class_name(e.predicted) << ','
        << gate_class_name(e.rectified) << ',' << e.rule << '\n';
}

}  // namespace locklab

#include "locklab/locking.hpp"

#include <algorithm>
#include <cassert>

#include "locklab/rng.hpp"
#include "locklab/transform.hpp"

namespace locklab {

const char* gate_class_name(GateClass c) {
  switch (c) {
    case GateClass::Design: return "design";
    case GateClass::AntiSat: return "antisat";
    case GateClass::Perturb: return "perturb";
    case GateClass::Restore: return "restore";
  }
  return "?";
}

const char* gate_class_abbrev(GateClass c) {
  switch (c) {
    case GateClass::Design: return "DN";
    case GateClass::AntiSat: return "AN";
    case GateClass::Perturb: return "PN";
    case GateClass::Restore: return "RN";
  }
  return "?";
}

std::optional<GateClass> gate_class_from_name(std::string_view name) {
  if (name == "design") return GateClass::Design;
  if (name == "antisat") return GateClass::AntiSat;
  if (name == "perturb") return GateClass::Perturb;
  if (name == "restore") return GateClass::Restore;
  return std::nullopt;
}

bool is_protection_class(GateClass c) { return c != GateClass::Design; }

const char* lock_scheme_name(LockScheme s) {
  switch (s) {
    case LockScheme::AntiSat: return "antisat";
    case LockScheme::TtLock: return "ttlock";
    case LockScheme::SfllHd: return "sfll_hd";
  }
  return "?";
}

std::optional<LockScheme> lock_scheme_from_name(std::string_view name) {
  if (name == "antisat") return LockScheme::AntiSat;
  if (name == "ttlock") return LockScheme::TtLock;
  if (name == "sfll_hd") return LockScheme::SfllHd;
  return std::nullopt;
}

namespace {

// Balanced 2-input reduction; pairs (0,1), (2,3), ... so ties always resolve
// to the lower index first. A single leaf is returned unchanged.
std::string reduce_tree(NetlistBuilder& b, GateType type,
                        std::vector<std::string> leaves,
                        const std::string& prefix,
                        std::vector<std::string>* created) {
  while (leaves.size() > 1) {
    std::vector<std::string> next;
    for (size_t i = 0; i + 1 < leaves.size(); i += 2) {
      std::string t = b.fresh_name(prefix);
      b.add_gate(t, type, {leaves[i], leaves[i + 1]});
      if (created) created->push_back(t);
      next.push_back(t);
    }
    if (leaves.size() % 2) next.push_back(leaves.back());
    leaves = std::move(next);
  }
  return leaves.at(0);
}

std::vector<std::string> pick_inputs(const Netlist& n, int count,
                                     const SelectionPolicy& policy, Rng& rng) {
  const auto& pis = n.pis();
  if (count > int(pis.size()))
    throw NetlistError("not enough primary inputs to protect " +
                       std::to_string(count) + " bits");
  switch (policy.kind) {
    case SelectionPolicy::Kind::FirstK:
      return std::vector<std::string>(pis.begin(), pis.begin() + count);
    case SelectionPolicy::Kind::Explicit: {
      if (int(policy.explicit_names.size()) != count)
        throw NetlistError("explicit input selection must name exactly " +
                           std::to_string(count) + " inputs");
      for (const auto& s : policy.explicit_names) {
        auto ref = n.find(s);
        if (!ref || ref->kind != SignalRef::Kind::Pi)
          throw NetlistError("explicit input '" + s +
                             "' is not a primary input");
      }
      return policy.explicit_names;
    }
    case SelectionPolicy::Kind::Random: {
      std::vector<int> idx(pis.size());
      for (size_t i = 0; i < pis.size(); ++i) idx[i] = int(i);
      // partial Fisher-Yates
      for (int i = 0; i < count; ++i) {
        int j = i + int(rand_below(rng, idx.size() - std::uint64_t(i)));
        std::swap(idx[i], idx[j]);
      }
      std::vector<std::string> out;
      for (int i = 0; i < count; ++i) out.push_back(pis[idx[i]]);
      return out;
    }
  }
  throw NetlistError("bad selection policy");
}

void require_plain(const Netlist& n) {
  if (!n.kis().empty())
    throw NetlistError("netlist already carries key inputs; locking expects "
                       "a plain design");
}

}  // namespace

HdCheckerResult build_hd_checker(NetlistBuilder& b,
                                 const std::vector<std::string>& inputs,
                                 const std::vector<std::string>& key_nets,
                                 const std::vector<bool>* hard_key, int hd,
                                 const std::string& prefix) {
  int width = int(inputs.size());
  if (width < 1) throw NetlistError("hd checker needs at least one input");
  if (hd < 0 || hd > width)
    throw NetlistError("hd parameter out of range");
  if (hard_key) {
    if (int(hard_key->size()) != width)
      throw NetlistError("hard key width mismatch");
  } else if (int(key_nets.size()) != width) {
    throw NetlistError("key net count mismatch");
  }

  HdCheckerResult res;
  auto mk = [&](GateType type, std::vector<std::string> fanin) {
    std::string name = b.fresh_name(prefix);
    b.add_gate(name, type, std::move(fanin));
    res.gates.push_back(name);
    return name;
  };

  // Difference layer: with a hard-coded key the XORs fold into inverters and
  // buffers, which is exactly what makes the perturb unit key-dependent.
  std::vector<std::string> diff(width);
  for (int i = 0; i < width; ++i) {
    if (hard_key)
      diff[i] = mk((*hard_key)[i] ? GateType::Not : GateType::Buf,
                   {inputs[i]});
    else
      diff[i] = mk(GateType::Xor, {inputs[i], key_nets[i]});
  }

  auto reduce = [&](GateType type, std::vector<std::string> leaves) {
    return reduce_tree(b, type, std::move(leaves), prefix, &res.gates);
  };

  if (hd == 0) {
    // Plain equality comparator: every difference bit low.
    std::vector<std::string> nots;
    for (const auto& d : diff) nots.push_back(mk(GateType::Not, {d}));
    res.output = reduce(GateType::And, nots);
    return res;
  }
  if (hd == width) {
    // All difference bits high.
    if (width == 1) {
      res.output = mk(GateType::Buf, {diff[0]});
      return res;
    }
    res.output = reduce(GateType::And, diff);
    return res;
  }

  // Popcount as a balanced tree of ripple-carry additions; ties in pairing
  // resolve to the lower index.
  std::vector<std::vector<std::string>> counts;
  for (const auto& d : diff) counts.push_back({d});
  auto add_counts = [&](const std::vector<std::string>& a,
                        const std::vector<std::string>& bb) {
    std::vector<std::string> out;
    std::string carry;
    size_t w = std::max(a.size(), bb.size());
    for (size_t j = 0; j < w; ++j) {
      std::vector<std::string> ops;
      if (j < a.size()) ops.push_back(a[j]);
      if (j < bb.size()) ops.push_back(bb[j]);
      if (!carry.empty()) ops.push_back(carry);
      if (ops.size() == 1) {
        out.push_back(ops[0]);
        carry.clear();
      } else if (ops.size() == 2) {
        out.push_back(mk(GateType::Xor, {ops[0], ops[1]}));
        carry = mk(GateType::And, {ops[0], ops[1]});
      } else {
        std::string s1 = mk(GateType::Xor, {ops[0], ops[1]});
        out.push_back(mk(GateType::Xor, {s1, ops[2]}));
        std::string c1 = mk(GateType::And, {ops[0], ops[1]});
        std::string c2 = mk(GateType::And, {s1, ops[2]});
        carry = mk(GateType::Or, {c1, c2});
      }
    }
    if (!carry.empty()) out.push_back(carry);
    return out;
  };
  while (counts.size() > 1) {
    std::vector<std::vector<std::string>> next;
    for (size_t i = 0; i + 1 < counts.size(); i += 2)
      next.push_back(add_counts(counts[i], counts[i + 1]));
    if (counts.size() % 2) next.push_back(counts.back());
    counts = std::move(next);
  }
  const std::vector<std::string>& count = counts[0];

  // Comparator: AND over the count bits matching hd's binary encoding. The
  // count is at least two bits wide here (width >= 2 past the special cases).
  std::vector<std::string> lits;
  for (size_t j = 0; j < count.size(); ++j) {
    if ((hd >> j) & 1)
      lits.push_back(count[j]);
    else
      lits.push_back(mk(GateType::Not, {count[j]}));
  }
  res.output = reduce(GateType::And, lits);
  return res;
}

Netlist hd_checker_circuit(int width, int hd, const std::vector<bool>* hard_key,
                           const std::string& key_input_prefix) {
  NetlistBuilder b;
  b.set_name("hd_checker");
  std::vector<std::string> inputs, keys;
  for (int i = 0; i < width; ++i) {
    inputs.push_back("in" + std::to_string(i));
    b.add_input(inputs.back());
  }
  if (!hard_key) {
    for (int i = 0; i < width; ++i) {
      keys.push_back(key_input_prefix + std::to_string(i));
      b.add_key_input(keys.back());
    }
  }
  auto res = build_hd_checker(b, inputs, keys, hard_key, hd, "hc");
  if (b.has_signal("hd")) throw NetlistError("reserved name collision");
  b.add_gate("hd", GateType::Buf, {res.output});
  b.add_output("hd");
  return b.build();
}

LockResult lock_antisat(const Netlist& n, int key_width, std::uint64_t seed,
                        const LockOptions& opts) {
  require_plain(n);
  if (key_width < 2 || key_width % 2 != 0)
    throw NetlistError("anti-sat key width must be even and positive");
  int na = key_width / 2;
  Rng rng(mix_seed(seed, 0xA5A7));

  LockResult res;
  res.scheme = LockScheme::AntiSat;
  res.key_width = key_width;
  res.seed = seed;
  res.protected_inputs = pick_inputs(n, na, opts.inputs, rng);

  // Correct keys are exactly the ones with equal halves; emit one such pair.
  std::vector<bool> half = rand_bits(rng, na);
  res.key = half;
  res.key.insert(res.key.end(), half.begin(), half.end());

  NetlistBuilder b(n);
  std::vector<std::string> key_nets;
  for (int i = 0; i < key_width; ++i) {
    std::string k = opts.key_input_prefix + std::to_string(i);
    b.add_key_input(k);
    key_nets.push_back(k);
  }

  for (const Gate& g : n.gates()) res.labels[g.name] = GateClass::Design;
  std::vector<std::string> added;
  auto mk = [&](GateType type, std::vector<std::string> fanin) {
    std::string name = b.fresh_name("asat");
    b.add_gate(name, type, std::move(fanin));
    added.push_back(name);
    return name;
  };

  std::vector<std::string> m1, m2;
  for (int i = 0; i < na; ++i) {
    m1.push_back(mk(GateType::Xor, {res.protected_inputs[i], key_nets[i]}));
    m2.push_back(
        mk(GateType::Xor, {res.protected_inputs[i], key_nets[na + i]}));
  }
  std::string g1 = reduce_tree(b, GateType::And, m1, "asat", &added);
  std::string g2 = reduce_tree(b, GateType::And, m2, "asat", &added);
  std::string ng2 = mk(GateType::Not, {g2});
  std::string y = mk(GateType::And, {g1, ng2});
  res.antisat_out = y;

  // Integration target: an internal gate-driven net with gate loads and no PO
  // reference, so the splice can rewire the loads and keep every original
  // gate name. Falls back to a PO splice (with a driver rename) on circuits
  // that have no such net.
  std::vector<std::string> candidates;
  for (const Gate& g : n.gates()) {
    SignalRef ref{SignalRef::Kind::Gate, g.id};
    if (!n.is_po_net(g.name) && !n.loads(ref).empty())
      candidates.push_back(g.name);
  }
  std::string target;
  switch (opts.target.kind) {
    case SelectionPolicy::Kind::Explicit:
      target = opts.target.explicit_target;
      if (std::find(candidates.begin(), candidates.end(), target) ==
              candidates.end() &&
          !n.is_po_net(target))
        throw NetlistError("explicit target '" + target +
                           "' is not a spliceable net");
      break;
    case SelectionPolicy::Kind::FirstK:
      if (!candidates.empty()) target = candidates.front();
      break;
    case SelectionPolicy::Kind::Random:
      if (!candidates.empty())
        target = candidates[size_t(rand_below(rng, candidates.size()))];
      break;
  }

  std::string mix;
  if (!target.empty() && !n.is_po_net(target)) {
    mix = b.fresh_name("asat_mix");
    b.rewire_gate_loads(target, mix);
    b.add_gate(mix, GateType::Xor, {target, y});
    added.push_back(mix);
    res.target_net = target;
  } else {
    // PO splice: rename the driver, keep the PO name on the new XOR.
    std::vector<std::string> po_gates;
    for (SignalRef r : n.po_refs())
      if (r.is_gate()) po_gates.push_back(n.gate(r.index).name);
    if (po_gates.empty())
      throw NetlistError("no spliceable net in design");
    if (target.empty())
      target = po_gates[size_t(rand_below(rng, po_gates.size()))];
    std::string renamed = b.fresh_name(target + "_str");
    b.rename_gate(target, renamed, true);
    b.replace_output(renamed, target);
    // Any gate loads of the old net must see the corrupted value as well.
    b.rewire_gate_loads(renamed, target);
    b.add_gate(target, GateType::Xor, {renamed, y});
    added.push_back(target);
    res.labels[renamed] = GateClass::Design;
    res.labels.erase(target);
    res.renamed_driver = renamed;
    res.target_net = target;
    mix = target;
  }
  res.integration_gates = {mix};
  for (const auto& name : added) res.labels[name] = GateClass::AntiSat;

  res.locked = b.build();
  return res;
}

LockResult lock_sfll_hd(const Netlist& n, int key_width, int hd,
                        std::uint64_t seed, const LockOptions& opts) {
  require_plain(n);
  if (key_width < 1 || key_width > int(n.pis().size()))
    throw NetlistError("key width must be between 1 and the PI count");
  if (hd < 0 || hd > key_width)
    throw NetlistError("hamming distance must be between 0 and the key width");
  Rng rng(mix_seed(seed, 0x5F11));

  LockResult res;
  res.scheme = hd == 0 ? LockScheme::TtLock : LockScheme::SfllHd;
  res.key_width = key_width;
  res.hd = hd;
  res.seed = seed;
  res.protected_inputs = pick_inputs(n, key_width, opts.inputs, rng);
  res.key = rand_bits(rng, key_width);

  // Target PO must be gate-driven; the driver keeps feeding any internal
  // loads it had, only the PO path is perturbed and restored.
  std::vector<std::string> po_candidates;
  for (SignalRef r : n.po_refs())
    if (r.is_gate()) po_candidates.push_back(n.gate(r.index).name);
  if (po_candidates.empty())
    throw NetlistError("no gate-driven primary output to protect");
  std::string target;
  switch (opts.target.kind) {
    case SelectionPolicy::Kind::Explicit:
      target = opts.target.explicit_target;
      if (std::find(po_candidates.begin(), po_candidates.end(), target) ==
          po_candidates.end())
        throw NetlistError("explicit target '" + target +
                           "' is not a gate-driven output");
      break;
    case SelectionPolicy::Kind::FirstK:
      target = po_candidates.front();
      break;
    case SelectionPolicy::Kind::Random:
      target = po_candidates[size_t(rand_below(rng, po_candidates.size()))];
      break;
  }

  NetlistBuilder b(n);
  for (const Gate& g : n.gates()) res.labels[g.name] = GateClass::Design;

  std::string renamed = b.fresh_name(target + "_str");
  b.rename_gate(target, renamed, true);
  b.replace_output(renamed, target);
  res.labels.erase(target);
  res.labels[renamed] = GateClass::Design;
  res.renamed_driver = renamed;
  res.target_net = target;

  auto perturb =
      build_hd_checker(b, res.protected_inputs, {}, &res.key, hd, "ptb");
  res.perturb_out = perturb.output;
  std::string ps = b.fresh_name("ptb_mix");
  b.add_gate(ps, GateType::Xor, {renamed, perturb.output});
  for (const auto& g : perturb.gates) res.labels[g] = GateClass::Perturb;
  res.labels[ps] = GateClass::Perturb;

  std::vector<std::string> key_nets;
  for (int i = 0; i < key_width; ++i) {
    std::string k = opts.key_input_prefix + std::to_string(i);
    b.add_key_input(k);
    key_nets.push_back(k);
  }
  auto restore =
      build_hd_checker(b, res.protected_inputs, key_nets, nullptr, hd, "rst");
  res.restore_out = restore.output;
  b.add_gate(target, GateType::Xor, {ps, restore.output});
  for (const auto& g : restore.gates) res.labels[g] = GateClass::Restore;
  res.labels[target] = GateClass::Restore;

  res.integration_gates = {ps, target};
  res.locked = b.build();
  return res;
}

LockResult lock_ttlock(const Netlist& n, int key_width, std::uint64_t seed,
                       const LockOptions& opts) {
  return lock_sfll_hd(n, key_width, 0, seed, opts);
}

Netlist apply_key(const Netlist& locked, const std::vector<bool>& key) {
  if (key.size() != locked.kis().size())
    throw NetlistError("key width does not match the netlist's key inputs");
  std::map<std::string, bool> pins;
  for (size_t i = 0; i < key.size(); ++i) pins[locked.kis()[i]] = key[i];
  Netlist propagated = constant_propagate(locked, pins);
  DeadLogicOptions opts;
  opts.drop_unloaded_pis = false;
  opts.drop_unloaded_kis = true;
  Netlist out = remove_dead_logic(propagated, opts).netlist;
  if (!out.kis().empty())
    throw NetlistError("key inputs survived key application");
  return out;
}

}  // namespace locklab

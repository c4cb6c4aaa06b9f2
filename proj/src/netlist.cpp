#include "locklab/netlist.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

namespace locklab {

bool is_pseudo_type(GateType t) {
  return t == GateType::Const0 || t == GateType::Const1;
}

bool is_unary_type(GateType t) {
  return t == GateType::Not || t == GateType::Buf;
}

const char* gate_type_name(GateType t) {
  switch (t) {
    case GateType::And: return "AND";
    case GateType::Nand: return "NAND";
    case GateType::Or: return "OR";
    case GateType::Nor: return "NOR";
    case GateType::Xor: return "XOR";
    case GateType::Xnor: return "XNOR";
    case GateType::Not: return "NOT";
    case GateType::Buf: return "BUF";
    case GateType::Const0: return "CONST0";
    case GateType::Const1: return "CONST1";
  }
  return "?";
}

std::optional<GateType> gate_type_from_keyword(std::string_view kw) {
  std::string up(kw);
  std::transform(up.begin(), up.end(), up.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  if (up == "AND") return GateType::And;
  if (up == "NAND") return GateType::Nand;
  if (up == "OR") return GateType::Or;
  if (up == "NOR") return GateType::Nor;
  if (up == "XOR") return GateType::Xor;
  if (up == "XNOR") return GateType::Xnor;
  if (up == "NOT") return GateType::Not;
  if (up == "BUF" || up == "BUFF") return GateType::Buf;
  return std::nullopt;
}

ParseError::ParseError(int line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message),
      line_(line) {}

bool eval_gate(GateType type, const std::vector<bool>& inputs) {
  switch (type) {
    case GateType::And: {
      for (bool v : inputs)
        if (!v) return false;
      return true;
    }
    case GateType::Nand: {
      for (bool v : inputs)
        if (!v) return true;
      return false;
    }
    case GateType::Or: {
      for (bool v : inputs)
        if (v) return true;
      return false;
    }
    case GateType::Nor: {
      for (bool v : inputs)
        if (v) return false;
      return true;
    }
    case GateType::Xor: {
      bool acc = false;
      for (bool v : inputs) acc = acc != v;
      return acc;
    }
    case GateType::Xnor: {
      bool acc = true;
      for (bool v : inputs) acc = acc != v;
      return acc;
    }
    case GateType::Not: return !inputs.at(0);
    case GateType::Buf: return inputs.at(0);
    case GateType::Const0: return false;
    case GateType::Const1: return true;
  }
  throw NetlistError("unknown gate type");
}

// ---------------------------------------------------------------------------
// NetlistBuilder

NetlistBuilder::NetlistBuilder(const Netlist& base) {
  name_ = base.name();
  for (const auto& s : base.pis()) add_input(s);
  for (const auto& s : base.kis()) add_key_input(s);
  for (const auto& g : base.gates()) {
    std::vector<std::string> fanin;
    fanin.reserve(g.fanin.size());
    for (SignalRef r : g.fanin) fanin.push_back(base.signal_name(r));
    add_gate(g.name, g.type, std::move(fanin));
  }
  for (const auto& s : base.pos()) add_output(s);
}

void NetlistBuilder::add_input(const std::string& name) {
  if (!declared_.emplace(name, 0).second)
    throw NetlistError("duplicate driver for signal '" + name + "'");
  inputs_.push_back(name);
}

void NetlistBuilder::add_key_input(const std::string& name) {
  if (!declared_.emplace(name, 0).second)
    throw NetlistError("duplicate driver for signal '" + name + "'");
  key_inputs_.push_back(name);
}

void NetlistBuilder::add_output(const std::string& name) {
  if (std::find(outputs_.begin(), outputs_.end(), name) != outputs_.end())
    throw NetlistError("duplicate output reference '" + name + "'");
  outputs_.push_back(name);
}

void NetlistBuilder::add_gate(const std::string& name, GateType type,
                              std::vector<std::string> fanin) {
  if (!declared_.emplace(name, 0).second)
    throw NetlistError("duplicate driver for signal '" + name + "'");
  if (is_unary_type(type) && fanin.size() != 1)
    throw NetlistError("gate '" + name + "': " +
                       std::string(gate_type_name(type)) +
                       " takes exactly one input");
  if (!is_unary_type(type) && !is_pseudo_type(type) && fanin.size() < 2)
    throw NetlistError("gate '" + name + "': " +
                       std::string(gate_type_name(type)) +
                       " takes at least two inputs");
  if (is_pseudo_type(type) && !fanin.empty())
    throw NetlistError("gate '" + name + "': constant takes no inputs");
  gates_.push_back(ProtoGate{name, type, std::move(fanin)});
}

bool NetlistBuilder::has_signal(const std::string& name) const {
  return declared_.count(name) > 0;
}

std::string NetlistBuilder::fresh_name(const std::string& prefix) {
  if (!has_signal(prefix) && used_fresh_.insert(prefix).second) return prefix;
  for (int i = 0;; ++i) {
    std::string cand = prefix + std::to_string(i);
    if (!has_signal(cand) && used_fresh_.insert(cand).second) return cand;
  }
}

void NetlistBuilder::rewire_gate_loads(const std::string& from,
                                       const std::string& to) {
  for (auto& g : gates_)
    for (auto& f : g.fanin)
      if (f == from) f = to;
}

void NetlistBuilder::rename_gate(const std::string& from,
                                 const std::string& to, bool rename_refs) {
  auto it = declared_.find(from);
  if (it == declared_.end())
    throw NetlistError("rename: unknown signal '" + from + "'");
  if (declared_.count(to))
    throw NetlistError("rename: target name '" + to + "' already in use");
  bool found = false;
  for (auto& g : gates_) {
    if (g.name == from) {
      g.name = to;
      found = true;
      break;
    }
  }
  if (!found) throw NetlistError("rename: '" + from + "' is not a gate");
  declared_.erase(it);
  declared_.emplace(to, 0);
  if (rename_refs) {
    rewire_gate_loads(from, to);
    for (auto& o : outputs_)
      if (o == from) o = to;
  }
}

void NetlistBuilder::replace_output(const std::string& from,
                                    const std::string& to) {
  auto it = std::find(outputs_.begin(), outputs_.end(), from);
  if (it == outputs_.end())
    throw NetlistError("replace_output: '" + from + "' is not an output");
  *it = to;
}

Netlist NetlistBuilder::build() const {
  Netlist n;
  n.name_ = name_;
  n.pis_ = inputs_;
  n.kis_ = key_inputs_;
  n.po_names_ = outputs_;

  for (int i = 0; i < int(n.pis_.size()); ++i)
    n.by_name_.emplace(n.pis_[i], SignalRef{SignalRef::Kind::Pi, i});
  for (int i = 0; i < int(n.kis_.size()); ++i)
    if (!n.by_name_.emplace(n.kis_[i], SignalRef{SignalRef::Kind::Ki, i})
             .second)
      throw NetlistError("duplicate driver for signal '" + n.kis_[i] + "'");
  n.gates_.reserve(gates_.size());
  for (int i = 0; i < int(gates_.size()); ++i) {
    const ProtoGate& pg = gates_[i];
    if (!n.by_name_.emplace(pg.name, SignalRef{SignalRef::Kind::Gate, i})
             .second)
      throw NetlistError("duplicate driver for signal '" + pg.name + "'");
    n.gates_.push_back(Gate{i, pg.name, pg.type, {}});
  }

  for (int i = 0; i < int(gates_.size()); ++i) {
    const ProtoGate& pg = gates_[i];
    Gate& g = n.gates_[i];
    g.fanin.reserve(pg.fanin.size());
    for (const std::string& f : pg.fanin) {
      auto it = n.by_name_.find(f);
      if (it == n.by_name_.end())
        throw NetlistError("gate '" + pg.name + "' reads undefined signal '" +
                           f + "'");
      g.fanin.push_back(it->second);
    }
  }

  n.po_refs_.reserve(outputs_.size());
  for (const std::string& o : outputs_) {
    auto it = n.by_name_.find(o);
    if (it == n.by_name_.end())
      throw NetlistError("output references undefined signal '" + o + "'");
    n.po_refs_.push_back(it->second);
  }

  // Kahn's algorithm with an id-ordered ready set gives a canonical order
  // and detects combinational cycles.
  int ng = int(n.gates_.size());
  std::vector<int> pending(ng, 0);
  std::vector<std::vector<int>> gate_loads(ng);
  for (const Gate& g : n.gates_) {
    for (SignalRef r : g.fanin) {
      if (r.is_gate()) {
        ++pending[g.id];
        gate_loads[r.index].push_back(g.id);
      }
    }
  }
  std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
  for (int i = 0; i < ng; ++i)
    if (pending[i] == 0) ready.push(i);
  n.topo_.reserve(ng);
  while (!ready.empty()) {
    int id = ready.top();
    ready.pop();
    n.topo_.push_back(id);
    for (int load : gate_loads[id])
      if (--pending[load] == 0) ready.push(load);
  }
  if (int(n.topo_.size()) != ng) {
    std::vector<std::string> members;
    for (int i = 0; i < ng; ++i)
      if (pending[i] > 0) members.push_back(n.gates_[i].name);
    std::string msg = "combinational cycle through:";
    for (const auto& m : members) msg += " " + m;
    throw NetlistError(msg);
  }

  // Load tables per signal slot: PIs, then KIs, then gates.
  n.loads_.assign(n.num_signals(), {});
  n.po_load_counts_.assign(n.num_signals(), 0);
  for (const Gate& g : n.gates_)
    for (SignalRef r : g.fanin) n.loads_[n.signal_slot(r)].push_back(g.id);
  for (auto& l : n.loads_) std::sort(l.begin(), l.end());
  for (SignalRef r : n.po_refs_) ++n.po_load_counts_[n.signal_slot(r)];
  return n;
}

// ---------------------------------------------------------------------------
// Netlist

int Netlist::signal_slot(SignalRef ref) const {
  switch (ref.kind) {
    case SignalRef::Kind::Pi: return ref.index;
    case SignalRef::Kind::Ki: return int(pis_.size()) + ref.index;
    case SignalRef::Kind::Gate:
      return int(pis_.size() + kis_.size()) + ref.index;
  }
  return 0;
}

std::optional<SignalRef> Netlist::find(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

const std::string& Netlist::signal_name(SignalRef ref) const {
  switch (ref.kind) {
    case SignalRef::Kind::Pi: return pis_[ref.index];
    case SignalRef::Kind::Ki: return kis_[ref.index];
    case SignalRef::Kind::Gate: return gates_[ref.index].name;
  }
  throw NetlistError("bad signal ref");
}

bool Netlist::is_po_net(const std::string& name) const {
  return std::find(po_names_.begin(), po_names_.end(), name) !=
         po_names_.end();
}

const std::vector<int>& Netlist::loads(SignalRef ref) const {
  return loads_[signal_slot(ref)];
}

int Netlist::po_load_count(SignalRef ref) const {
  return po_load_counts_[signal_slot(ref)];
}

FaninCone Netlist::fanin_cone(int gate_id) const {
  return fanin_cone(SignalRef{SignalRef::Kind::Gate, gate_id});
}

FaninCone Netlist::fanin_cone(SignalRef ref) const {
  FaninCone cone;
  std::set<int> gates, pis, kis;
  std::vector<SignalRef> stack;
  if (ref.is_gate()) {
    for (SignalRef f : gates_[ref.index].fanin) stack.push_back(f);
  }
  while (!stack.empty()) {
    SignalRef cur = stack.back();
    stack.pop_back();
    switch (cur.kind) {
      case SignalRef::Kind::Pi: pis.insert(cur.index); break;
      case SignalRef::Kind::Ki: kis.insert(cur.index); break;
      case SignalRef::Kind::Gate:
        if (gates.insert(cur.index).second)
          for (SignalRef f : gates_[cur.index].fanin) stack.push_back(f);
        break;
    }
  }
  cone.gates.assign(gates.begin(), gates.end());
  cone.pis.assign(pis.begin(), pis.end());
  cone.kis.assign(kis.begin(), kis.end());
  return cone;
}

std::vector<int> Netlist::fanout_cone(SignalRef ref) const {
  std::set<int> seen;
  std::vector<int> stack(loads(ref).begin(), loads(ref).end());
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    if (!seen.insert(id).second) continue;
    SignalRef out{SignalRef::Kind::Gate, id};
    for (int load : loads(out)) stack.push_back(load);
  }
  return std::vector<int>(seen.begin(), seen.end());
}

std::map<std::string, bool> Netlist::simulate_all(
    const std::map<std::string, bool>& assignment) const {
  std::vector<bool> values(num_signals(), false);
  auto fetch = [&](const std::string& name) {
    auto it = assignment.find(name);
    if (it == assignment.end())
      throw NetlistError("simulate: missing assignment for input '" + name +
                         "'");
    return it->second;
  };
  for (int i = 0; i < int(pis_.size()); ++i)
    values[signal_slot({SignalRef::Kind::Pi, i})] = fetch(pis_[i]);
  for (int i = 0; i < int(kis_.size()); ++i)
    values[signal_slot({SignalRef::Kind::Ki, i})] = fetch(kis_[i]);

  std::vector<bool> ins;
  for (int id : topo_) {
    const Gate& g = gates_[id];
    ins.clear();
    for (SignalRef r : g.fanin) ins.push_back(values[signal_slot(r)]);
    values[signal_slot({SignalRef::Kind::Gate, id})] = eval_gate(g.type, ins);
  }

  std::map<std::string, bool> out;
  for (int i = 0; i < int(pis_.size()); ++i)
    out[pis_[i]] = values[signal_slot({SignalRef::Kind::Pi, i})];
  for (int i = 0; i < int(kis_.size()); ++i)
    out[kis_[i]] = values[signal_slot({SignalRef::Kind::Ki, i})];
  for (const Gate& g : gates_)
    out[g.name] = values[signal_slot({SignalRef::Kind::Gate, g.id})];
  return out;
}

std::map<std::string, bool> Netlist::simulate(
    const std::map<std::string, bool>& assignment) const {
  auto all = simulate_all(assignment);
  std::map<std::string, bool> out;
  for (const std::string& po : po_names_) out[po] = all.at(po);
  return out;
}

// ---------------------------------------------------------------------------
// Bench text format

namespace {

std::string_view trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (std::toupper(static_cast<unsigned char>(a[i])) !=
        std::toupper(static_cast<unsigned char>(b[i])))
      return false;
  return true;
}

// Parses "KEYWORD ( name )" and returns the name, or nullopt when the line
// does not start with the keyword.
std::optional<std::string> match_port(std::string_view line,
                                      std::string_view keyword, int lineno) {
  if (line.size() < keyword.size() ||
      !iequals(line.substr(0, keyword.size()), keyword))
    return std::nullopt;
  std::string_view rest = trim(line.substr(keyword.size()));
  if (rest.empty() || rest.front() != '(')
    return std::nullopt;  // e.g. a net named "input_x" on a gate line
  if (rest.back() != ')')
    throw ParseError(lineno, "expected ')' at end of " + std::string(keyword) +
                                 " declaration");
  std::string name(trim(rest.substr(1, rest.size() - 2)));
  if (name.empty())
    throw ParseError(lineno,
                     std::string(keyword) + " declaration names no signal");
  if (name.find_first_of(" \t(),=") != std::string::npos)
    throw ParseError(lineno, "malformed signal name '" + name + "'");
  return name;
}

}  // namespace

Netlist parse_bench(const std::string& text, const BenchParseOptions& opts) {
  NetlistBuilder b;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  auto is_key_name = [&](const std::string& name) {
    return !opts.key_input_prefix.empty() &&
           name.rfind(opts.key_input_prefix, 0) == 0;
  };
  while (std::getline(in, raw)) {
    ++lineno;
    if (auto hash = raw.find('#'); hash != std::string::npos)
      raw.resize(hash);
    std::string_view line = trim(raw);
    if (line.empty()) continue;

    try {
      if (auto name = match_port(line, "INPUT", lineno)) {
        if (is_key_name(*name))
          b.add_key_input(*name);
        else
          b.add_input(*name);
        continue;
      }
      if (auto name = match_port(line, "OUTPUT", lineno)) {
        b.add_output(*name);
        continue;
      }

      auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw ParseError(lineno, "expected INPUT, OUTPUT or assignment");
      std::string name(trim(line.substr(0, eq)));
      if (name.empty() || name.find_first_of(" \t(),=") != std::string::npos)
        throw ParseError(lineno, "malformed signal name '" + name + "'");
      std::string_view rhs = trim(line.substr(eq + 1));
      auto open = rhs.find('(');
      if (open == std::string_view::npos || rhs.back() != ')')
        throw ParseError(lineno, "expected GATE(arg, ...) on right-hand side");
      std::string kw(trim(rhs.substr(0, open)));
      auto type = gate_type_from_keyword(kw);
      if (!type)
        throw ParseError(lineno, "unsupported gate keyword '" + kw + "'");
      std::string_view args = rhs.substr(open + 1, rhs.size() - open - 2);
      std::vector<std::string> fanin;
      size_t pos = 0;
      while (pos <= args.size()) {
        size_t comma = args.find(',', pos);
        std::string_view tok =
            comma == std::string_view::npos
                ? args.substr(pos)
                : args.substr(pos, comma - pos);
        std::string arg(trim(tok));
        if (arg.empty())
          throw ParseError(lineno, "empty argument in gate '" + name + "'");
        if (arg.find_first_of(" \t(),=") != std::string::npos)
          throw ParseError(lineno, "malformed signal name '" + arg + "'");
        fanin.push_back(std::move(arg));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
      }
      b.add_gate(name, *type, std::move(fanin));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(lineno, e.what());
    }
  }
  try {
    return b.build();
  } catch (const std::exception& e) {
    throw ParseError(lineno, e.what());
  }
}

Netlist parse_bench_file(const std::string& path,
                         const BenchParseOptions& opts) {
  std::ifstream f(path);
  if (!f) throw NetlistError("cannot open bench file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_bench(ss.str(), opts);
}

std::string write_bench(const Netlist& n) {
  std::ostringstream out;
  for (const auto& s : n.pis()) out << "INPUT(" << s << ")\n";
  for (const auto& s : n.kis()) out << "INPUT(" << s << ")\n";
  for (const auto& s : n.pos()) out << "OUTPUT(" << s << ")\n";
  for (int id : n.topo_order()) {
    const Gate& g = n.gate(id);
    if (is_pseudo_type(g.type))
      throw NetlistError("cannot serialize constant pseudo-gate '" + g.name +
                         "'");
    out << g.name << " = " << gate_type_name(g.type) << "(";
    for (size_t i = 0; i < g.fanin.size(); ++i) {
      if (i) out << ", ";
      out << n.signal_name(g.fanin[i]);
    }
    out << ")\n";
  }
  return out.str();
}

bool structural_equal(const Netlist& a, const Netlist& b, std::string* diff) {
  auto fail = [&](const std::string& why) {
    if (diff) *diff = why;
    return false;
  };
  if (a.pis() != b.pis()) return fail("primary input lists differ");
  if (a.kis() != b.kis()) return fail("key input lists differ");
  if (a.pos() != b.pos()) return fail("output lists differ");
  if (a.gates().size() != b.gates().size())
    return fail("gate counts differ: " + std::to_string(a.gates().size()) +
                " vs " + std::to_string(b.gates().size()));
  for (const Gate& ga : a.gates()) {
    auto ref = b.find(ga.name);
    if (!ref || !ref->is_gate())
      return fail("gate '" + ga.name + "' missing from second netlist");
    const Gate& gb = b.gate(ref->index);
    if (ga.type != gb.type)
      return fail("gate '" + ga.name + "' type differs");
    if (ga.fanin.size() != gb.fanin.size())
      return fail("gate '" + ga.name + "' arity differs");
    for (size_t i = 0; i < ga.fanin.size(); ++i)
      if (a.signal_name(ga.fanin[i]) != b.signal_name(gb.fanin[i]))
        return fail("gate '" + ga.name + "' fanin differs at slot " +
                    std::to_string(i));
  }
  return true;
}

}  // namespace locklab

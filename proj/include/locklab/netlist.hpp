#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace locklab {

// Combinational gate alphabet of the bench dialect. Const0/Const1 are
// pseudo-gates used internally by constant propagation; they are never
// serialized.
enum class GateType : std::uint8_t {
  And,
  Nand,
  Or,
  Nor,
  Xor,
  Xnor,
  Not,
  Buf,
  Const0,
  Const1,
};

inline constexpr int kNumRealGateTypes = 8;

bool is_pseudo_type(GateType t);
bool is_unary_type(GateType t);
const char* gate_type_name(GateType t);
// Case-insensitive keyword lookup; accepts BUFF as an alias for BUF.
std::optional<GateType> gate_type_from_keyword(std::string_view kw);

// A signal is driven by exactly one of: a primary input, a key input, or a
// gate output. The index addresses the respective array in the netlist.
struct SignalRef {
  enum class Kind : std::uint8_t { Pi, Ki, Gate };
  Kind kind = Kind::Pi;
  int index = 0;

  friend bool operator==(const SignalRef&, const SignalRef&) = default;
  bool is_gate() const { return kind == Kind::Gate; }
  bool is_input() const { return kind != Kind::Gate; }
};

struct Gate {
  int id = -1;              // position in Netlist::gates()
  std::string name;         // net driven by this gate
  GateType type = GateType::And;
  std::vector<SignalRef> fanin;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

class NetlistError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Transitive fan-in of a node, partitioned by signal kind. The start gate is
// not a member of its own gate set. All vectors are sorted.
struct FaninCone {
  std::vector<int> gates;
  std::vector<int> pis;
  std::vector<int> kis;
};

class Netlist;

// Mutable construction handle. build() validates single-driver, known-signal,
// arity and acyclicity constraints and produces an immutable Netlist.
class NetlistBuilder {
 public:
  NetlistBuilder() = default;
  explicit NetlistBuilder(const Netlist& base);  // copies an existing netlist

  void set_name(std::string name) { name_ = std::move(name); }
  void add_input(const std::string& name);
  void add_key_input(const std::string& name);
  void add_output(const std::string& name);
  // Fanins may reference signals declared later; resolution happens in build().
  void add_gate(const std::string& name, GateType type,
                std::vector<std::string> fanin);
  bool has_signal(const std::string& name) const;
  // Returns prefix, prefix0, prefix1, ... whichever is free first, and
  // reserves it against later calls.
  std::string fresh_name(const std::string& prefix);

  // Redirects every gate fanin reading `from` to read `to` instead.
  // Output references are left untouched.
  void rewire_gate_loads(const std::string& from, const std::string& to);
  // Renames a declared gate; fanin and output references keep following it
  // only if rename_refs is set.
  void rename_gate(const std::string& from, const std::string& to,
                   bool rename_refs);
  // Re-points the OUTPUT entry `from` at `to`; gates are untouched.
  void replace_output(const std::string& from, const std::string& to);

  const std::vector<std::string>& outputs() const { return outputs_; }
  Netlist build() const;

 private:
  struct ProtoGate {
    std::string name;
    GateType type;
    std::vector<std::string> fanin;
  };
  std::string name_ = "top";
  std::vector<std::string> inputs_;
  std::vector<std::string> key_inputs_;
  std::vector<std::string> outputs_;
  std::vector<ProtoGate> gates_;
  std::unordered_map<std::string, int> declared_;  // any declared signal name
  std::unordered_set<std::string> used_fresh_;     // names handed out, not yet driven
};

class Netlist {
 public:
  Netlist() = default;  // empty netlist; useful as a placeholder value

  const std::string& name() const { return name_; }
  const std::vector<std::string>& pis() const { return pis_; }
  const std::vector<std::string>& kis() const { return kis_; }
  const std::vector<std::string>& pos() const { return po_names_; }
  const std::vector<SignalRef>& po_refs() const { return po_refs_; }
  const std::vector<Gate>& gates() const { return gates_; }
  const Gate& gate(int id) const { return gates_[id]; }
  int num_signals() const {
    return int(pis_.size() + kis_.size() + gates_.size());
  }

  std::optional<SignalRef> find(const std::string& name) const;
  const std::string& signal_name(SignalRef ref) const;
  bool is_po_net(const std::string& name) const;

  // Gate ids in dependency order; ties broken by ascending gate id, so the
  // order is canonical for a given netlist.
  const std::vector<int>& topo_order() const { return topo_; }

  // Gate ids reading this signal, one entry per fanin slot (a gate listing a
  // signal twice appears twice). Sorted.
  const std::vector<int>& loads(SignalRef ref) const;
  int po_load_count(SignalRef ref) const;

  FaninCone fanin_cone(int gate_id) const;
  FaninCone fanin_cone(SignalRef ref) const;
  // Transitive gate fanout of a signal, sorted.
  std::vector<int> fanout_cone(SignalRef ref) const;

  // Single-vector evaluation. The assignment must cover every PI and KI.
  std::map<std::string, bool> simulate(
      const std::map<std::string, bool>& assignment) const;
  // As simulate(), but reports every net (inputs and gate outputs).
  std::map<std::string, bool> simulate_all(
      const std::map<std::string, bool>& assignment) const;

 private:
  friend class NetlistBuilder;
  int signal_slot(SignalRef ref) const;

  std::string name_;
  std::vector<std::string> pis_;
  std::vector<std::string> kis_;
  std::vector<std::string> po_names_;
  std::vector<SignalRef> po_refs_;
  std::vector<Gate> gates_;
  std::unordered_map<std::string, SignalRef> by_name_;
  std::vector<int> topo_;
  std::vector<std::vector<int>> loads_;  // indexed by signal slot
  std::vector<int> po_load_counts_;
};

// Evaluates one gate over booleans. N-ary semantics: AND/OR fold over all
// inputs, XOR is the parity, NAND/NOR/XNOR are their complements.
bool eval_gate(GateType type, const std::vector<bool>& inputs);

struct BenchParseOptions {
  std::string key_input_prefix = "keyinput";
};

Netlist parse_bench(const std::string& text,
                    const BenchParseOptions& opts = {});
Netlist parse_bench_file(const std::string& path,
                         const BenchParseOptions& opts = {});

// Serializes as INPUT lines, then OUTPUT lines, then gates in topological
// order. Throws if the netlist still contains pseudo-gates.
std::string write_bench(const Netlist& n);

// Same interface lists and the same name->(type, fanin names) mapping.
// Gate ids and storage order are allowed to differ.
bool structural_equal(const Netlist& a, const Netlist& b,
                      std::string* diff = nullptr);

}  // namespace locklab

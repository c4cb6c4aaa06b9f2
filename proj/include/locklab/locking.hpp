#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "locklab/netlist.hpp"

namespace locklab {

enum class GateClass : std::uint8_t { Design, AntiSat, Perturb, Restore };

const char* gate_class_name(GateClass c);                    // "design", ...
const char* gate_class_abbrev(GateClass c);                  // "DN", "AN", ...
std::optional<GateClass> gate_class_from_name(std::string_view name);
bool is_protection_class(GateClass c);

enum class LockScheme : std::uint8_t { AntiSat, TtLock, SfllHd };

const char* lock_scheme_name(LockScheme s);  // "antisat", "ttlock", "sfll_hd"
std::optional<LockScheme> lock_scheme_from_name(std::string_view name);

// How the locked inputs / target net are chosen.
struct SelectionPolicy {
  enum class Kind : std::uint8_t { Random, FirstK, Explicit } kind = Kind::Random;
  std::vector<std::string> explicit_names;  // inputs (Explicit)
  std::string explicit_target;              // target net/PO (Explicit)
};

using GroundTruthLabels = std::map<std::string, GateClass>;

struct LockResult {
  Netlist locked;
  std::vector<bool> key;          // correct key, keyinput0 first
  GroundTruthLabels labels;       // total over the locked netlist's gates
  LockScheme scheme = LockScheme::AntiSat;
  int key_width = 0;
  int hd = 0;                     // SFLL distance parameter; 0 for TTLock
  std::uint64_t seed = 0;
  std::vector<std::string> protected_inputs;  // ordered, pairs with key bits
  std::string target_net;         // net the protection is spliced into
  // Name of the original target driver after the splice. Empty for Anti-SAT
  // (loads are rewired, no gate is renamed).
  std::string renamed_driver;
  // Protection unit outputs feeding the integration XORs.
  std::string antisat_out;        // Anti-SAT: the final AND (Y)
  std::string perturb_out;        // SFLL/TTLock
  std::string restore_out;        // SFLL/TTLock
  std::vector<std::string> integration_gates;
};

struct LockOptions {
  SelectionPolicy inputs;
  SelectionPolicy target;
  std::string key_input_prefix = "keyinput";
};

// Anti-SAT: two complementary AND-tree branches over the same K/2 protected
// inputs, each masked by half the key; their conjunction Y is constant 0 for
// any key with equal halves and is XORed into an internal net.
// Requires an even K >= 2, at least K/2 PIs and no pre-existing key inputs.
LockResult lock_antisat(const Netlist& n, int key_width, std::uint64_t seed,
                        const LockOptions& opts = {});

// SFLL-HD^h: a perturb unit flips one PO's driver exactly on the inputs at
// Hamming distance h from the hard-coded key; a keyed restore unit cancels
// the flip when the right key is applied. Requires h <= K <= |PIs|.
LockResult lock_sfll_hd(const Netlist& n, int key_width, int hd,
                        std::uint64_t seed, const LockOptions& opts = {});

// TTLock == SFLL-HD^0.
LockResult lock_ttlock(const Netlist& n, int key_width, std::uint64_t seed,
                       const LockOptions& opts = {});

// Hamming-distance checker sub-network: out == [HD(inputs, key) == h].
// With `hard_key` set the key is folded into NOT/BUF gates; otherwise one
// key input per bit is created (named by fresh key-input names the caller
// added). Gates are appended to the builder; the created gate names are
// returned with the output net last.
struct HdCheckerResult {
  std::string output;
  std::vector<std::string> gates;
};

HdCheckerResult build_hd_checker(NetlistBuilder& b,
                                 const std::vector<std::string>& inputs,
                                 const std::vector<std::string>& key_nets,
                                 const std::vector<bool>* hard_key, int hd,
                                 const std::string& prefix);

// Convenience: standalone checker circuit with PIs in0..in{w-1} (and key
// inputs when hard_key is null) and a single PO named "hd".
Netlist hd_checker_circuit(int width, int hd, const std::vector<bool>* hard_key,
                           const std::string& key_input_prefix = "keyinput");

// Binds the key inputs to the given bits and simplifies. The PI interface is
// preserved; leftover key logic goes dead and is swept. The result has no KIs.
Netlist apply_key(const Netlist& locked, const std::vector<bool>& key);

}  // namespace locklab

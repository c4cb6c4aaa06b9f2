#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "locklab/netlist.hpp"
#include "locklab/postprocess.hpp"

namespace locklab {

// Splice points of the protection logic: protection-classified XOR/XNOR
// gates that mix a design-classified gate fanin with a protection-side
// fanin (a key input or a protection-classified gate). A cancel stage that
// reads another splice point instead of design logic qualifies through it.
// Returns ascending gate ids; throws when the classification marks none.
std::vector<int> find_integration_gates(const Netlist& n,
                                        const PredictionMap& preds);

// Cuts the classified protection logic out: pins every protection-side
// fanin net of the splice points to 0, folds the constants through, drops
// the dead cones and unloaded key inputs, and splices out pass-through
// buffers the fold leaves on outputs. Primary inputs are never dropped,
// even if the cut leaves them unloaded. Returns the recovered netlist;
// throws if a key input survives with live loads (the classification
// missed part of the keyed logic).
Netlist remove_protection(const Netlist& n, const PredictionMap& preds);

enum class EquivStatus : std::uint8_t {
  EquivalentExhaustive,  // whole input space enumerated, no mismatch
  EquivalentSampled,     // sampled vectors only, no mismatch
  NotEquivalent,
};
const char* equiv_status_name(EquivStatus s);  // "equivalent_exhaustive", ...

// The whole input space is enumerated when it fits in max_exhaustive
// patterns; otherwise random_vectors seeded samples are compared.
struct EquivBudget {
  std::uint64_t max_exhaustive = std::uint64_t{1} << 24;
  std::uint64_t random_vectors = 100000;
  std::uint64_t seed = 0;
};

struct EquivalenceVerdict {
  EquivStatus status = EquivStatus::NotEquivalent;
  // Full PI assignment; present iff not equivalent. Re-checked on both
  // circuits by single-vector simulation before being reported.
  std::map<std::string, bool> counterexample;
  std::uint64_t vectors_checked = 0;
};

// Simulation-based comparison. Both netlists must be key-free and expose
// identical PI and PO name sets; ordering may differ, matching is by name.
// Deterministic and symmetric in (a, b).
EquivalenceVerdict check_equivalence(const Netlist& a, const Netlist& b,
                                     const EquivBudget& budget = {});

}  // namespace locklab

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "locklab/netlist.hpp"

namespace locklab {

// Forces named signals to constants and simplifies to a fixpoint. Pinning an
// internal net replaces its driver; the old cone goes dead but is not removed
// here. Gates untouched by constants come through unchanged, so pinning
// nothing returns an identical netlist. Simplification absorbs constants into
// consumers (AND with a 0 collapses, XOR with a 1 inverts, single-survivor
// gates turn into pass-throughs that are folded into their loads). A constant
// can survive only as a pseudo-gate driving a genuinely constant PO.
Netlist constant_propagate(const Netlist& n,
                           const std::map<std::string, bool>& pins);

struct DeadLogicOptions {
  bool drop_unloaded_pis = true;
  bool drop_unloaded_kis = true;
};

struct DeadLogicResult {
  Netlist netlist;
  std::vector<std::string> dropped_pis;
  std::vector<std::string> dropped_kis;
};

// Deletes every gate with no path to a PO. Inputs left without any load are
// dropped from the interface when the corresponding option is set.
DeadLogicResult remove_dead_logic(const Netlist& n,
                                  const DeadLogicOptions& opts = {});

enum class RewriteRule : std::uint8_t {
  XorExpand,        // 2-input XOR/XNOR via AND/OR/NOT
  XnorToNotXor,     // XNOR -> NOT(XOR)
  DeMorgan,         // NAND -> OR of NOTs, NOR -> AND of NOTs
  NotPairCollapse,  // NOT(NOT(x)) -> BUF(x)
  AssocRebalance,   // n-ary AND/OR/XOR -> balanced 2-input tree
};

std::vector<RewriteRule> all_rewrite_rules();

struct RewriteResult {
  Netlist netlist;
  // For every gate of the result, the name of the gate in the source netlist
  // it descends from. Original gates map to themselves.
  std::map<std::string, std::string> origin;
};

// Applies semantics-preserving structural rewrites at pseudo-randomly chosen
// sites. Interface and gate output names are preserved; helper gates get
// fresh names. Deterministic in (n, rules, seed, passes).
RewriteResult rewrite_augment_traced(const Netlist& n,
                                     const std::vector<RewriteRule>& rules,
                                     std::uint64_t seed, int passes = 1);

Netlist rewrite_augment(const Netlist& n,
                        const std::vector<RewriteRule>& rules,
                        std::uint64_t seed, int passes = 1);

}  // namespace locklab

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "locklab/netlist.hpp"

namespace locklab {

// 64-way bit-parallel evaluation: every signal carries one 64-bit word, one
// pattern per bit lane.
using Word = std::uint64_t;

// Fills `out[i]` with the word for input i (PIs first, then KIs) for the
// 64-pattern block starting at pattern index `base`.
using PatternSource =
    std::function<void(std::uint64_t base, std::vector<Word>& out)>;

// Exhaustive enumeration over PIs (KIs must be absent or bound). Pattern p
// assigns bit i of p to PI i.
PatternSource exhaustive_patterns(int num_inputs);
// Seeded pseudo-random patterns. The word for input i in block b depends only
// on (seed, i, b), never on evaluation order.
PatternSource random_patterns(std::uint64_t seed, int num_inputs);

// Evaluates `num_patterns` patterns and returns, per PO, the packed output
// words (ceil(num_patterns/64) words each; unused high lanes are zero-filled
// by the caller's interpretation, their values are unspecified).
//
// `bindings` fixes named inputs to constants; bound inputs are excluded from
// the pattern source numbering.
struct BatchResult {
  std::vector<std::string> po_names;
  std::vector<std::vector<Word>> po_words;  // [po][word]
};

struct InputBinding {
  std::string name;
  bool value;
};

BatchResult simulate_batch(const Netlist& n, const PatternSource& source,
                           std::uint64_t num_patterns,
                           const std::vector<InputBinding>& bindings = {});

namespace ref {
// Serial reference of simulate_batch; identical results, no OpenMP.
BatchResult simulate_batch(const Netlist& n, const PatternSource& source,
                           std::uint64_t num_patterns,
                           const std::vector<InputBinding>& bindings = {});
}  // namespace ref

}  // namespace locklab

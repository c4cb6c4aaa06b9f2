#pragma once

#include <cstdint>
#include <string>

#include "locklab/netlist.hpp"

namespace locklab {

// Parameters for the synthetic benchmark generator. Gate type weights skew
// toward AND/OR families with a meaningful share of XOR/XNOR and inverters,
// so generated designs are not trivially separable from protection logic.
struct CircuitGenConfig {
  std::string name = "rand";
  int num_pis = 16;
  int num_pos = 4;
  int num_gates = 100;
  std::uint64_t seed = 1;
  int max_arity = 3;
  // Every PI gets at least one load and every gate reaches some PO.
  bool connect_all = true;
};

// Deterministic random DAG of bench gates. The result is valid, acyclic and,
// with connect_all, free of dead logic and unused inputs.
Netlist generate_circuit(const CircuitGenConfig& cfg);

}  // namespace locklab

#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "locklab/locking.hpp"
#include "locklab/netlist.hpp"

namespace locklab {

// Per-gate class assignment produced by a classifier (or taken from ground
// truth). Must be total over the netlist's gates. Confidence rides along for
// reporting; the rectification rules are purely structural and ignore it.
struct NodePrediction {
  GateClass cls = GateClass::Design;
  double confidence = 1.0;

  friend bool operator==(const NodePrediction&,
                         const NodePrediction&) = default;
};

struct PredictionMap {
  LockScheme scheme = LockScheme::AntiSat;
  std::map<std::string, NodePrediction> nodes;
};

// Wraps ground-truth labels as a prediction map (confidence 1).
PredictionMap predictions_from_labels(const GroundTruthLabels& labels,
                                      LockScheme scheme);

// Classes indexed by gate id. Throws unless the map covers every gate and
// uses only classes valid under its scheme.
std::vector<GateClass> prediction_classes(const Netlist& n,
                                          const PredictionMap& preds);

// One relabeling event. `rule` is a stable identifier of the structural rule
// that fired:
//   anti-SAT:  drop-no-ki, drop-design-cone, absorb-pure-cone,
//              absorb-direct-ki, absorb-splice
//   TTLock/SFLL: drop-restore, restore-to-perturb, drop-perturb,
//              absorb-perturb-cone, absorb-perturb-loads,
//              absorb-restore-cone, absorb-cancel, absorb-splice
struct RectifyEvent {
  std::string gate;
  GateClass predicted = GateClass::Design;
  GateClass rectified = GateClass::Design;
  std::string rule;
};

struct RectifyResult {
  PredictionMap preds;
  std::vector<RectifyEvent> log;   // in application order
  int iterations = 0;              // sweeps run, including the final quiet one
};

// Rectifies anti-SAT predictions against circuit structure. A gate predicted
// as protection logic must carry key influence in its fan-in cone; a gate
// predicted design whose cone is pure protection logic is absorbed into it.
// Sweeps to a fixpoint; throws if the assignment still changes after |gates|
// sweeps. Classes must be in {Design, AntiSat}.
RectifyResult rectify_antisat(const Netlist& n, const PredictionMap& preds);

// Protected-input set X: the non-key primary inputs feeding restore-classified
// logic directly. Throws when nothing is classified restore (the attack has
// nothing to anchor on). Classes must be in {Design, Perturb, Restore}.
std::set<std::string> infer_protected_inputs(const Netlist& n,
                                             const PredictionMap& preds);

// Rectifies TTLock / SFLL-HD predictions. Restore claims need key influence;
// perturb claims need a path into restore logic and a fan-in cone controlled
// solely by protected inputs; design gates matching those shapes are absorbed.
RectifyResult rectify_sfll(const Netlist& n, const PredictionMap& preds);

// Dispatches on preds.scheme.
RectifyResult rectify(const Netlist& n, const PredictionMap& preds);

// CSV log: gate,predicted_class,rectified_class,rule_fired
void save_rectify_log(const std::string& path,
                      const std::vector<RectifyEvent>& log);

}  // namespace locklab

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "locklab/gnn.hpp"
#include "locklab/locking.hpp"
#include "locklab/redactor.hpp"

namespace locklab {

// Configuration problems (bad file, bad field, bad combination). The CLI
// maps these to their own exit code.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::vector<std::string> benchmarks;  // bench file paths, >= 3 designs
  LockScheme scheme = LockScheme::AntiSat;
  std::vector<int> key_widths{8};
  std::vector<int> hd_values{0};  // per-scheme distance; {0} unless sfll_hd
  int locks_per_setting = 2;
  std::uint64_t seed = 1;
  int augmentation_passes = 0;  // extra rewritten variants per train instance
  std::string test_design;
  std::string val_design;
  std::string out_dir = "out";
  EquivBudget equiv;
  TrainConfig train;
};

// Reads and validates a JSON config. Unknown fields, missing files, and
// scheme-invalid K/h combinations are errors; messages carry the file and
// field (parse errors include line and column).
ExperimentConfig load_experiment_config(const std::string& path);

// One locked instance on disk.
struct InstanceRef {
  std::string design;
  int key_width = 0;
  int hd = 0;
  std::uint64_t seed = 0;  // instance seed derived from the config seed
  std::string dir;         // <out>/<scheme>/<design>/<K>_<h>_<seed>
  Split split = Split::Train;
};

struct GenSummary {
  std::vector<InstanceRef> instances;
  std::vector<std::string> warnings;  // skipped settings, empty dataset
};

// Locks every (design, K, h, lock) combination, writes per-instance
// locked.bench / labels.csv / meta.json / secret.json, the encoded
// train+val dataset under <out>/encoded, and <out>/dataset_manifest.json.
// Settings a design cannot satisfy (too few inputs) are skipped with a
// warning. Deterministic per (config, seed).
GenSummary gen_dataset(const ExperimentConfig& cfg, int jobs = 1);

struct TrainSummary {
  std::string checkpoint_path;
  std::string history_path;
  int epochs = 0;
  int best_epoch = 0;
  double best_val_accuracy = 0.0;
};

// Leave-one-design-out training over the encoded dataset; writes
// <out>/checkpoint.json and <out>/history.csv.
TrainSummary train_pipeline(const ExperimentConfig& cfg);

struct InstanceOutcome {
  InstanceRef ref;
  int nodes = 0;
  double pre_accuracy = 0.0;   // raw model predictions
  double post_accuracy = 0.0;  // after rectification
  int rectify_events = 0;
  bool removal_ok = false;
  std::string removal_error;  // set when removal threw
  std::string equiv_status;   // equiv_status_name, empty when removal failed
  std::uint64_t vectors_checked = 0;
  // Post-rectification confusion summary, "2 DN as PN" form, and per-class
  // scores in checkpoint class order.
  std::vector<std::string> misclassified;
  std::vector<double> precision, recall, f1;
};

struct AttackSummary {
  std::vector<InstanceOutcome> outcomes;
  double removal_success = 0.0;  // fraction of test instances equivalent
  bool all_verified = false;
  std::string report_json_path;
  std::string report_csv_path;
};

// Predict, rectify, remove and verify every test instance. The attack stage
// reads only the checkpoint, the manifest and locked netlists; labels and
// originals are read afterwards by the evaluation stage. Failures are
// reported per instance, not thrown. Writes <out>/report.json, .csv, and
// per-instance recovered.bench / predictions.csv / rectify_log.csv.
AttackSummary attack_pipeline(const ExperimentConfig& cfg, int jobs = 1);

// Merges attack reports into <out_dir>/aggregate.json and .csv (averages
// per report plus overall removal success). Throws ConfigError on empty
// input or schema mismatch.
void aggregate_reports(const std::vector<std::string>& report_paths,
                       const std::string& out_dir);

// Built-in smoke checks on an embedded circuit (lock and unlock round trip,
// oracle removal, simulation kernel agreement, checkpoint round trip).
// Returns the number of failed checks and prints one line per check.
int selfcheck();

}  // namespace locklab

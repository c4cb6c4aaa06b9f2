#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "locklab/pipeline.hpp"

namespace {

// Exit codes: 0 success, 1 configuration error, 2 a stage failed,
// 3 the result did not verify.
enum ExitCode { kOk = 0, kConfig = 1, kStage = 2, kVerify = 3 };

struct CommonOpts {
  std::string config_path;
  std::string out_dir;       // overrides the config's "out" when set
  std::uint64_t seed = 0;    // overrides the config's "seed" when set
  bool seed_set = false;
  int jobs = 1;
};

void add_common(CLI::App* cmd, CommonOpts* o) {
  cmd->add_option("--config", o->config_path, "experiment config (JSON)")
      ->required();
  cmd->add_option("--out", o->out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", o->seed, "experiment seed (overrides config)")
      ->each([o](const std::string&) { o->seed_set = true; });
  cmd->add_option("--jobs", o->jobs, "parallel instances")
      ->check(CLI::PositiveNumber);
}

locklab::ExperimentConfig load(const CommonOpts& o) {
  locklab::ExperimentConfig cfg =
      locklab::load_experiment_config(o.config_path);
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (o.seed_set) {
    cfg.seed = o.seed;
    cfg.equiv.seed = o.seed;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"oracle-less attack laboratory for logic locking"};
  app.set_version_flag("--version", std::string("locklab ") + LOCKLAB_VERSION);
  app.require_subcommand(1);

  CommonOpts gen_o, train_o, attack_o;
  CLI::App* gen = app.add_subcommand(
      "gen-dataset", "lock the benchmarks and encode the training data");
  add_common(gen, &gen_o);
  CLI::App* train =
      app.add_subcommand("train", "train the classifier on the dataset");
  add_common(train, &train_o);
  CLI::App* attack = app.add_subcommand(
      "attack", "predict, rectify, remove and verify the held-out design");
  add_common(attack, &attack_o);

  std::vector<std::string> report_paths;
  std::string report_out = "out";
  CLI::App* report =
      app.add_subcommand("report", "merge attack reports into one table");
  report->add_option("reports", report_paths, "report.json files")
      ->required();
  report->add_option("--out", report_out, "output directory");

  CLI::App* self =
      app.add_subcommand("selfcheck", "run the built-in smoke checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      locklab::GenSummary s = locklab::gen_dataset(load(gen_o), gen_o.jobs);
      for (const std::string& w : s.warnings)
        std::fprintf(stderr, "warning: %s\n", w.c_str());
      std::printf("locked %zu instances\n", s.instances.size());
      return kOk;
    }
    if (*train) {
      locklab::TrainSummary s = locklab::train_pipeline(load(train_o));
      std::printf("trained %d epochs, best epoch %d, val accuracy %.4f\n",
                  s.epochs, s.best_epoch, s.best_val_accuracy);
      std::printf("checkpoint: %s\n", s.checkpoint_path.c_str());
      return kOk;
    }
    if (*attack) {
      locklab::AttackSummary s =
          locklab::attack_pipeline(load(attack_o), attack_o.jobs);
      for (const locklab::InstanceOutcome& o : s.outcomes)
        std::printf("%s K=%d h=%d: accuracy %.4f -> %.4f, %s\n",
                    o.ref.design.c_str(), o.ref.key_width, o.ref.hd,
                    o.pre_accuracy, o.post_accuracy,
                    o.equiv_status.empty() ? "NOT_EQUIVALENT (removal failed)"
                                           : o.equiv_status.c_str());
      std::printf("removal success: %.4f\n", s.removal_success);
      std::printf("report: %s\n", s.report_json_path.c_str());
      return s.all_verified ? kOk : kVerify;
    }
    if (*report) {
      locklab::aggregate_reports(report_paths, report_out);
      std::printf("aggregated %zu reports into %s\n", report_paths.size(),
                  report_out.c_str());
      return kOk;
    }
    if (*self) {
      const int failed = locklab::selfcheck();
      return failed == 0 ? kOk : kVerify;
    }
  } catch (const locklab::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kStage;
  }
  return kConfig;
}

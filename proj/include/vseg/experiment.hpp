#pragma once

#include <string>
#include <vector>

#include "vseg/augment.hpp"
#include "vseg/config.hpp"
#include "vseg/dataio.hpp"
#include "vseg/trainer.hpp"

namespace vseg {

// Command orchestrations behind the CLI. Each run_* writes its artifacts
// under cfg.output_dir (every CSV embeds the resolved config as comment
// lines) and throws a vseg error on failure; the CLI maps exceptions to
// exit codes.

struct TrainArtifacts {
  TrainResult result;
  std::string log_path;         // train_log.csv
  std::string best_checkpoint;  // best.ckpt
};

// Augmented training items for a split; patch mode expands each augmented
// sample into its 9 half-size patches (upsampled 2x).
TrainStream make_stream(const std::vector<FundusSample>& train,
                        const AugmentPlan& plan, Mode mode);

// Replicates or green-selects channels so image.c matches want.
Tensor adapt_channels(const Tensor& image, int want);

TrainArtifacts run_train(ExperimentConfig cfg);

// Evaluates a checkpoint on the test split; writes report.csv (one row per
// image plus a macro row) and returns its path. threshold_policy best-f1
// sweeps the validation split first.
std::string run_eval(ExperimentConfig cfg, const std::string& checkpoint_path);

// Trains and evaluates every variant of the backbone with a shared seed and
// augmentation plan; writes ablate.csv (HED included only for vgg).
std::string run_ablate(ExperimentConfig cfg);

// Trains on train_ds, evaluates on test_ds's test split at its native
// resolution; writes crosstrain.csv with SE/SP/ACC/AUC.
std::string run_crosstrain(ExperimentConfig cfg, Dataset train_ds, Dataset test_ds);

// CLI entry point (also used in-process by tests). Returns the exit code:
// 0 success, 2 usage error, 1 runtime failure.
int cli_main(int argc, const char* const* argv);

}  // namespace vseg

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vseg/config.hpp"
#include "vseg/dataio.hpp"
#include "vseg/metrics.hpp"
#include "vseg/model.hpp"

namespace vseg {

// Lazily materialized training items (augmented samples, or their patches).
// get(i) must be a pure function of i so epochs revisit identical items.
struct TrainStream {
  std::size_t count = 0;
  std::function<FundusSample(std::size_t)> get;
};

struct TrainRecord {
  long long iteration = 0;
  double train_loss = 0;  // mean total loss over the window since last record
  MetricsReport val;
  std::string checkpoint_path;  // relative to the training output directory
};

struct TrainResult {
  Params best;               // deep copy of the best-scoring snapshot
  long long best_iteration = 0;
  double best_score = 0;
  std::vector<TrainRecord> history;
  bool diverged = false;  // loss went non-finite; last finite state retained
};

struct TrainOptions {
  OptimizerConfig opt;
  std::string output_dir;       // checkpoints land in <output_dir>/checkpoints
  double val_threshold = 0.5;   // binarization threshold for validation metrics
  bool loss_in_fov = false;     // restrict loss pixels to the sample fov
  Mode eval_mode = Mode::image; // validation prediction path
  std::string selection = "auc";  // auc | f1 | acc; ties keep the earlier one
};

// One SGD update over every parameter entry:
//   v <- momentum * v - lr * (grad + weight_decay * theta);  theta += v.
// velocity is created zeroed on first use and stays parallel to entries.
void sgd_step(Params& params, std::vector<Tensor>& velocity,
              const OptimizerConfig& opt);

// Macro-averaged validation metrics at the given threshold.
MetricsReport validate(const ModelGraph& graph, const Params& params,
                       const std::vector<FundusSample>& val, double threshold,
                       Mode mode = Mode::image);

// Sequential SGD over stream items in per-epoch seeded-shuffle order, one
// item per iteration. Snapshots (checkpoint + validation metrics) every
// opt.snapshot_every iterations; zero defaults resolve to one epoch for the
// cadence and ten epochs for the total. Prints one line per snapshot.
TrainResult train(const ModelGraph& graph, Params params, const TrainStream& stream,
                  const std::vector<FundusSample>& val, const TrainOptions& options);

}  // namespace vseg

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vseg {

enum class Dataset { DRIVE, STARE, CHASE_DB1, SYNTHETIC };
enum class Variant { HED, DSN, BS_DSN, BTS_DSN };
enum class Backbone { vgg_groups, resnet_groups };
enum class Mode { image, patch };
enum class FuseOn { logits, probs };

std::string to_string(Dataset d);
std::string to_string(Variant v);
std::string to_string(Backbone b);
std::string to_string(Mode m);
std::string to_string(FuseOn f);
Dataset dataset_from_string(const std::string& s);
Variant variant_from_string(const std::string& s);
Backbone backbone_from_string(const std::string& s);
Mode mode_from_string(const std::string& s);
FuseOn fuse_on_from_string(const std::string& s);

struct OptimizerConfig {
  // learning_rate <= 0 means "resolve from the backbone preset":
  // vgg_groups -> 1e-8, resnet_groups -> 1e-7.
  double learning_rate = 0.0;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  // 0 means "resolve from the training set": max_iterations = 10 * |augmented
  // train set|, snapshot_every = |augmented train set| (one epoch-equivalent).
  long long max_iterations = 0;
  long long snapshot_every = 0;
  // 0 means "inherit the experiment seed".
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  Dataset dataset = Dataset::DRIVE;
  Variant variant = Variant::BTS_DSN;
  Backbone backbone = Backbone::vgg_groups;
  Mode mode = Mode::image;

  // Desk-scale widths by default; the full-scale preset is [64,128,256,512].
  std::vector<int> channel_widths = {8, 16, 32, 64};
  // Convs per group (vgg) or residual blocks per group (resnet); empty means
  // the backbone default ([2,2,3,3] resp. [1,3,4,6]).
  std::vector<int> group_depth;
  int tap_channels = 16;
  FuseOn fuse_on = FuseOn::logits;
  // Images arrive in [0,1]; the network consumes (x - input_center) *
  // input_scale. The 255 factor keeps loss-gradient magnitudes on the
  // 8-bit-range scale the fixed 1e-8 learning rate was tuned for. Centering
  // is off by default: brightness-correlated features are the discriminative
  // direction here, and centering measurably slows their emergence.
  double input_center = 0.0;
  double input_scale = 255.0;

  OptimizerConfig optimizer;
  std::string augment_plan_version = "v1";

  double threshold = 0.5;
  std::string threshold_policy = "fixed";  // fixed | best-f1
  std::string selection_metric = "auc";    // best-checkpoint criterion: auc | f1 | acc

  std::uint64_t seed = 1;
  std::string output_dir = "out";
  std::string data_root;

  double chase_rescale = 0.5;
  bool stare_green_only = true;
  bool loss_in_fov = false;
  // Side-loss weights; empty -> 1.0 for every side output.
  std::vector<double> alpha;
  std::string pretrained;  // optional checkpoint path for backbone weights
};

// Number of image channels the model sees for a dataset under this config.
int dataset_channels(const ExperimentConfig& cfg);

// Fills the defaults that depend on other fields (learning-rate preset,
// inherited optimizer seed) and validates enum-like string fields. Empty
// group_depth stays empty here; the graph builder substitutes the backbone
// default at build time.
void resolve_defaults(ExperimentConfig& cfg);

// Canonical flat key=value rendering of every field, one per line, sorted;
// embedded in output artifacts and hashed into checkpoints. Deliberately
// excludes output_dir and data_root so artifacts reproduce byte-identically
// across machines.
std::string serialize_config(const ExperimentConfig& cfg);

// Parses a flat key=value file (or one override line); unknown keys error.
void apply_config_line(ExperimentConfig& cfg, const std::string& line);
void load_config_file(ExperimentConfig& cfg, const std::string& path);

}  // namespace vseg

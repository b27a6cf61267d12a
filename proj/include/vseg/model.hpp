#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vseg/autodiff.hpp"
#include "vseg/config.hpp"
#include "vseg/tensor.hpp"

namespace vseg {

// One convolution layer of the backbone program.
struct ConvShape {
  std::string name;
  int in_c = 0, out_c = 0, k = 3, stride = 1, pad = 1;
  bool relu = true;
};

// A backbone block: plain conv chain, optionally residual (bottleneck) with
// an optional 1x1 projection on the skip path and a ReLU after the add.
struct BlockDesc {
  std::vector<ConvShape> convs;
  std::optional<ConvShape> projection;
  bool residual = false;
};

struct GroupDesc {
  bool pool_before = false;  // 2x2/2 max pool entering the group
  std::vector<BlockDesc> blocks;
};

// Declarative network topology. groups/taps/connections are emitted in
// topological order; forward interprets this description.
struct ModelGraph {
  Backbone backbone = Backbone::vgg_groups;
  Variant variant = Variant::BTS_DSN;
  int num_sides = 4;  // M
  bool bottom_top = false, top_bottom = false;
  int tap_channels = 16;
  FuseOn fuse_on = FuseOn::logits;
  double input_center = 0.0;
  double input_scale = 255.0;
  int in_channels = 3;
  std::vector<int> group_strides;   // per side, strictly increasing powers of 2
  std::vector<int> channel_widths;  // per group
  std::vector<GroupDesc> groups;    // backbone program, one entry per side

  // Canonical structural description and its hash; checkpoints embed the
  // hash and refuse to load into a different structure.
  std::string structure_string() const;
  std::uint64_t structure_hash() const;
};

// Learnable parameters as named autodiff leaves, in deterministic forward
// order (backbone convs, taps, connection messages, side classifiers,
// fusion weights "fuse.h"). alpha holds the non-learnable side-loss weights.
struct Params {
  std::vector<std::pair<std::string, ad::VarPtr>> entries;
  std::vector<double> alpha;
  std::uint64_t graph_hash = 0;
  std::uint64_t seed = 0;

  ad::VarPtr find(const std::string& name) const;
  void zero_grad();
  std::size_t scalar_count() const;
};

struct SideOutputs {
  std::vector<Tensor> side_logits;  // M maps (1,H,W), pre-sigmoid
  std::vector<Tensor> side_probs;   // sigmoid of the above
  Tensor fuse_logit;                // pre-sigmoid fusion input
  Tensor fuse_prob;
};

struct TapedOutputs {
  std::vector<ad::VarPtr> side_logits;
  ad::VarPtr fuse_logit;
};

ModelGraph build_graph(const ExperimentConfig& cfg);

Params init_params(const ModelGraph& graph, std::uint64_t seed,
                   const std::string& pretrained_path = "");

// Records the forward pass on the tape; image is a (in_channels,H,W) leaf.
TapedOutputs forward_taped(ad::Tape& tape, const ModelGraph& graph, const Params& params,
                           const ad::VarPtr& image);

// Pure forward: tensors in, tensors out.
SideOutputs forward(const ModelGraph& graph, const Params& params, const Tensor& image);

void checkpoint_save(const Params& params, const std::string& path);
Params checkpoint_load(const std::string& path, const ModelGraph& graph);

// Layer/shape table for `model describe`.
std::string describe(const ModelGraph& graph);

}  // namespace vseg

#pragma once

#include <utility>
#include <vector>

#include "vseg/autodiff.hpp"
#include "vseg/model.hpp"
#include "vseg/tensor.hpp"

namespace vseg {

struct LossBreakdown {
  std::vector<double> side_losses;  // one per side output
  double fuse_loss = 0.0;
  double total = 0.0;  // sum of alpha-weighted side losses plus fuse_loss
  double pos_weight = 0.0, neg_weight = 0.0;
};

// Class-balance coefficients (pos_weight = |Y-|/|Y|, neg_weight = |Y+|/|Y|)
// counted over region, or the whole image when region is null.
std::pair<double, double> balance_weights(const Tensor& truth, const Tensor* region);

// Per-pixel-sum class-balanced cross-entropy, probabilities clamped to
// [1e-12, 1-1e-12] before the logs. A single-class truth yields exactly 0.
double side_loss(const Tensor& prob, const Tensor& truth, const Tensor* region = nullptr);

// Pure breakdown from already-computed probabilities. |alpha| must equal the
// number of side outputs; the fusion loss enters with weight 1.
LossBreakdown total_loss(const SideOutputs& outputs, const Tensor& truth,
                         const std::vector<double>& alpha, const Tensor* region = nullptr);

// Taped counterpart used in training: attaches the fused sigmoid+loss nodes
// to the logits and returns the scalar total-loss var. Values agree bitwise
// with total_loss on the same forward pass.
ad::VarPtr taped_total_loss(ad::Tape& tape, const TapedOutputs& outputs,
                            const Tensor& truth, const std::vector<double>& alpha,
                            const Tensor& region, LossBreakdown* breakdown = nullptr);

// Full reverse-mode pass: zeroes params' gradients, runs forward + backward
// of the total loss, leaves dL/dtheta in each entry's grad tensor.
LossBreakdown gradients(const ModelGraph& graph, Params& params, const Tensor& image,
                        const Tensor& truth, const std::vector<double>& alpha,
                        const Tensor* region = nullptr);

}  // namespace vseg

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "vseg/tensor.hpp"

// Minimal define-by-run reverse-mode engine. A Tape records op nodes as they
// execute; backward() replays them in reverse creation order. Leaves (params,
// inputs) live outside any tape and survive across iterations; op outputs die
// with the tape. All math is double precision, single-threaded, deterministic.
namespace vseg::ad {

struct Var {
  Tensor value;
  Tensor grad;  // allocated only when needs; zero until backward touches it
  bool needs;   // true if a gradient must reach this var or one of its inputs

  Var(Tensor v, bool needs_grad) : value(std::move(v)), needs(needs_grad) {
    if (needs) grad = Tensor(value.c, value.h, value.w);
  }
  void zero_grad() { std::fill(grad.v.begin(), grad.v.end(), 0.0); }
};

using VarPtr = std::shared_ptr<Var>;

// requires_grad marks trainable leaves; constant inputs use the default.
VarPtr make_leaf(Tensor v, bool requires_grad = false);

// 1-D bilinear interpolation kernel of length 2*factor used by the fixed
// (non-learnable) transposed-convolution upsampler. factor 2 yields
// [0.25, 0.75, 0.75, 0.25]; the 2-D kernel is the outer product.
std::vector<double> bilinear_kernel_1d(int factor);

double sigmoid_scalar(double z);

// Class-balance coefficients counted over {region > 0.5}:
// pos_weight = |Y-|/|Y| multiplies the vessel term, neg_weight = |Y+|/|Y|
// the background term, so a single-class region zeroes the loss entirely.
struct BceWeights {
  double pos_weight = 0.0;
  double neg_weight = 0.0;
  std::int64_t n_pos = 0, n_neg = 0, n = 0;
};
BceWeights bce_weights(const Tensor& truth, const Tensor& region);

// Per-pixel-sum balanced cross-entropy over the region; probabilities are
// clamped to [eps, 1-eps], eps = 1e-12, before the logs.
double bce_loss_value(const Tensor& prob, const Tensor& truth, const Tensor& region,
                      const BceWeights& bw);

class Tape {
 public:
  // A non-tracking tape runs the same forward math but records no backward
  // nodes and allocates no gradient storage; used for pure inference.
  explicit Tape(bool track = true) : track_(track) {}

  // Cross-correlation; w is (out_c, in_c, k*k) with square k, b is (out_c,1,1).
  VarPtr conv2d(const VarPtr& x, const VarPtr& w, const VarPtr& b, int stride = 1,
                int pad = 0);
  VarPtr relu(const VarPtr& x);
  // 2x2 max pool, stride 2, ceil mode (trailing windows may be 1 wide/tall).
  VarPtr maxpool2(const VarPtr& x);
  // Per-channel transposed conv, stride = factor, kernel 2*factor, pad
  // factor/2, kernel fixed to exact bilinear weights (never learned). The
  // full output is in_h*factor and is cropped top-left to (out_h, out_w).
  VarPtr upsample_bilinear(const VarPtr& x, int factor, int out_h, int out_w);
  VarPtr concat(const std::vector<VarPtr>& xs);
  VarPtr add(const VarPtr& a, const VarPtr& b);
  // out = sum_m h[m] * xs[m]; h is a (M,1,1) tensor of fusion weights.
  VarPtr weighted_sum(const std::vector<VarPtr>& xs, const VarPtr& h);
  VarPtr sigmoid(const VarPtr& x);
  VarPtr shift(const VarPtr& x, double delta);
  VarPtr scale(const VarPtr& x, double alpha);
  VarPtr sum(const VarPtr& x);
  // Fused sigmoid + class-balanced cross-entropy over {region > 0.5}, scalar
  // output. Backward uses the exact logit derivative
  //   dL/dz = y * pos_weight * (p - 1) + (1 - y) * neg_weight * p,
  // which the value clamp does not perturb outside saturated regimes.
  VarPtr balanced_bce(const VarPtr& logit, const Tensor& truth, const Tensor& region);

  // Seeds root->grad with ones and replays recorded ops newest-first.
  // Gradients accumulate into every reachable var with needs == true.
  void backward(const VarPtr& root);

 private:
  bool track_;
  std::vector<std::function<void()>> nodes_;
};

}  // namespace vseg::ad

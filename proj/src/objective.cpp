#include "vseg/objective.hpp"

#include "vseg/error.hpp"

namespace vseg {

namespace {

Tensor ones_like(const Tensor& t) { return Tensor(t.c, t.h, t.w, 1.0); }

void check_alpha(const std::vector<double>& alpha, std::size_t m) {
  if (alpha.size() != m)
    throw structural_error("alpha has " + std::to_string(alpha.size()) +
                           " weights for " + std::to_string(m) + " side outputs");
}

}  // namespace

std::pair<double, double> balance_weights(const Tensor& truth, const Tensor* region) {
  const ad::BceWeights bw =
      ad::bce_weights(truth, region ? *region : ones_like(truth));
  return {bw.pos_weight, bw.neg_weight};
}

double side_loss(const Tensor& prob, const Tensor& truth, const Tensor* region) {
  const Tensor reg = region ? *region : ones_like(truth);
  return ad::bce_loss_value(prob, truth, reg, ad::bce_weights(truth, reg));
}

LossBreakdown total_loss(const SideOutputs& outputs, const Tensor& truth,
                         const std::vector<double>& alpha, const Tensor* region) {
  check_alpha(alpha, outputs.side_probs.size());
  LossBreakdown b;
  auto [pw, nw] = balance_weights(truth, region);
  b.pos_weight = pw;
  b.neg_weight = nw;
  for (std::size_t m = 0; m < outputs.side_probs.size(); ++m) {
    b.side_losses.push_back(side_loss(outputs.side_probs[m], truth, region));
    b.total += alpha[m] * b.side_losses.back();
  }
  b.fuse_loss = side_loss(outputs.fuse_prob, truth, region);
  b.total += b.fuse_loss;
  return b;
}

ad::VarPtr taped_total_loss(ad::Tape& tape, const TapedOutputs& outputs,
                            const Tensor& truth, const std::vector<double>& alpha,
                            const Tensor& region, LossBreakdown* breakdown) {
  check_alpha(alpha, outputs.side_logits.size());
  LossBreakdown b;
  const ad::BceWeights bw = ad::bce_weights(truth, region);
  b.pos_weight = bw.pos_weight;
  b.neg_weight = bw.neg_weight;

  ad::VarPtr total;
  for (std::size_t m = 0; m < outputs.side_logits.size(); ++m) {
    ad::VarPtr l = tape.balanced_bce(outputs.side_logits[m], truth, region);
    b.side_losses.push_back(l->value.v[0]);
    ad::VarPtr weighted = tape.scale(l, alpha[m]);
    total = total ? tape.add(total, weighted) : weighted;
  }
  ad::VarPtr fuse = tape.balanced_bce(outputs.fuse_logit, truth, region);
  b.fuse_loss = fuse->value.v[0];
  total = tape.add(total, fuse);
  b.total = total->value.v[0];
  if (breakdown) *breakdown = b;
  return total;
}

LossBreakdown gradients(const ModelGraph& graph, Params& params, const Tensor& image,
                        const Tensor& truth, const std::vector<double>& alpha,
                        const Tensor* region) {
  params.zero_grad();
  ad::Tape tape;
  TapedOutputs out = forward_taped(tape, graph, params, ad::make_leaf(image));
  LossBreakdown b;
  const Tensor reg = region ? *region : ones_like(truth);
  ad::VarPtr total = taped_total_loss(tape, out, truth, alpha, reg, &b);
  tape.backward(total);
  return b;
}

}  // namespace vseg

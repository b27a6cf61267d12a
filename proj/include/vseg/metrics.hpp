#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "vseg/tensor.hpp"

namespace vseg {

struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::int64_t total() const { return tp + fp + tn + fn; }
};

// degenerate marks reports where some denominator was empty and the affected
// metric was set to 0 instead of raising (keeps batch tables total).
struct MetricsReport {
  double se = 0, sp = 0, acc = 0, auc = 0, mcc = 0, f1 = 0;
  double precision = 0;
  ConfusionCounts counts;
  double threshold = 0.5;
  bool degenerate = false;
};

// Counts over {fov > 0.5} only; pred/truth are binary maps.
ConfusionCounts confusion(const Tensor& pred_binary, const Tensor& truth,
                          const Tensor& fov);

// SE = TP/(TP+FN), SP = TN/(TN+FP), ACC = (TP+TN)/all, PR = TP/(TP+FP),
// F1 = 2*PR*SE/(PR+SE), MCC = (TP*TN - FP*FN)/sqrt of the four marginals.
// Degenerate denominators give 0 and set the flag; auc/threshold unset.
MetricsReport scalar_metrics(const ConfusionCounts& c);

// Rank-based (Mann-Whitney) AUC with average ranks on ties; exactly the area
// under the empirical ROC swept over all thresholds. Errors when the FOV
// holds only one class.
double auc(const Tensor& prob, const Tensor& truth, const Tensor& fov);

// One (1-SP, SE) point per threshold (thresholds ascending), using the same
// p >= t binarization convention as evaluate.
std::vector<std::pair<double, double>> roc_points(const Tensor& prob,
                                                  const Tensor& truth, const Tensor& fov,
                                                  const std::vector<double>& thresholds);

// binarize at threshold -> confusion -> scalar metrics; auc from raw prob.
MetricsReport evaluate(const Tensor& prob, const Tensor& truth, const Tensor& fov,
                       double threshold);

// Unweighted mean of each metric across per-image reports; counts are summed.
MetricsReport macro_average(const std::vector<MetricsReport>& reports);

}  // namespace vseg

#include "vseg/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "vseg/error.hpp"

namespace vseg {

ConfusionCounts confusion(const Tensor& pred_binary, const Tensor& truth,
                          const Tensor& fov) {
  if (!pred_binary.same_shape(truth) || !pred_binary.same_shape(fov))
    throw metric_error("confusion inputs differ in shape");
  ConfusionCounts c;
  for (std::size_t i = 0; i < fov.size(); ++i) {
    if (fov.v[i] <= 0.5) continue;
    const bool p = pred_binary.v[i] > 0.5, t = truth.v[i] > 0.5;
    if (p && t)
      ++c.tp;
    else if (p && !t)
      ++c.fp;
    else if (!p && t)
      ++c.fn;
    else
      ++c.tn;
  }
  if (c.total() == 0) throw metric_error("empty FOV");
  return c;
}

MetricsReport scalar_metrics(const ConfusionCounts& c) {
  MetricsReport r;
  r.counts = c;
  auto ratio = [&r](std::int64_t num, std::int64_t den) {
    if (den == 0) {
      r.degenerate = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  r.se = ratio(c.tp, c.tp + c.fn);
  r.sp = ratio(c.tn, c.tn + c.fp);
  r.acc = ratio(c.tp + c.tn, c.total());
  r.precision = ratio(c.tp, c.tp + c.fp);
  if (r.precision + r.se == 0.0) {
    r.degenerate = true;
    r.f1 = 0.0;
  } else {
    r.f1 = 2.0 * r.precision * r.se / (r.precision + r.se);
  }
  // Factored square roots keep the product within double range for any
  // pixel-count scale.
  const double d1 = std::sqrt(static_cast<double>(c.tp + c.fp));
  const double d2 = std::sqrt(static_cast<double>(c.tp + c.fn));
  const double d3 = std::sqrt(static_cast<double>(c.tn + c.fp));
  const double d4 = std::sqrt(static_cast<double>(c.tn + c.fn));
  if (d1 == 0.0 || d2 == 0.0 || d3 == 0.0 || d4 == 0.0) {
    r.degenerate = true;
    r.mcc = 0.0;
  } else {
    const double num = static_cast<double>(c.tp) * static_cast<double>(c.tn) -
                       static_cast<double>(c.fp) * static_cast<double>(c.fn);
    r.mcc = num / d1 / d2 / d3 / d4;
  }
  return r;
}

namespace {

struct Scored {
  double score;
  bool pos;
};

void collect(const Tensor& prob, const Tensor& truth, const Tensor& fov,
             std::vector<Scored>& out, std::int64_t& n_pos, std::int64_t& n_neg) {
  if (!prob.same_shape(truth) || !prob.same_shape(fov))
    throw metric_error("auc inputs differ in shape");
  out.clear();
  n_pos = n_neg = 0;
  for (std::size_t i = 0; i < fov.size(); ++i) {
    if (fov.v[i] <= 0.5) continue;
    const bool pos = truth.v[i] > 0.5;
    out.push_back({prob.v[i], pos});
    (pos ? n_pos : n_neg)++;
  }
  if (n_pos == 0 || n_neg == 0)
    throw metric_error("AUC undefined: FOV holds a single class");
}

}  // namespace

double auc(const Tensor& prob, const Tensor& truth, const Tensor& fov) {
  std::vector<Scored> s;
  std::int64_t n_pos, n_neg;
  collect(prob, truth, fov, s, n_pos, n_neg);
  std::sort(s.begin(), s.end(),
            [](const Scored& a, const Scored& b) { return a.score < b.score; });
  // Average ranks over tie groups; U = sum of positive ranks - P(P+1)/2.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i;
    while (j < s.size() && s[j].score == s[i].score) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k)
      if (s[k].pos) rank_sum_pos += avg_rank;
    i = j;
  }
  const double p = static_cast<double>(n_pos), n = static_cast<double>(n_neg);
  const double u = rank_sum_pos - p * (p + 1.0) / 2.0;
  return u / (p * n);
}

std::vector<std::pair<double, double>> roc_points(const Tensor& prob, const Tensor& truth,
                                                  const Tensor& fov,
                                                  const std::vector<double>& thresholds) {
  std::vector<Scored> s;
  std::int64_t n_pos, n_neg;
  collect(prob, truth, fov, s, n_pos, n_neg);
  std::vector<double> pos, neg;
  for (const auto& e : s) (e.pos ? pos : neg).push_back(e.score);
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  std::vector<std::pair<double, double>> pts;
  pts.reserve(thresholds.size());
  for (double t : thresholds) {
    // predicted positive iff score >= t, matching binarize
    const auto tp = pos.end() - std::lower_bound(pos.begin(), pos.end(), t);
    const auto fp = neg.end() - std::lower_bound(neg.begin(), neg.end(), t);
    pts.emplace_back(static_cast<double>(fp) / static_cast<double>(n_neg),
                     static_cast<double>(tp) / static_cast<double>(n_pos));
  }
  return pts;
}

MetricsReport evaluate(const Tensor& prob, const Tensor& truth, const Tensor& fov,
                       double threshold) {
  Tensor pred(prob.c, prob.h, prob.w);
  for (std::size_t i = 0; i < prob.size(); ++i)
    pred.v[i] = prob.v[i] >= threshold ? 1.0 : 0.0;
  MetricsReport r = scalar_metrics(confusion(pred, truth, fov));
  r.threshold = threshold;
  r.auc = auc(prob, truth, fov);
  return r;
}

MetricsReport macro_average(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw metric_error("macro average of nothing");
  MetricsReport m;
  m.threshold = reports.front().threshold;
  for (const auto& r : reports) {
    m.se += r.se;
    m.sp += r.sp;
    m.acc += r.acc;
    m.auc += r.auc;
    m.mcc += r.mcc;
    m.f1 += r.f1;
    m.precision += r.precision;
    m.counts.tp += r.counts.tp;
    m.counts.fp += r.counts.fp;
    m.counts.tn += r.counts.tn;
    m.counts.fn += r.counts.fn;
    m.degenerate = m.degenerate || r.degenerate;
  }
  const double n = static_cast<double>(reports.size());
  m.se /= n;
  m.sp /= n;
  m.acc /= n;
  m.auc /= n;
  m.mcc /= n;
  m.f1 /= n;
  m.precision /= n;
  return m;
}

}  // namespace vseg

#include "vseg/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "vseg/error.hpp"
#include "vseg/inference.hpp"
#include "vseg/objective.hpp"
#include "vseg/rng.hpp"

namespace vseg {

namespace {

Params deep_copy(const Params& p) {
  Params out;
  out.alpha = p.alpha;
  out.graph_hash = p.graph_hash;
  out.seed = p.seed;
  out.entries.reserve(p.entries.size());
  for (const auto& [name, var] : p.entries)
    out.entries.emplace_back(name, ad::make_leaf(var->value, true));
  return out;
}

double selection_score(const MetricsReport& r, const std::string& metric) {
  if (metric == "auc") return r.auc;
  if (metric == "f1") return r.f1;
  if (metric == "acc") return r.acc;
  throw config_error("unknown selection metric: " + metric);
}

}  // namespace

void sgd_step(Params& params, std::vector<Tensor>& velocity,
              const OptimizerConfig& opt) {
  if (velocity.empty()) {
    velocity.reserve(params.entries.size());
    for (const auto& [name, var] : params.entries)
      velocity.emplace_back(var->value.c, var->value.h, var->value.w);
  }
  if (velocity.size() != params.entries.size())
    throw structural_error("optimizer state does not match parameter list");
  for (std::size_t i = 0; i < params.entries.size(); ++i) {
    ad::Var& var = *params.entries[i].second;
    Tensor& v = velocity[i];
    for (std::size_t j = 0; j < var.value.v.size(); ++j) {
      const double g = var.grad.v[j] + opt.weight_decay * var.value.v[j];
      v.v[j] = opt.momentum * v.v[j] - opt.learning_rate * g;
      var.value.v[j] += v.v[j];
    }
  }
}

MetricsReport validate(const ModelGraph& graph, const Params& params,
                       const std::vector<FundusSample>& val, double threshold,
                       Mode mode) {
  std::vector<MetricsReport> reports;
  reports.reserve(val.size());
  for (const FundusSample& s : val) {
    const Tensor prob = mode == Mode::patch
                            ? predict_patchwise(graph, params, s.image)
                            : predict_image(graph, params, s.image);
    reports.push_back(evaluate(prob, s.truth, s.fov, threshold));
  }
  return macro_average(reports);
}

TrainResult train(const ModelGraph& graph, Params params, const TrainStream& stream,
                  const std::vector<FundusSample>& val, const TrainOptions& options) {
  if (stream.count == 0) throw config_error("empty training stream");
  if (val.empty()) throw config_error("empty validation split");
  const OptimizerConfig& opt = options.opt;
  const long long n = static_cast<long long>(stream.count);
  const long long snapshot_every =
      opt.snapshot_every > 0 ? opt.snapshot_every : n;
  const long long max_iterations =
      opt.max_iterations > 0 ? opt.max_iterations : 10 * n;

  namespace fs = std::filesystem;
  fs::create_directories(fs::path(options.output_dir) / "checkpoints");

  TrainResult result;
  result.best = deep_copy(params);
  result.best_iteration = 0;
  result.best_score = -1.0;

  Rng rng(opt.seed);
  std::vector<std::size_t> order(stream.count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Tensor> velocity;
  double window_loss = 0.0;
  long long window_n = 0;

  for (long long iter = 1; iter <= max_iterations; ++iter) {
    const std::size_t pos = static_cast<std::size_t>((iter - 1) % n);
    if (pos == 0) rng.shuffle(order);
    const FundusSample item = stream.get(order[pos]);
    const Tensor* region = options.loss_in_fov ? &item.fov : nullptr;
    const LossBreakdown lb =
        gradients(graph, params, item.image, item.truth, params.alpha, region);
    if (!std::isfinite(lb.total)) {
      std::printf("iter %lld loss diverged (non-finite); stopping\n", iter);
      result.diverged = true;
      break;
    }
    sgd_step(params, velocity, opt);
    window_loss += lb.total;
    ++window_n;

    if (iter % snapshot_every == 0) {
      char rel[64];
      std::snprintf(rel, sizeof rel, "checkpoints/iter_%07lld.ckpt", iter);
      checkpoint_save(params, (fs::path(options.output_dir) / rel).string());
      TrainRecord rec;
      rec.iteration = iter;
      rec.train_loss = window_loss / static_cast<double>(window_n);
      rec.val = validate(graph, params, val, options.val_threshold,
                         options.eval_mode);
      rec.checkpoint_path = rel;
      window_loss = 0.0;
      window_n = 0;
      const double score = selection_score(rec.val, options.selection);
      if (score > result.best_score) {
        result.best_score = score;
        result.best_iteration = iter;
        result.best = deep_copy(params);
      }
      std::printf(
          "iter %lld loss %.6f val auc %.4f f1 %.4f acc %.4f %s\n", iter,
          rec.train_loss, rec.val.auc, rec.val.f1, rec.val.acc, rel);
      std::fflush(stdout);
      result.history.push_back(std::move(rec));
    }
  }
  return result;
}

}  // namespace vseg

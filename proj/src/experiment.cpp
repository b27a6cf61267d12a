#include "vseg/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <utility>

#include "vseg/csv.hpp"
#include "vseg/error.hpp"
#include "vseg/inference.hpp"
#include "vseg/metrics.hpp"
#include "vseg/model.hpp"
#include "vseg/util.hpp"

namespace vseg {

namespace fs = std::filesystem;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void embed_config(CsvWriter& w, const ExperimentConfig& cfg) {
  for (const std::string& line : split(serialize_config(cfg), '\n'))
    if (!line.empty()) w.comment(line);
}

std::vector<std::string> metric_cells(const MetricsReport& r) {
  return {fmt_double(r.se, 6),  fmt_double(r.sp, 6),  fmt_double(r.acc, 6),
          fmt_double(r.auc, 6), fmt_double(r.mcc, 6), fmt_double(r.f1, 6)};
}

DatasetSplit load_split(const ExperimentConfig& cfg) {
  if (cfg.data_root.empty())
    throw config_error(
        "data root not set (use --data-root, a config file, or VSEG_DATA_ROOT)");
  LoadOptions lo;
  lo.stare_green_only = cfg.stare_green_only;
  lo.chase_rescale = cfg.chase_rescale;
  return load_dataset(cfg.data_root, cfg.dataset, lo);
}

AugmentPlan checked_plan(const ExperimentConfig& cfg) {
  AugmentPlan plan = default_plan(cfg.dataset);
  if (plan.version != cfg.augment_plan_version)
    throw config_error("unknown augment plan version: " + cfg.augment_plan_version);
  return plan;
}

Tensor predict_any(const ModelGraph& graph, const Params& params,
                   const Tensor& image, Mode mode) {
  const Tensor in = adapt_channels(image, graph.in_channels);
  return mode == Mode::patch ? predict_patchwise(graph, params, in)
                             : predict_image(graph, params, in);
}

// Lowest threshold in {0.01..0.99} maximizing macro F1 on the given split.
double sweep_best_f1(const ModelGraph& graph, const Params& params,
                     const std::vector<FundusSample>& val, Mode mode) {
  std::vector<Tensor> probs;
  probs.reserve(val.size());
  for (const FundusSample& s : val)
    probs.push_back(predict_any(graph, params, s.image, mode));
  double best_t = 0.5, best_f1 = -1.0;
  for (int k = 1; k < 100; ++k) {
    const double t = k / 100.0;
    std::vector<MetricsReport> reports;
    reports.reserve(val.size());
    for (std::size_t i = 0; i < val.size(); ++i)
      reports.push_back(evaluate(probs[i], val[i].truth, val[i].fov, t));
    const double f1 = macro_average(reports).f1;
    if (f1 > best_f1) {
      best_f1 = f1;
      best_t = t;
    }
  }
  return best_t;
}

double resolve_threshold(const ExperimentConfig& cfg, const ModelGraph& graph,
                         const Params& params,
                         const std::vector<FundusSample>& val) {
  if (cfg.threshold_policy == "best-f1")
    return sweep_best_f1(graph, params, val, cfg.mode);
  return cfg.threshold;
}

struct TestEval {
  std::vector<std::pair<std::string, MetricsReport>> per_image;
  MetricsReport macro;
  double threshold = 0.5;
};

TestEval eval_on_test(const ExperimentConfig& cfg, const ModelGraph& graph,
                      const Params& params, const DatasetSplit& split) {
  TestEval out;
  out.threshold = resolve_threshold(cfg, graph, params, split.val);
  std::vector<MetricsReport> reports;
  for (const FundusSample& s : split.test) {
    const Tensor prob = predict_any(graph, params, s.image, cfg.mode);
    MetricsReport r = evaluate(prob, s.truth, s.fov, out.threshold);
    reports.push_back(r);
    out.per_image.emplace_back(s.id, r);
  }
  out.macro = macro_average(reports);
  return out;
}

void write_config_sidecar(const ExperimentConfig& cfg) {
  std::ofstream f(fs::path(cfg.output_dir) / "config.cfg", std::ios::binary);
  if (!f) throw io_error("cannot write config under " + cfg.output_dir);
  f << serialize_config(cfg);
}

}  // namespace

TrainStream make_stream(const std::vector<FundusSample>& train,
                        const AugmentPlan& plan, Mode mode) {
  if (train.empty()) throw config_error("empty training split");
  const std::size_t p = plan.transforms.size();
  const std::vector<FundusSample>* base = &train;
  TrainStream stream;
  if (mode == Mode::image) {
    stream.count = train.size() * p;
    stream.get = [base, plan, p](std::size_t i) {
      return apply_transform((*base)[i / p], plan.transforms[i % p]);
    };
  } else {
    stream.count = train.size() * p * 9;
    stream.get = [base, plan, p](std::size_t i) {
      const std::size_t a = i / 9;
      const FundusSample aug =
          apply_transform((*base)[a / p], plan.transforms[a % p]);
      return patch_sample(aug, make_layout(aug.image.h, aug.image.w),
                          static_cast<int>(i % 9));
    };
  }
  return stream;
}

Tensor adapt_channels(const Tensor& image, int want) {
  if (image.c == want) return image;
  if (image.c == 3 && want == 1) {
    // Green channel carries the vessel contrast in fundus photographs.
    Tensor out(1, image.h, image.w);
    for (int y = 0; y < image.h; ++y)
      for (int x = 0; x < image.w; ++x) out.at(0, y, x) = image.at(1, y, x);
    return out;
  }
  if (image.c == 1 && want == 3) {
    Tensor out(3, image.h, image.w);
    for (int ci = 0; ci < 3; ++ci)
      for (int y = 0; y < image.h; ++y)
        for (int x = 0; x < image.w; ++x) out.at(ci, y, x) = image.at(0, y, x);
    return out;
  }
  throw structural_error("cannot adapt a " + std::to_string(image.c) +
                         "-channel image to " + std::to_string(want) +
                         " channels");
}

TrainArtifacts run_train(ExperimentConfig cfg) {
  resolve_defaults(cfg);
  const DatasetSplit split = load_split(cfg);
  const AugmentPlan plan = checked_plan(cfg);
  const ModelGraph graph = build_graph(cfg);
  Params params = init_params(graph, cfg.seed, cfg.pretrained);
  const TrainStream stream = make_stream(split.train, plan, cfg.mode);

  TrainOptions topt;
  topt.opt = cfg.optimizer;
  topt.output_dir = cfg.output_dir;
  topt.val_threshold = cfg.threshold;
  topt.loss_in_fov = cfg.loss_in_fov;
  topt.eval_mode = cfg.mode;
  topt.selection = cfg.selection_metric;

  TrainArtifacts art;
  art.result = train(graph, std::move(params), stream, split.val, topt);

  fs::create_directories(cfg.output_dir);
  write_config_sidecar(cfg);

  art.best_checkpoint = (fs::path(cfg.output_dir) / "best.ckpt").string();
  checkpoint_save(art.result.best, art.best_checkpoint);

  art.log_path = (fs::path(cfg.output_dir) / "train_log.csv").string();
  CsvWriter log(art.log_path);
  embed_config(log, cfg);
  log.row({"iteration", "train_loss", "val_SE", "val_SP", "val_ACC", "val_AUC",
           "val_MCC", "val_F1", "checkpoint_path"});
  for (const TrainRecord& rec : art.result.history) {
    std::vector<std::string> cells{std::to_string(rec.iteration),
                                   fmt17(rec.train_loss)};
    for (std::string& m : metric_cells(rec.val)) cells.push_back(std::move(m));
    cells.push_back(rec.checkpoint_path);
    log.row(cells);
  }
  log.close();
  std::printf("best iteration %lld (%s %.4f); wrote %s and %s\n",
              art.result.best_iteration, cfg.selection_metric.c_str(),
              art.result.best_score, art.best_checkpoint.c_str(),
              art.log_path.c_str());
  return art;
}

std::string run_eval(ExperimentConfig cfg, const std::string& checkpoint_path) {
  resolve_defaults(cfg);
  const DatasetSplit split = load_split(cfg);
  const ModelGraph graph = build_graph(cfg);
  const Params params = checkpoint_load(checkpoint_path, graph);
  const TestEval ev = eval_on_test(cfg, graph, params, split);

  fs::create_directories(cfg.output_dir);
  const std::string path = (fs::path(cfg.output_dir) / "report.csv").string();
  CsvWriter w(path);
  embed_config(w, cfg);
  w.comment("checkpoint=" + fs::path(checkpoint_path).filename().string());
  w.comment("threshold_used=" + fmt17(ev.threshold));
  w.row({"id", "dataset", "variant", "backbone", "mode", "SE", "SP", "ACC",
         "AUC", "MCC", "F1"});
  const std::vector<std::string> tag{to_string(cfg.dataset), to_string(cfg.variant),
                                     to_string(cfg.backbone), to_string(cfg.mode)};
  auto emit = [&](const std::string& id, const MetricsReport& r) {
    std::vector<std::string> cells{id};
    cells.insert(cells.end(), tag.begin(), tag.end());
    for (std::string& m : metric_cells(r)) cells.push_back(std::move(m));
    w.row(cells);
  };
  for (const auto& [id, r] : ev.per_image) emit(id, r);
  emit("macro", ev.macro);
  w.close();
  std::printf("wrote %s (macro AUC %.4f, F1 %.4f at threshold %.2f)\n",
              path.c_str(), ev.macro.auc, ev.macro.f1, ev.threshold);
  return path;
}

std::string run_ablate(ExperimentConfig cfg) {
  resolve_defaults(cfg);
  const DatasetSplit split = load_split(cfg);
  const AugmentPlan plan = checked_plan(cfg);
  const TrainStream stream = make_stream(split.train, plan, cfg.mode);

  std::vector<Variant> variants{Variant::HED, Variant::DSN, Variant::BS_DSN,
                                Variant::BTS_DSN};
  if (cfg.backbone == Backbone::resnet_groups)
    variants.erase(variants.begin());  // HED is a vgg-only configuration

  fs::create_directories(cfg.output_dir);
  const std::string path = (fs::path(cfg.output_dir) / "ablate.csv").string();
  CsvWriter w(path);
  embed_config(w, cfg);
  w.row({"variant", "SE", "SP", "ACC", "AUC", "MCC", "F1"});
  for (Variant v : variants) {
    ExperimentConfig sub = cfg;
    sub.variant = v;
    sub.output_dir = (fs::path(cfg.output_dir) / to_string(v)).string();
    resolve_defaults(sub);
    const ModelGraph graph = build_graph(sub);
    Params params = init_params(graph, sub.seed, sub.pretrained);

    TrainOptions topt;
    topt.opt = sub.optimizer;
    topt.output_dir = sub.output_dir;
    topt.val_threshold = sub.threshold;
    topt.loss_in_fov = sub.loss_in_fov;
    topt.eval_mode = sub.mode;
    topt.selection = sub.selection_metric;
    const TrainResult res = train(graph, std::move(params), stream, split.val, topt);

    const TestEval ev = eval_on_test(sub, graph, res.best, split);
    std::vector<std::string> cells{to_string(v)};
    for (std::string& m : metric_cells(ev.macro)) cells.push_back(std::move(m));
    w.row(cells);
    std::printf("%s: test AUC %.4f F1 %.4f\n", to_string(v).c_str(),
                ev.macro.auc, ev.macro.f1);
  }
  w.close();
  std::printf("wrote %s\n", path.c_str());
  return path;
}

std::string run_crosstrain(ExperimentConfig cfg, Dataset train_ds, Dataset test_ds) {
  if (train_ds == test_ds)
    throw config_error("cross-training requires two different datasets");
  if (cfg.data_root.empty())
    throw config_error(
        "data root not set (use --data-root, a config file, or VSEG_DATA_ROOT)");
  // Two corpora are in play, so data_root is a parent directory holding one
  // subdirectory per dataset, named canonically (e.g. <root>/DRIVE).
  ExperimentConfig train_cfg = cfg;
  train_cfg.dataset = train_ds;
  train_cfg.data_root = (fs::path(cfg.data_root) / to_string(train_ds)).string();
  train_cfg.output_dir =
      (fs::path(cfg.output_dir) / ("train_" + to_string(train_ds))).string();
  const TrainArtifacts art = run_train(train_cfg);
  resolve_defaults(train_cfg);

  ExperimentConfig test_cfg = cfg;
  test_cfg.dataset = test_ds;
  test_cfg.data_root = (fs::path(cfg.data_root) / to_string(test_ds)).string();
  resolve_defaults(test_cfg);
  const DatasetSplit test_split = load_split(test_cfg);
  const ModelGraph graph = build_graph(train_cfg);
  const TestEval ev = eval_on_test(test_cfg, graph, art.result.best, test_split);

  fs::create_directories(cfg.output_dir);
  const std::string path = (fs::path(cfg.output_dir) / "crosstrain.csv").string();
  CsvWriter w(path);
  embed_config(w, train_cfg);
  w.row({"train_dataset", "test_dataset", "SE", "SP", "ACC", "AUC"});
  w.row({to_string(train_ds), to_string(test_ds), fmt_double(ev.macro.se, 6),
         fmt_double(ev.macro.sp, 6), fmt_double(ev.macro.acc, 6),
         fmt_double(ev.macro.auc, 6)});
  w.close();
  std::printf("wrote %s (transfer AUC %.4f)\n", path.c_str(), ev.macro.auc);
  return path;
}

}  // namespace vseg

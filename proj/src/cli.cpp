#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vseg/error.hpp"
#include "vseg/experiment.hpp"
#include "vseg/inference.hpp"
#include "vseg/model.hpp"
#include "vseg/synth.hpp"

namespace vseg {

namespace {

// Deferred key=value assignments keep the precedence defaults < config file
// < --set overrides < named flags, regardless of CLI11 parse order.
struct PendingConfig {
  std::string config_file;
  std::vector<std::string> sets;
  std::vector<std::string> flags;

  ExperimentConfig resolve() const {
    ExperimentConfig cfg;
    if (const char* env = std::getenv("VSEG_DATA_ROOT")) cfg.data_root = env;
    if (!config_file.empty()) load_config_file(cfg, config_file);
    for (const std::string& kv : sets) apply_config_line(cfg, kv);
    for (const std::string& kv : flags) apply_config_line(cfg, kv);
    return cfg;
  }
};

void add_common_flags(CLI::App& app, PendingConfig& pending) {
  app.add_option("--config", pending.config_file,
                 "flat key=value config file (defaults < file < flags)");
  app.add_option("--set", pending.sets,
                 "config override key=value, repeatable");
  auto defer = [&pending](const std::string& key) {
    return [&pending, key](const std::string& v) { pending.flags.push_back(key + "=" + v); };
  };
  app.add_option_function<std::string>("--dataset", defer("dataset"),
                                       "DRIVE | STARE | CHASE_DB1 | SYNTHETIC");
  app.add_option_function<std::string>("--variant", defer("variant"),
                                       "HED | DSN | BS-DSN | BTS-DSN");
  app.add_option_function<std::string>("--backbone", defer("backbone"),
                                       "vgg | resnet");
  app.add_option_function<std::string>("--mode", defer("mode"), "image | patch");
  app.add_option_function<std::string>("--seed", defer("seed"), "experiment seed");
  app.add_option_function<std::string>("--threshold", defer("threshold"),
                                       "binarization threshold in [0,1]");
  app.add_option_function<std::string>("--data-root", defer("data_root"),
                                       "dataset root (also VSEG_DATA_ROOT)");
  app.add_option_function<std::string>("--output-dir", defer("output_dir"),
                                       "artifact directory");
}

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"Deeply-supervised retinal vessel segmentation experiments"};
  app.require_subcommand(1);
  PendingConfig pending;

  CLI::App* prepare = app.add_subcommand("prepare", "load a dataset and print its summary");
  add_common_flags(*prepare, pending);

  CLI::App* plan_cmd = app.add_subcommand("augment-plan", "print a dataset's augmentation plan as CSV");
  std::string plan_dataset;
  plan_cmd->add_option("dataset", plan_dataset, "dataset name")->required();

  CLI::App* train_cmd = app.add_subcommand("train", "train a model, writing checkpoints and a log");
  add_common_flags(*train_cmd, pending);

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  std::string eval_ckpt;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  add_common_flags(*eval_cmd, pending);

  CLI::App* predict_cmd = app.add_subcommand("predict", "probability map for one image file");
  std::string pr_ckpt, pr_image, pr_out, pr_bin;
  predict_cmd->add_option("--checkpoint", pr_ckpt)->required();
  predict_cmd->add_option("--image", pr_image, "input image file")->required();
  predict_cmd->add_option("--out", pr_out, "output probability PNG")->required();
  predict_cmd->add_option("--bin", pr_bin, "optional binarized PNG");
  add_common_flags(*predict_cmd, pending);

  CLI::App* ablate_cmd = app.add_subcommand("ablate", "train + evaluate every variant of a backbone");
  add_common_flags(*ablate_cmd, pending);

  CLI::App* cross_cmd = app.add_subcommand(
      "cross-train",
      "train on one dataset, test on another; --data-root must be a parent "
      "directory with one canonically named subdirectory per dataset");
  std::string cross_train_ds, cross_test_ds;
  cross_cmd->add_option("--train-dataset", cross_train_ds)->required();
  cross_cmd->add_option("--test-dataset", cross_test_ds)->required();
  add_common_flags(*cross_cmd, pending);

  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic filament corpus");
  std::string synth_out;
  int synth_n = 12, synth_size = 128;
  std::uint64_t synth_seed = 1;
  synth_cmd->add_option("--out", synth_out, "output dataset root")->required();
  synth_cmd->add_option("--n", synth_n, "number of images (>= 3)");
  synth_cmd->add_option("--size", synth_size, "square image size");
  synth_cmd->add_option("--seed", synth_seed, "generator seed");

  CLI::App* model_cmd = app.add_subcommand("model", "model utilities");
  model_cmd->require_subcommand(1);
  CLI::App* describe_cmd = model_cmd->add_subcommand("describe", "print the layer/shape table");
  add_common_flags(*describe_cmd, pending);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the parse diagnostic
    return code == 0 ? 0 : 2;
  }

  if (*plan_cmd) {
    std::fputs(plan_csv(default_plan(dataset_from_string(plan_dataset))).c_str(), stdout);
    return 0;
  }
  if (*synth_cmd) {
    generate_synthetic(synth_out, synth_n, synth_size, synth_seed);
    std::printf("wrote %d synthetic samples (%dx%d, seed %llu) under %s\n", synth_n,
                synth_size, synth_size, static_cast<unsigned long long>(synth_seed),
                synth_out.c_str());
    return 0;
  }

  ExperimentConfig cfg = pending.resolve();
  if (*prepare) {
    resolve_defaults(cfg);
    LoadOptions lo;
    lo.stare_green_only = cfg.stare_green_only;
    lo.chase_rescale = cfg.chase_rescale;
    if (cfg.data_root.empty())
      throw config_error("data root not set (use --data-root, a config file, or VSEG_DATA_ROOT)");
    const DatasetSplit split = load_dataset(cfg.data_root, cfg.dataset, lo);
    auto one = [](const char* name, const std::vector<FundusSample>& v) {
      if (v.empty()) return;
      std::printf("%s: %zu samples, first %s (%d x %d x %d)\n", name, v.size(),
                  v.front().id.c_str(), v.front().image.c, v.front().image.h,
                  v.front().image.w);
    };
    std::printf("dataset %s under %s\n", to_string(cfg.dataset).c_str(),
                cfg.data_root.c_str());
    one("train", split.train);
    one("val", split.val);
    one("test", split.test);
    return 0;
  }
  if (*train_cmd) {
    run_train(cfg);
    return 0;
  }
  if (*eval_cmd) {
    run_eval(cfg, eval_ckpt);
    return 0;
  }
  if (*predict_cmd) {
    resolve_defaults(cfg);
    const ModelGraph graph = build_graph(cfg);
    const Params params = checkpoint_load(pr_ckpt, graph);
    const Tensor image = adapt_channels(load_image_file(pr_image), graph.in_channels);
    const Tensor prob = cfg.mode == Mode::patch
                            ? predict_patchwise(graph, params, image)
                            : predict_image(graph, params, image);
    save_probability_map(prob, pr_out);
    std::ofstream sidecar(pr_out + ".cfg", std::ios::binary);
    sidecar << serialize_config(cfg);
    if (!pr_bin.empty()) save_image_file(binarize(prob, cfg.threshold), pr_bin);
    std::printf("wrote %s%s\n", pr_out.c_str(),
                pr_bin.empty() ? "" : (" and " + pr_bin).c_str());
    return 0;
  }
  if (*ablate_cmd) {
    run_ablate(cfg);
    return 0;
  }
  if (*cross_cmd) {
    run_crosstrain(cfg, dataset_from_string(cross_train_ds),
                   dataset_from_string(cross_test_ds));
    return 0;
  }
  if (*model_cmd && *describe_cmd) {
    resolve_defaults(cfg);
    std::fputs(describe(build_graph(cfg)).c_str(), stdout);
    return 0;
  }
  throw config_error("no command given");
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  try {
    return dispatch(argc, argv);
  } catch (const config_error& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace vseg

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vseg/augment.hpp"
#include "vseg/dataio.hpp"
#include "vseg/error.hpp"
#include "vseg/experiment.hpp"
#include "vseg/rng.hpp"
#include "vseg/synth.hpp"
#include "vseg/util.hpp"

using namespace vseg;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path d = fs::temp_directory_path() / ("vseg_exp_" + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Read a CSV, splitting comment lines ("# ...") from data lines.
struct CsvContent {
  std::vector<std::string> comments, rows;
};
CsvContent read_csv(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  CsvContent out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') out.comments.push_back(line);
    else out.rows.push_back(line);
  }
  return out;
}

ExperimentConfig tiny_cfg(const std::string& data_root, const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.dataset = Dataset::SYNTHETIC;
  cfg.variant = Variant::BTS_DSN;
  cfg.channel_widths = {2, 3, 4, 5};
  cfg.group_depth = {1, 1, 1, 1};
  cfg.optimizer.max_iterations = 4;
  cfg.optimizer.snapshot_every = 2;
  cfg.seed = 3;
  cfg.data_root = data_root;
  cfg.output_dir = out_dir;
  return cfg;
}

std::vector<FundusSample> toy_split(int n, int size) {
  Rng rng(99);
  std::vector<FundusSample> out;
  for (int i = 0; i < n; ++i) {
    SynthSample s = synth_sample(size, rng);
    FundusSample f;
    f.id = "t" + std::to_string(i);
    f.image = s.image;
    f.truth = s.truth;
    f.fov = Tensor(1, size, size, 1.0);
    out.push_back(std::move(f));
  }
  return out;
}

// Fabricated 40-file tree in the canonical 20/15/5 layout, 3-channel images.
void write_color_tree(const fs::path& root, int n, int size) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "truth");
  fs::create_directories(root / "mask");
  Rng rng(7);
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%02d.png", i + 1);
    Tensor img(3, size, size);
    for (double& v : img.v) v = rng.uniform();
    save_image_file(img, (root / "images" / name).string());
    Tensor truth(1, size, size, 0.0);
    for (int x = 0; x < size; ++x) truth.at(0, (i + x) % size, x) = 1.0;
    save_image_file(truth, (root / "truth" / name).string());
    save_image_file(Tensor(1, size, size, 1.0), (root / "mask" / name).string());
  }
}

}  // namespace

TEST_CASE("channel adaptation: green selection, replication, identity, errors") {
  Tensor rgb(3, 2, 2);
  for (int ci = 0; ci < 3; ++ci)
    for (int i = 0; i < 4; ++i) rgb.v[ci * 4 + i] = ci + i * 0.1;
  Tensor g = adapt_channels(rgb, 1);
  REQUIRE(g.c == 1);
  for (int i = 0; i < 4; ++i) CHECK(g.v[i] == rgb.v[4 + i]);  // channel 1

  Tensor mono(1, 2, 2);
  mono.v = {0.1, 0.2, 0.3, 0.4};
  Tensor rep = adapt_channels(mono, 3);
  REQUIRE(rep.c == 3);
  for (int ci = 0; ci < 3; ++ci)
    for (int i = 0; i < 4; ++i) CHECK(rep.v[ci * 4 + i] == mono.v[i]);

  CHECK(adapt_channels(rgb, 3).v == rgb.v);
  CHECK(adapt_channels(mono, 1).v == mono.v);
  CHECK_THROWS_AS(adapt_channels(Tensor(2, 2, 2), 3), structural_error);
}

TEST_CASE("training streams enumerate sample-major augmented items") {
  const std::vector<FundusSample> base = toy_split(2, 16);
  const AugmentPlan plan = default_plan(Dataset::DRIVE);
  TrainStream s = make_stream(base, plan, Mode::image);
  CHECK(s.count == 26);
  // Item 0 is the identity view of the first sample.
  FundusSample first = s.get(0);
  CHECK(first.id == base[0].id);
  CHECK(first.image.v == base[0].image.v);
  // Item 13 starts the second sample's block.
  CHECK(s.get(13).image.v == base[1].image.v);
  // get is pure: repeated calls return identical bytes and the base id.
  FundusSample a = s.get(7);
  FundusSample b = s.get(7);
  CHECK(a.image.v == b.image.v);
  CHECK(a.id == base[0].id);

  TrainStream p = make_stream(base, plan, Mode::patch);
  CHECK(p.count == 26 * 9);
  FundusSample pat = p.get(5);
  CHECK(pat.image.h == 16);  // 8x8 patch upsampled 2x
  CHECK(pat.id == base[0].id + "_p5");

  CHECK_THROWS_AS(make_stream({}, plan, Mode::image), config_error);
}

TEST_CASE("training writes its artifact set and reproduces it byte for byte") {
  const fs::path data = fresh_dir("train_data");
  generate_synthetic(data.string(), 3, 16, 11);

  const fs::path out1 = fresh_dir("train_out1");
  TrainArtifacts a = run_train(tiny_cfg(data.string(), out1.string()));
  CHECK(fs::exists(out1 / "best.ckpt"));
  CHECK(fs::exists(out1 / "train_log.csv"));
  CHECK(fs::exists(out1 / "config.cfg"));
  CHECK(fs::exists(out1 / "checkpoints" / "iter_0000002.ckpt"));
  CHECK(fs::exists(out1 / "checkpoints" / "iter_0000004.ckpt"));
  CHECK(a.result.history.size() == 2);

  CsvContent log = read_csv(a.log_path);
  REQUIRE(log.rows.size() == 3);  // header + one row per snapshot
  CHECK(log.rows[0] ==
        "iteration,train_loss,val_SE,val_SP,val_ACC,val_AUC,val_MCC,val_F1,"
        "checkpoint_path");
  CHECK_FALSE(log.comments.empty());  // embedded config
  bool has_seed = false;
  for (const std::string& c : log.comments)
    if (c.find("seed=3") != std::string::npos) has_seed = true;
  CHECK(has_seed);

  const fs::path out2 = fresh_dir("train_out2");
  run_train(tiny_cfg(data.string(), out2.string()));
  CHECK(fnv1a64_file((out1 / "train_log.csv").string()) ==
        fnv1a64_file((out2 / "train_log.csv").string()));
  CHECK(fnv1a64_file((out1 / "best.ckpt").string()) ==
        fnv1a64_file((out2 / "best.ckpt").string()));

  fs::remove_all(data);
  fs::remove_all(out1);
  fs::remove_all(out2);
}

TEST_CASE("training without a data root points at the configuration surface") {
  ExperimentConfig cfg = tiny_cfg("", fresh_dir("noroot").string());
  CHECK_THROWS_AS(run_train(cfg), config_error);
  CHECK_THROWS_WITH_AS(run_train(cfg),
                       doctest::Contains("VSEG_DATA_ROOT"), config_error);
}

TEST_CASE("an unknown augment plan version cannot silently change the data") {
  const fs::path data = fresh_dir("planver");
  generate_synthetic(data.string(), 3, 16, 1);
  ExperimentConfig cfg = tiny_cfg(data.string(), (data / "out").string());
  cfg.augment_plan_version = "v2";
  CHECK_THROWS_AS(run_train(cfg), config_error);
  fs::remove_all(data);
}

TEST_CASE("evaluation reports one row per test image plus the macro row") {
  const fs::path data = fresh_dir("eval_data");
  generate_synthetic(data.string(), 6, 16, 13);  // splits 4/1/1
  const fs::path out = fresh_dir("eval_out");
  ExperimentConfig cfg = tiny_cfg(data.string(), out.string());
  TrainArtifacts art = run_train(cfg);

  const std::string report = run_eval(cfg, art.best_checkpoint);
  CsvContent csv = read_csv(report);
  REQUIRE(csv.rows.size() == 3);  // header + 1 test image + macro
  CHECK(csv.rows[0] == "id,dataset,variant,backbone,mode,SE,SP,ACC,AUC,MCC,F1");
  CHECK(csv.rows.back().rfind("macro,", 0) == 0);
  bool has_threshold = false;
  for (const std::string& c : csv.comments)
    if (c.find("threshold_used=0.5") != std::string::npos) has_threshold = true;
  CHECK(has_threshold);

  // The best-f1 policy sweeps the validation split for the threshold.
  ExperimentConfig swept = cfg;
  swept.threshold_policy = "best-f1";
  swept.output_dir = (out / "swept").string();
  CsvContent csv2 = read_csv(run_eval(swept, art.best_checkpoint));
  double t = -1.0;
  for (const std::string& c : csv2.comments) {
    const auto at = c.find("threshold_used=");
    if (at != std::string::npos)
      t = std::stod(c.substr(at + std::string("threshold_used=").size()));
  }
  CHECK(t >= 0.01);
  CHECK(t <= 0.99);

  fs::remove_all(data);
  fs::remove_all(out);
}

TEST_CASE("the ablation table covers every variant the backbone admits") {
  const fs::path data = fresh_dir("ablate_data");
  generate_synthetic(data.string(), 3, 16, 17);
  const fs::path out = fresh_dir("ablate_out");
  ExperimentConfig cfg = tiny_cfg(data.string(), out.string());
  cfg.optimizer.max_iterations = 2;
  cfg.optimizer.snapshot_every = 2;

  CsvContent vgg = read_csv(run_ablate(cfg));
  REQUIRE(vgg.rows.size() == 5);
  CHECK(vgg.rows[0] == "variant,SE,SP,ACC,AUC,MCC,F1");
  CHECK(vgg.rows[1].rfind("HED,", 0) == 0);
  CHECK(vgg.rows[2].rfind("DSN,", 0) == 0);
  CHECK(vgg.rows[3].rfind("BS-DSN,", 0) == 0);
  CHECK(vgg.rows[4].rfind("BTS-DSN,", 0) == 0);
  for (Variant v : {Variant::HED, Variant::DSN, Variant::BS_DSN, Variant::BTS_DSN})
    CHECK(fs::exists(out / to_string(v) / "checkpoints"));

  ExperimentConfig res = cfg;
  res.backbone = Backbone::resnet_groups;
  res.output_dir = (out / "res").string();
  CsvContent resnet = read_csv(run_ablate(res));
  REQUIRE(resnet.rows.size() == 4);  // HED needs the fifth vgg group
  CHECK(resnet.rows[1].rfind("DSN,", 0) == 0);

  fs::remove_all(data);
  fs::remove_all(out);
}

TEST_CASE("cross-training requires distinct datasets") {
  ExperimentConfig cfg;
  cfg.output_dir = fresh_dir("cross_same").string();
  CHECK_THROWS_AS(run_crosstrain(cfg, Dataset::DRIVE, Dataset::DRIVE), config_error);
}

TEST_CASE("cross-training adapts channels and writes the transfer row") {
  const fs::path root = fresh_dir("cross_root");
  generate_synthetic((root / "SYNTHETIC").string(), 3, 16, 19);
  write_color_tree(root / "DRIVE", 40, 16);

  const fs::path out = fresh_dir("cross_out");
  ExperimentConfig cfg = tiny_cfg(root.string(), out.string());
  const std::string path =
      run_crosstrain(cfg, Dataset::SYNTHETIC, Dataset::DRIVE);
  CsvContent csv = read_csv(path);
  REQUIRE(csv.rows.size() == 2);
  CHECK(csv.rows[0] == "train_dataset,test_dataset,SE,SP,ACC,AUC");
  CHECK(csv.rows[1].rfind("SYNTHETIC,DRIVE,", 0) == 0);
  CHECK(fs::exists(out / "train_SYNTHETIC" / "best.ckpt"));

  fs::remove_all(root);
  fs::remove_all(out);
}

TEST_CASE("the command line maps outcomes onto exit codes") {
  unsetenv("VSEG_DATA_ROOT");  // the missing-data-root case must stay missing
  auto run = [](std::vector<const char*> args) {
    args.insert(args.begin(), "vseg");
    return cli_main(static_cast<int>(args.size()), args.data());
  };

  CHECK(run({"augment-plan", "DRIVE"}) == 0);
  CHECK(run({"model", "describe", "--dataset", "SYNTHETIC"}) == 0);
  CHECK(run({"--help"}) == 0);

  // Usage errors: unknown enum value, missing required flag, no subcommand.
  CHECK(run({"train", "--dataset", "nope"}) == 2);
  CHECK(run({"eval"}) == 2);
  CHECK(run({}) == 2);
  CHECK(run({"augment-plan", "MNIST"}) == 2);
  CHECK(run({"cross-train", "--train-dataset", "DRIVE", "--test-dataset",
             "DRIVE"}) == 2);
  CHECK(run({"train", "--dataset", "SYNTHETIC"}) == 2);  // missing data root

  // Runtime failure: a checkpoint path that does not exist.
  const fs::path out = fresh_dir("cli_out");
  CHECK(run({"eval", "--checkpoint", (out / "missing.ckpt").string().c_str(),
             "--dataset", "SYNTHETIC", "--data-root", out.string().c_str(),
             "--output-dir", out.string().c_str()}) == 1);
  fs::remove_all(out);
}

TEST_CASE("the synth command generates a loadable corpus end to end") {
  const fs::path dir = fresh_dir("cli_synth");
  const std::string out = (dir / "corpus").string();
  std::vector<const char*> args{"vseg",   "synth", "--out", out.c_str(),
                                "--n",    "4",     "--size", "16",
                                "--seed", "2"};
  CHECK(cli_main(static_cast<int>(args.size()), args.data()) == 0);
  DatasetSplit s = load_dataset(out, Dataset::SYNTHETIC);
  CHECK(s.train.size() + s.val.size() + s.test.size() == 4);
  fs::remove_all(dir);
}

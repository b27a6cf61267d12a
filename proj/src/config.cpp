#include "vseg/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vseg/error.hpp"
#include "vseg/util.hpp"

namespace vseg {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Full-precision, locale-free double rendering for config round-trips.
std::string fmt_g(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += fmt_g(v[i]);
  }
  return s;
}

std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> out;
  if (trim(s).empty()) return out;
  for (const auto& part : split(s, ',')) out.push_back(std::stoi(trim(part)));
  return out;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  if (trim(s).empty()) return out;
  for (const auto& part : split(s, ',')) out.push_back(std::stod(trim(part)));
  return out;
}

bool parse_bool(const std::string& s, const std::string& key) {
  std::string v = lower(trim(s));
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw config_error("not a boolean for " + key + ": " + s);
}

}  // namespace

std::string to_string(Dataset d) {
  switch (d) {
    case Dataset::DRIVE: return "DRIVE";
    case Dataset::STARE: return "STARE";
    case Dataset::CHASE_DB1: return "CHASE_DB1";
    case Dataset::SYNTHETIC: return "SYNTHETIC";
  }
  return "?";
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::HED: return "HED";
    case Variant::DSN: return "DSN";
    case Variant::BS_DSN: return "BS-DSN";
    case Variant::BTS_DSN: return "BTS-DSN";
  }
  return "?";
}

std::string to_string(Backbone b) {
  return b == Backbone::vgg_groups ? "vgg" : "resnet";
}

std::string to_string(Mode m) { return m == Mode::image ? "image" : "patch"; }

std::string to_string(FuseOn f) { return f == FuseOn::logits ? "logits" : "probs"; }

Dataset dataset_from_string(const std::string& s) {
  std::string v = lower(trim(s));
  if (v == "drive") return Dataset::DRIVE;
  if (v == "stare") return Dataset::STARE;
  if (v == "chase_db1" || v == "chase" || v == "chasedb1") return Dataset::CHASE_DB1;
  if (v == "synthetic" || v == "synth") return Dataset::SYNTHETIC;
  throw config_error("unknown dataset: " + s);
}

Variant variant_from_string(const std::string& s) {
  std::string v = lower(trim(s));
  std::replace(v.begin(), v.end(), '_', '-');
  if (v == "hed") return Variant::HED;
  if (v == "dsn") return Variant::DSN;
  if (v == "bs-dsn" || v == "bsdsn") return Variant::BS_DSN;
  if (v == "bts-dsn" || v == "btsdsn") return Variant::BTS_DSN;
  throw config_error("unknown variant: " + s);
}

Backbone backbone_from_string(const std::string& s) {
  std::string v = lower(trim(s));
  if (v == "vgg" || v == "vgg_groups") return Backbone::vgg_groups;
  if (v == "resnet" || v == "resnet_groups") return Backbone::resnet_groups;
  throw config_error("unknown backbone: " + s);
}

Mode mode_from_string(const std::string& s) {
  std::string v = lower(trim(s));
  if (v == "image") return Mode::image;
  if (v == "patch") return Mode::patch;
  throw config_error("unknown inference mode: " + s);
}

FuseOn fuse_on_from_string(const std::string& s) {
  std::string v = lower(trim(s));
  if (v == "logits") return FuseOn::logits;
  if (v == "probs") return FuseOn::probs;
  throw config_error("unknown fuse_on value: " + s);
}

int dataset_channels(const ExperimentConfig& cfg) {
  switch (cfg.dataset) {
    case Dataset::DRIVE:
    case Dataset::CHASE_DB1: return 3;
    case Dataset::STARE: return cfg.stare_green_only ? 1 : 3;
    case Dataset::SYNTHETIC: return 1;
  }
  return 3;
}

void resolve_defaults(ExperimentConfig& cfg) {
  if (cfg.optimizer.learning_rate <= 0.0)
    cfg.optimizer.learning_rate = cfg.backbone == Backbone::vgg_groups ? 1e-8 : 1e-7;
  if (cfg.optimizer.seed == 0) cfg.optimizer.seed = cfg.seed;
  if (cfg.threshold_policy != "fixed" && cfg.threshold_policy != "best-f1")
    throw config_error("threshold_policy must be fixed or best-f1");
  if (cfg.threshold < 0.0 || cfg.threshold > 1.0)
    throw config_error("threshold must lie in [0,1]");
  if (cfg.selection_metric != "auc" && cfg.selection_metric != "f1" &&
      cfg.selection_metric != "acc")
    throw config_error("selection_metric must be auc, f1 or acc");
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream o;
  o << "alpha=" << join_doubles(cfg.alpha) << '\n';
  o << "augment_plan_version=" << cfg.augment_plan_version << '\n';
  o << "backbone=" << to_string(cfg.backbone) << '\n';
  o << "channel_widths=" << join_ints(cfg.channel_widths) << '\n';
  o << "chase_rescale=" << fmt_g(cfg.chase_rescale) << '\n';
  o << "dataset=" << to_string(cfg.dataset) << '\n';
  o << "fuse_on=" << to_string(cfg.fuse_on) << '\n';
  o << "group_depth=" << join_ints(cfg.group_depth) << '\n';
  o << "input_center=" << fmt_g(cfg.input_center) << '\n';
  o << "input_scale=" << fmt_g(cfg.input_scale) << '\n';
  o << "loss_in_fov=" << (cfg.loss_in_fov ? "true" : "false") << '\n';
  o << "mode=" << to_string(cfg.mode) << '\n';
  o << "optimizer.learning_rate=" << fmt_g(cfg.optimizer.learning_rate) << '\n';
  o << "optimizer.max_iterations=" << cfg.optimizer.max_iterations << '\n';
  o << "optimizer.momentum=" << fmt_g(cfg.optimizer.momentum) << '\n';
  o << "optimizer.seed=" << cfg.optimizer.seed << '\n';
  o << "optimizer.snapshot_every=" << cfg.optimizer.snapshot_every << '\n';
  o << "optimizer.weight_decay=" << fmt_g(cfg.optimizer.weight_decay) << '\n';
  o << "pretrained=" << cfg.pretrained << '\n';
  o << "seed=" << cfg.seed << '\n';
  o << "selection_metric=" << cfg.selection_metric << '\n';
  o << "stare_green_only=" << (cfg.stare_green_only ? "true" : "false") << '\n';
  o << "tap_channels=" << cfg.tap_channels << '\n';
  o << "threshold=" << fmt_g(cfg.threshold) << '\n';
  o << "threshold_policy=" << cfg.threshold_policy << '\n';
  o << "variant=" << to_string(cfg.variant) << '\n';
  return o.str();
}

void apply_config_line(ExperimentConfig& cfg, const std::string& line) {
  std::string t = trim(line);
  if (t.empty() || t[0] == '#') return;
  auto eq = t.find('=');
  if (eq == std::string::npos) throw config_error("expected key=value, got: " + line);
  std::string key = trim(t.substr(0, eq));
  std::string val = trim(t.substr(eq + 1));

  if (key == "alpha") cfg.alpha = parse_doubles(val);
  else if (key == "augment_plan_version") cfg.augment_plan_version = val;
  else if (key == "backbone") cfg.backbone = backbone_from_string(val);
  else if (key == "channel_widths") cfg.channel_widths = parse_ints(val);
  else if (key == "chase_rescale") cfg.chase_rescale = std::stod(val);
  else if (key == "dataset") cfg.dataset = dataset_from_string(val);
  else if (key == "data_root") cfg.data_root = val;
  else if (key == "fuse_on") cfg.fuse_on = fuse_on_from_string(val);
  else if (key == "group_depth") cfg.group_depth = parse_ints(val);
  else if (key == "input_center") cfg.input_center = std::stod(val);
  else if (key == "input_scale") cfg.input_scale = std::stod(val);
  else if (key == "loss_in_fov") cfg.loss_in_fov = parse_bool(val, key);
  else if (key == "mode") cfg.mode = mode_from_string(val);
  else if (key == "optimizer.learning_rate") cfg.optimizer.learning_rate = std::stod(val);
  else if (key == "optimizer.max_iterations") cfg.optimizer.max_iterations = std::stoll(val);
  else if (key == "optimizer.momentum") cfg.optimizer.momentum = std::stod(val);
  else if (key == "optimizer.seed") cfg.optimizer.seed = std::stoull(val);
  else if (key == "optimizer.snapshot_every") cfg.optimizer.snapshot_every = std::stoll(val);
  else if (key == "optimizer.weight_decay") cfg.optimizer.weight_decay = std::stod(val);
  else if (key == "output_dir") cfg.output_dir = val;
  else if (key == "pretrained") cfg.pretrained = val;
  else if (key == "seed") cfg.seed = std::stoull(val);
  else if (key == "selection_metric") cfg.selection_metric = val;
  else if (key == "stare_green_only") cfg.stare_green_only = parse_bool(val, key);
  else if (key == "tap_channels") cfg.tap_channels = std::stoi(val);
  else if (key == "threshold") cfg.threshold = std::stod(val);
  else if (key == "threshold_policy") cfg.threshold_policy = val;
  else if (key == "variant") cfg.variant = variant_from_string(val);
  else throw config_error("unknown config key: " + key);
}

void load_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw load_error("cannot open config file: " + path);
  std::string line;
  while (std::getline(f, line)) apply_config_line(cfg, line);
}

}  // namespace vseg

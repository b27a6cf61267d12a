#pragma once

#include <string>
#include <vector>

#include "vseg/config.hpp"
#include "vseg/tensor.hpp"

namespace vseg {

struct FundusSample {
  std::string id;
  Tensor image;  // (C,H,W), C in {1,3}, values in [0,1]
  Tensor truth;  // (1,H,W) binary, 1 = vessel
  Tensor fov;    // (1,H,W) binary, 1 = inside field of view
  Dataset source_dataset = Dataset::SYNTHETIC;
};

struct DatasetSplit {
  std::vector<FundusSample> train, val, test;
  Dataset dataset = Dataset::SYNTHETIC;
};

struct LoadOptions {
  bool stare_green_only = true;
  double chase_rescale = 0.5;
  // FOV derivation threshold as a fraction of the maximum mean intensity,
  // used when no mask file is shipped.
  double fov_threshold = 0.04;
};

// Layout: <root>/images/*, <root>/truth/*, <root>/mask/* (mask optional for
// datasets without shipped FOVs). Files pair up by ascending lexicographic
// order within each directory. Split conventions:
//   DRIVE      40 files, sorted:  test [0,20), train [20,35), val [35,40)
//   STARE      20 files:          train [0,7), val [7,10), test [10,20)
//   CHASE_DB1  28 files:          train [0,15), val [15,20), test [20,28)
//   SYNTHETIC  n >= 3:            val = test = max(1, n/6), train = rest
DatasetSplit load_dataset(const std::string& root, Dataset dataset,
                          const LoadOptions& opts = {});

// Largest 4-connected component of {mean channel intensity > threshold},
// holes filled. threshold is absolute in [0,1]; components smaller than
// min_component are ignored.
Tensor derive_fov(const Tensor& image, double threshold, std::size_t min_component = 1);

// 8-bit grayscale file; stored value = round(255*p), loaded back as v/255.
void save_probability_map(const Tensor& map, const std::string& path);
Tensor load_probability_map(const std::string& path);

// Generic 8/16-bit image IO used by the loaders and the synthetic generator;
// images are written from / normalized to [0,1].
Tensor load_image_file(const std::string& path);
void save_image_file(const Tensor& img, const std::string& path);

}  // namespace vseg

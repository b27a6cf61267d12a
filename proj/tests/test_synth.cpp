#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "vseg/dataio.hpp"
#include "vseg/error.hpp"
#include "vseg/rng.hpp"
#include "vseg/synth.hpp"
#include "vseg/util.hpp"

using namespace vseg;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path d = fs::temp_directory_path() / ("vseg_synth_" + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

double fraction(const Tensor& truth) {
  double s = 0.0;
  for (double v : truth.v) s += v;
  return s / static_cast<double>(truth.size());
}

}  // namespace

TEST_CASE("samples keep the vessel fraction strictly inside (2%, 20%)") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    Rng rng(seed);
    SynthSample s = synth_sample(48, rng);
    const double f = fraction(s.truth);
    CHECK(f > 0.02);
    CHECK(f < 0.20);
  }
}

TEST_CASE("vessel pixels are bright, background pixels are dark") {
  Rng rng(7);
  SynthSample s = synth_sample(64, rng);
  for (std::size_t i = 0; i < s.truth.v.size(); ++i) {
    if (s.truth.v[i] == 1.0) {
      CHECK(s.image.v[i] >= 0.75);
      CHECK(s.image.v[i] <= 0.95);
    } else {
      CHECK(s.truth.v[i] == 0.0);
      CHECK(s.image.v[i] <= 0.15);
      CHECK(s.image.v[i] >= 0.0);
    }
  }
}

TEST_CASE("undersized frames and corpora are rejected") {
  Rng rng(1);
  CHECK_THROWS_AS(synth_sample(15, rng), config_error);
  const fs::path dir = fresh_dir("small");
  CHECK_THROWS_AS(generate_synthetic(dir.string(), 2, 32, 1), config_error);
  fs::remove_all(dir);
}

TEST_CASE("generation is byte-deterministic in the seed") {
  const fs::path a = fresh_dir("det_a");
  const fs::path b = fresh_dir("det_b");
  const fs::path c = fresh_dir("det_c");
  generate_synthetic(a.string(), 4, 32, 42);
  generate_synthetic(b.string(), 4, 32, 42);
  generate_synthetic(c.string(), 4, 32, 43);
  bool any_differs = false;
  for (int i = 0; i < 4; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "synth%03d.png", i);
    for (const char* sub : {"images", "truth", "mask"}) {
      const auto ha = fnv1a64_file((a / sub / name).string());
      const auto hb = fnv1a64_file((b / sub / name).string());
      CHECK(ha == hb);
      if (ha != fnv1a64_file((c / sub / name).string())) any_differs = true;
    }
  }
  CHECK(any_differs);  // a different seed must change the corpus
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(c);
}

TEST_CASE("the emitted tree loads as a full-FOV dataset") {
  const fs::path dir = fresh_dir("tree");
  generate_synthetic(dir.string(), 6, 32, 3);
  DatasetSplit s = load_dataset(dir.string(), Dataset::SYNTHETIC);
  CHECK(s.train.size() + s.val.size() + s.test.size() == 6);
  for (const FundusSample& f : s.train) {
    for (double v : f.fov.v) CHECK(v == 1.0);
    const double fr = fraction(f.truth);
    CHECK(fr > 0.015);  // 8-bit quantization cannot move it much
    CHECK(fr < 0.205);
  }
  fs::remove_all(dir);
}

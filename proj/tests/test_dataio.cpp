#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "vseg/dataio.hpp"
#include "vseg/error.hpp"
#include "vseg/rng.hpp"
#include "vseg/synth.hpp"

using namespace vseg;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path d = fs::temp_directory_path() / ("vseg_dataio_" + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

bool is_binary(const Tensor& t) {
  for (double v : t.v)
    if (v != 0.0 && v != 1.0) return false;
  return true;
}

Tensor random_map(int c, int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(c, h, w);
  for (double& v : t.v) v = rng.uniform();
  return t;
}

// A tiny dataset tree in the shared images/truth/mask layout. Filenames are
// zero-padded so lexicographic order equals numeric order.
void write_tree(const fs::path& root, int n, int size, bool with_mask) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "truth");
  if (with_mask) fs::create_directories(root / "mask");
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%02d.png", i + 1);
    save_image_file(random_map(1, size, size, 1000 + i), (root / "images" / name).string());
    Tensor truth(1, size, size, 0.0);
    truth.at(0, i % size, i % size) = 1.0;
    save_image_file(truth, (root / "truth" / name).string());
    if (with_mask) save_image_file(Tensor(1, size, size, 1.0), (root / "mask" / name).string());
  }
}

}  // namespace

TEST_CASE("generated corpus loads with the size-derived split") {
  const fs::path dir = fresh_dir("synth12");
  generate_synthetic(dir.string(), 12, 32, 5);
  DatasetSplit s = load_dataset(dir.string(), Dataset::SYNTHETIC);
  CHECK(s.dataset == Dataset::SYNTHETIC);
  CHECK(s.train.size() == 8);
  CHECK(s.val.size() == 2);
  CHECK(s.test.size() == 2);
  for (const auto& set : {s.train, s.val, s.test})
    for (const FundusSample& f : set) {
      CHECK(f.image.c == 1);
      CHECK(f.image.h == 32);
      CHECK(f.image.w == 32);
      CHECK(f.truth.same_shape(f.fov));
      CHECK(is_binary(f.truth));
      CHECK(is_binary(f.fov));
      CHECK_FALSE(f.id.empty());
      CHECK(f.source_dataset == Dataset::SYNTHETIC);
      for (double v : f.image.v) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  fs::remove_all(dir);
}

TEST_CASE("the minimum viable corpus splits one sample per role") {
  const fs::path dir = fresh_dir("synth3");
  generate_synthetic(dir.string(), 3, 24, 9);
  DatasetSplit s = load_dataset(dir.string(), Dataset::SYNTHETIC);
  CHECK(s.train.size() == 1);
  CHECK(s.val.size() == 1);
  CHECK(s.test.size() == 1);
  fs::remove_all(dir);
}

TEST_CASE("probability maps survive the 8-bit round trip within half a step") {
  const fs::path dir = fresh_dir("prob");
  const Tensor map = random_map(1, 21, 17, 3);
  const std::string path = (dir / "p.png").string();
  save_probability_map(map, path);
  const Tensor back = load_probability_map(path);
  REQUIRE(back.same_shape(map));
  for (std::size_t i = 0; i < map.v.size(); ++i)
    CHECK(std::abs(back.v[i] - map.v[i]) <= 0.5 / 255.0 + 1e-12);
  fs::remove_all(dir);
}

TEST_CASE("image files round-trip in both channel layouts") {
  const fs::path dir = fresh_dir("img");
  for (int c : {1, 3}) {
    const Tensor img = random_map(c, 14, 19, 7 + c);
    const std::string path = (dir / ("i" + std::to_string(c) + ".png")).string();
    save_image_file(img, path);
    const Tensor back = load_image_file(path);
    REQUIRE(back.c == c);
    REQUIRE(back.h == 14);
    REQUIRE(back.w == 19);
    for (std::size_t i = 0; i < img.v.size(); ++i)
      CHECK(std::abs(back.v[i] - img.v[i]) <= 0.5 / 255.0 + 1e-12);
  }
  fs::remove_all(dir);
}

TEST_CASE("FOV derivation keeps the biggest component and fills holes") {
  Tensor img(1, 20, 20, 0.0);
  // Bright 10x10 block with a dark hole inside, plus a distant 2x2 speck.
  for (int y = 4; y < 14; ++y)
    for (int x = 4; x < 14; ++x) img.at(0, y, x) = 0.8;
  img.at(0, 8, 8) = 0.0;
  img.at(0, 8, 9) = 0.0;
  img.at(0, 17, 17) = 0.9;
  img.at(0, 17, 18) = 0.9;

  Tensor fov = derive_fov(img, 0.1, 8);
  CHECK(is_binary(fov));
  CHECK(fov.at(0, 8, 8) == 1.0);   // hole filled
  CHECK(fov.at(0, 8, 9) == 1.0);
  CHECK(fov.at(0, 17, 17) == 0.0);  // sub-threshold component dropped
  CHECK(fov.at(0, 4, 4) == 1.0);
  CHECK(fov.at(0, 0, 0) == 0.0);
  double area = 0.0;
  for (double v : fov.v) area += v;
  CHECK(area == 100.0);

  CHECK_THROWS_AS(derive_fov(Tensor(1, 8, 8, 0.0), 0.5), load_error);
}

TEST_CASE("mismatched image and truth counts are rejected") {
  const fs::path dir = fresh_dir("mismatch");
  write_tree(dir, 3, 12, false);
  fs::remove(dir / "truth" / "03.png");
  CHECK_THROWS_AS(load_dataset(dir.string(), Dataset::SYNTHETIC), load_error);
  fs::remove_all(dir);
}

TEST_CASE("a missing images directory is a load failure") {
  const fs::path dir = fresh_dir("empty");
  CHECK_THROWS_AS(load_dataset(dir.string(), Dataset::SYNTHETIC), load_error);
  fs::remove_all(dir);
}

TEST_CASE("the 40-file layout splits into the canonical partitions") {
  const fs::path dir = fresh_dir("drive40");
  write_tree(dir, 40, 16, true);
  DatasetSplit s = load_dataset(dir.string(), Dataset::DRIVE);
  CHECK(s.test.size() == 20);
  CHECK(s.train.size() == 15);
  CHECK(s.val.size() == 5);
  // Lexicographic order: test gets 01..20, train 21..35, val 36..40.
  CHECK(s.test.front().id == "01");
  CHECK(s.test.back().id == "20");
  CHECK(s.train.front().id == "21");
  CHECK(s.train.back().id == "35");
  CHECK(s.val.front().id == "36");
  CHECK(s.val.back().id == "40");
  fs::remove_all(dir);
}

TEST_CASE("wrong file counts for the fixed-size datasets are rejected") {
  const fs::path dir = fresh_dir("wrongn");
  write_tree(dir, 6, 12, true);
  CHECK_THROWS_AS(load_dataset(dir.string(), Dataset::DRIVE), load_error);
  CHECK_THROWS_AS(load_dataset(dir.string(), Dataset::STARE), load_error);
  CHECK_THROWS_AS(load_dataset(dir.string(), Dataset::CHASE_DB1), load_error);
  fs::remove_all(dir);
}

TEST_CASE("synthetic corpora below three samples are rejected") {
  const fs::path dir = fresh_dir("toofew");
  write_tree(dir, 2, 12, false);
  CHECK_THROWS_AS(load_dataset(dir.string(), Dataset::SYNTHETIC), load_error);
  fs::remove_all(dir);
}

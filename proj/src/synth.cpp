#include "vseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "vseg/dataio.hpp"
#include "vseg/error.hpp"

namespace vseg {

namespace {

struct P2 {
  double y, x;
};

// Stamps a disk of diameter `width` around (cy, cx) into truth, paints the
// same pixels into image, and returns how many were newly painted. Pixel
// centers at integer+0.5 keep width-1 strokes one pixel wide.
int stamp(Tensor& image, Tensor& truth, double cy, double cx, int width,
          double intensity) {
  const double r = 0.5 * width;
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - r - 0.5)));
  const int y1 = std::min(image.h - 1, static_cast<int>(std::ceil(cy + r + 0.5)));
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - r - 0.5)));
  const int x1 = std::min(image.w - 1, static_cast<int>(std::ceil(cx + r + 0.5)));
  int painted = 0;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dy = y + 0.5 - cy, dx = x + 0.5 - cx;
      if (dy * dy + dx * dx <= r * r) {
        painted += truth.at(0, y, x) < 0.5;
        truth.at(0, y, x) = 1.0;
        image.at(0, y, x) = intensity;
      }
    }
  return painted;
}

P2 bezier(const P2& a, const P2& b, const P2& c, const P2& d, double t) {
  const double u = 1.0 - t;
  const double w0 = u * u * u, w1 = 3 * u * u * t, w2 = 3 * u * t * t,
               w3 = t * t * t;
  return {w0 * a.y + w1 * b.y + w2 * c.y + w3 * d.y,
          w0 * a.x + w1 * b.x + w2 * c.x + w3 * d.x};
}

// One random stroke spanning the frame: endpoints near opposite borders,
// control points anywhere inside. Stops once it has painted 5% of the frame
// so a single high-curvature wide stroke cannot dominate the mask.
void add_stroke(Tensor& image, Tensor& truth, int size, Rng& rng) {
  const double s = size;
  const bool horizontal = rng.below(2) == 0;
  P2 a, d;
  if (horizontal) {
    a = {rng.uniform(0.1 * s, 0.9 * s), rng.uniform(0.0, 0.1 * s)};
    d = {rng.uniform(0.1 * s, 0.9 * s), rng.uniform(0.9 * s, s)};
  } else {
    a = {rng.uniform(0.0, 0.1 * s), rng.uniform(0.1 * s, 0.9 * s)};
    d = {rng.uniform(0.9 * s, s), rng.uniform(0.1 * s, 0.9 * s)};
  }
  const P2 b{rng.uniform(0.1 * s, 0.9 * s), rng.uniform(0.1 * s, 0.9 * s)};
  const P2 c{rng.uniform(0.1 * s, 0.9 * s), rng.uniform(0.1 * s, 0.9 * s)};
  // Widths 1..4 with probability proportional to width, so thin hard strokes
  // appear but thick learnable ones dominate the pixel mass.
  static constexpr int kWidthDraw[10] = {1, 2, 2, 3, 3, 3, 4, 4, 4, 4};
  const int width = kWidthDraw[rng.below(10)];
  const double intensity = rng.uniform(0.75, 0.95);
  const int steps = 4 * size;
  const int budget = size * size / 20;
  int painted = 0;
  for (int i = 0; i <= steps && painted < budget; ++i) {
    const P2 p = bezier(a, b, c, d, static_cast<double>(i) / steps);
    painted += stamp(image, truth, p.y, p.x, width, intensity);
  }
}

double vessel_fraction(const Tensor& truth) {
  double n = 0;
  for (double v : truth.v) n += v;
  return n / static_cast<double>(truth.size());
}

}  // namespace

SynthSample synth_sample(int size, Rng& rng) {
  if (size < 16) throw config_error("synthetic image size must be >= 16");
  SynthSample s{Tensor(1, size, size), Tensor(1, size, size)};
  const double base = rng.uniform(0.05, 0.12);
  for (double& v : s.image.v) v = base + rng.uniform(-0.02, 0.02);
  // Each stroke paints at most ~5% of the frame, so three mandatory strokes
  // stay below 16% and the 4% stop floor keeps the total above 2%.
  for (int k = 0; k < 64; ++k) {
    if (k >= 3 && vessel_fraction(s.truth) >= 0.04) break;
    if (vessel_fraction(s.truth) >= 0.12) break;
    add_stroke(s.image, s.truth, size, rng);
  }
  const double f = vessel_fraction(s.truth);
  if (f <= 0.02 || f >= 0.20)
    throw structural_error("synthetic vessel fraction out of range");
  return s;
}

void generate_synthetic(const std::string& out_dir, int n, int size,
                        std::uint64_t seed) {
  if (n < 3) throw config_error("synthetic corpus needs at least 3 images");
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "images");
  fs::create_directories(fs::path(out_dir) / "truth");
  fs::create_directories(fs::path(out_dir) / "mask");
  Rng rng(seed);
  Tensor fov(1, size, size, 1.0);
  for (int i = 0; i < n; ++i) {
    SynthSample s = synth_sample(size, rng);
    char name[32];
    std::snprintf(name, sizeof name, "synth%03d.png", i);
    save_image_file(s.image, (fs::path(out_dir) / "images" / name).string());
    save_image_file(s.truth, (fs::path(out_dir) / "truth" / name).string());
    save_image_file(fov, (fs::path(out_dir) / "mask" / name).string());
  }
}

}  // namespace vseg

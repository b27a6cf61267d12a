#pragma once

#include <cstdint>
#include <string>

#include "vseg/rng.hpp"
#include "vseg/tensor.hpp"

namespace vseg {

// Seeded generator of synthetic fundus-like images: bright curvilinear
// filaments (random cubic Bezier strokes, widths 1..4 px) on a dark noisy
// background. The truth mask is the exact set of stamped stroke pixels, the
// field of view is the full frame, and the vessel fraction always lands
// strictly inside (2%, 20%) of the frame.
struct SynthSample {
  Tensor image;  // (1, size, size), values in [0, 1]
  Tensor truth;  // (1, size, size), values in {0, 1}
};

SynthSample synth_sample(int size, Rng& rng);

// Writes n samples under out_dir in the standard dataset layout
// (images/, truth/, mask/; 8-bit grayscale PNG). Deterministic in seed.
void generate_synthetic(const std::string& out_dir, int n, int size,
                        std::uint64_t seed);

}  // namespace vseg

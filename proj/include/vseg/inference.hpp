#pragma once

#include <vector>

#include "vseg/dataio.hpp"
#include "vseg/model.hpp"
#include "vseg/tensor.hpp"

namespace vseg {

// Half-size patch grid used by patch-level training and inference. Patches
// are cropped at the anchors, upsampled 2x before entering the network, and
// the half-size predictions are stitched back by uniform averaging.
struct PatchLayout {
  int patch_h = 0, patch_w = 0;
  // Unique (y, x) crop anchors in row-major 3x3 order; `weights` carries the
  // multiplicity of anchors that coincide on small inputs, so weights always
  // sum to 9.
  std::vector<std::pair<int, int>> anchors;
  std::vector<int> weights;
};

// patch = ceil(H/2) x ceil(W/2); row anchors {0, (H-h)/2, H-h}, column
// anchors {0, (W-w)/2, W-w} (floor division).
PatchLayout make_layout(int height, int width);

// Whole-image forward pass; returns the fused probability map (1, H, W).
Tensor predict_image(const ModelGraph& graph, const Params& params,
                     const Tensor& image);

// 9-patch pipeline: crop, upsample 2x, predict, decimate back to patch size,
// average overlaps with uniform weight.
Tensor predict_patchwise(const ModelGraph& graph, const Params& params,
                         const Tensor& image);

// Training-side view of one patch: image bilinearly upsampled 2x, truth and
// fov duplicated 2x so they stay binary. index is row-major in [0, 9).
FundusSample patch_sample(const FundusSample& s, const PatchLayout& layout,
                          int index);

// prob >= threshold -> 1 else 0.
Tensor binarize(const Tensor& prob, double threshold);

}  // namespace vseg

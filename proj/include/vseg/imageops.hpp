#pragma once

#include "vseg/tensor.hpp"

namespace vseg {

// Geometric primitives shared by augmentation, dataset rescaling and the
// patch pipeline. All functions are pure. Interpolation uses the lerp form
// v0 + (v1 - v0) * f so constant inputs are reproduced bit-exactly.

// General resize, half-pixel-center sampling, edge clamped.
Tensor resize_bilinear(const Tensor& t, int out_h, int out_w);
Tensor resize_nearest(const Tensor& t, int out_h, int out_w);

// Phase-aligned 2x pair used by patch inference: upsample2x places input
// samples at even output coordinates, so downsample2x (decimation at even
// coordinates) inverts it exactly.
Tensor upsample2x(const Tensor& t);
Tensor downsample2x(const Tensor& t, int out_h, int out_w);

Tensor flip_horizontal(const Tensor& t);
Tensor flip_vertical(const Tensor& t);

// Rotate clockwise about the image center by `degrees`, sampling back into
// the original frame; out-of-frame pixels become 0. Multiples of 90 degrees
// use exact trig values, so on square inputs they reduce to index remaps.
// nearest=true selects nearest-neighbor sampling (binary maps).
Tensor rotate_about_center(const Tensor& t, double degrees, bool nearest);

// Zoom by `factor` about the image center into the same frame
// (factor > 1 magnifies and crops, factor < 1 shrinks and pads with 0).
Tensor scale_about_center(const Tensor& t, double factor, bool nearest);

Tensor crop(const Tensor& t, int y0, int x0, int out_h, int out_w);

}  // namespace vseg

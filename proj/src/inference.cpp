#include "vseg/inference.hpp"

#include <cstdio>

#include "vseg/error.hpp"
#include "vseg/imageops.hpp"

namespace vseg {

PatchLayout make_layout(int height, int width) {
  if (height < 2 || width < 2)
    throw structural_error("patch layout needs at least a 2x2 image");
  PatchLayout out;
  out.patch_h = (height + 1) / 2;
  out.patch_w = (width + 1) / 2;
  const int ys[3] = {0, (height - out.patch_h) / 2, height - out.patch_h};
  const int xs[3] = {0, (width - out.patch_w) / 2, width - out.patch_w};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      const std::pair<int, int> a{ys[r], xs[c]};
      bool merged = false;
      for (std::size_t i = 0; i < out.anchors.size() && !merged; ++i)
        if (out.anchors[i] == a) {
          ++out.weights[i];
          merged = true;
        }
      if (!merged) {
        out.anchors.push_back(a);
        out.weights.push_back(1);
      }
    }
  return out;
}

Tensor predict_image(const ModelGraph& graph, const Params& params,
                     const Tensor& image) {
  return forward(graph, params, image).fuse_prob;
}

Tensor predict_patchwise(const ModelGraph& graph, const Params& params,
                         const Tensor& image) {
  const PatchLayout layout = make_layout(image.h, image.w);
  Tensor acc(1, image.h, image.w);
  Tensor cnt(1, image.h, image.w);
  for (std::size_t i = 0; i < layout.anchors.size(); ++i) {
    const auto [oy, ox] = layout.anchors[i];
    const double w = layout.weights[i];
    const Tensor patch = crop(image, oy, ox, layout.patch_h, layout.patch_w);
    const Tensor prob2x = predict_image(graph, params, upsample2x(patch));
    const Tensor prob = downsample2x(prob2x, layout.patch_h, layout.patch_w);
    for (int y = 0; y < layout.patch_h; ++y)
      for (int x = 0; x < layout.patch_w; ++x) {
        acc.at(0, oy + y, ox + x) += w * prob.at(0, y, x);
        cnt.at(0, oy + y, ox + x) += w;
      }
  }
  for (std::size_t i = 0; i < acc.v.size(); ++i) acc.v[i] /= cnt.v[i];
  return acc;
}

FundusSample patch_sample(const FundusSample& s, const PatchLayout& layout,
                          int index) {
  if (index < 0 || index >= 9) throw structural_error("patch index out of range");
  // Coincident anchors were merged with their multiplicity, so expand the
  // weights to map a raw index in [0, 9) onto a unique anchor.
  std::size_t i = 0;
  for (int seen = 0; i < layout.anchors.size(); ++i) {
    seen += layout.weights[i];
    if (index < seen) break;
  }
  const auto [oy, ox] = layout.anchors[i];
  FundusSample out;
  char suffix[16];
  std::snprintf(suffix, sizeof suffix, "_p%d", index);
  out.id = s.id + suffix;
  out.source_dataset = s.source_dataset;
  out.image = upsample2x(crop(s.image, oy, ox, layout.patch_h, layout.patch_w));
  out.truth = resize_nearest(crop(s.truth, oy, ox, layout.patch_h, layout.patch_w),
                             2 * layout.patch_h, 2 * layout.patch_w);
  out.fov = resize_nearest(crop(s.fov, oy, ox, layout.patch_h, layout.patch_w),
                           2 * layout.patch_h, 2 * layout.patch_w);
  return out;
}

Tensor binarize(const Tensor& prob, double threshold) {
  Tensor out(prob.c, prob.h, prob.w);
  for (std::size_t i = 0; i < prob.v.size(); ++i)
    out.v[i] = prob.v[i] >= threshold ? 1.0 : 0.0;
  return out;
}

}  // namespace vseg

#pragma once

#include <cstddef>
#include <vector>

namespace vseg {

// Dense planar tensor, channel-major (c, y, x), double precision.
// Images, binary maps and network activations all use this one type;
// binary maps are c == 1 with values in {0, 1}.
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_, double fill = 0.0)
      : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, fill) {}

  double& at(int ci, int yi, int xi) {
    return v[(static_cast<std::size_t>(ci) * h + yi) * w + xi];
  }
  double at(int ci, int yi, int xi) const {
    return v[(static_cast<std::size_t>(ci) * h + yi) * w + xi];
  }

  double* plane(int ci) { return v.data() + static_cast<std::size_t>(ci) * h * w; }
  const double* plane(int ci) const {
    return v.data() + static_cast<std::size_t>(ci) * h * w;
  }

  std::size_t size() const { return v.size(); }
  bool empty() const { return v.empty(); }
  bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
  std::size_t plane_size() const { return static_cast<std::size_t>(h) * w; }
};

}  // namespace vseg

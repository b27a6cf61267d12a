#include "vseg/imageops.hpp"

#include <cmath>

#include "vseg/error.hpp"

namespace vseg {

namespace {

inline double lerp(double a, double b, double f) { return a + (b - a) * f; }

// Bilinear sample at (sy, sx) with edge clamping.
double sample_bilinear_clamped(const Tensor& t, int ci, double sy, double sx) {
  if (sy < 0) sy = 0;
  if (sx < 0) sx = 0;
  if (sy > t.h - 1) sy = t.h - 1;
  if (sx > t.w - 1) sx = t.w - 1;
  const int y0 = static_cast<int>(sy);
  const int x0 = static_cast<int>(sx);
  const int y1 = y0 + 1 < t.h ? y0 + 1 : y0;
  const int x1 = x0 + 1 < t.w ? x0 + 1 : x0;
  const double fy = sy - y0, fx = sx - x0;
  const double top = lerp(t.at(ci, y0, x0), t.at(ci, y0, x1), fx);
  const double bot = lerp(t.at(ci, y1, x0), t.at(ci, y1, x1), fx);
  return lerp(top, bot, fy);
}

// Bilinear sample where coordinates outside the frame contribute 0.
double sample_bilinear_zero(const Tensor& t, int ci, double sy, double sx) {
  const int y0 = static_cast<int>(std::floor(sy));
  const int x0 = static_cast<int>(std::floor(sx));
  const double fy = sy - y0, fx = sx - x0;
  double acc = 0.0;
  for (int dy = 0; dy <= 1; ++dy) {
    for (int dx = 0; dx <= 1; ++dx) {
      const int yy = y0 + dy, xx = x0 + dx;
      if (yy < 0 || yy >= t.h || xx < 0 || xx >= t.w) continue;
      const double wgt = (dy ? fy : 1.0 - fy) * (dx ? fx : 1.0 - fx);
      acc += wgt * t.at(ci, yy, xx);
    }
  }
  return acc;
}

// Nearest sample, outside -> 0. Half offsets round toward +inf.
double sample_nearest_zero(const Tensor& t, int ci, double sy, double sx) {
  const int yy = static_cast<int>(std::floor(sy + 0.5));
  const int xx = static_cast<int>(std::floor(sx + 0.5));
  if (yy < 0 || yy >= t.h || xx < 0 || xx >= t.w) return 0.0;
  return t.at(ci, yy, xx);
}

// Exact values for the right-angle cases; sin/cos otherwise.
void sincos_deg(double degrees, double& s, double& c) {
  double a = std::fmod(degrees, 360.0);
  if (a < 0) a += 360.0;
  if (a == 0.0) {
    s = 0.0;
    c = 1.0;
  } else if (a == 90.0) {
    s = 1.0;
    c = 0.0;
  } else if (a == 180.0) {
    s = 0.0;
    c = -1.0;
  } else if (a == 270.0) {
    s = -1.0;
    c = 0.0;
  } else {
    const double rad = a * 0.017453292519943295769236907684886;
    s = std::sin(rad);
    c = std::cos(rad);
  }
}

}  // namespace

Tensor resize_bilinear(const Tensor& t, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw structural_error("resize: non-positive output size");
  Tensor out(t.c, out_h, out_w);
  const double ry = static_cast<double>(t.h) / out_h;
  const double rx = static_cast<double>(t.w) / out_w;
  for (int ci = 0; ci < t.c; ++ci)
    for (int y = 0; y < out_h; ++y)
      for (int x = 0; x < out_w; ++x)
        out.at(ci, y, x) =
            sample_bilinear_clamped(t, ci, (y + 0.5) * ry - 0.5, (x + 0.5) * rx - 0.5);
  return out;
}

Tensor resize_nearest(const Tensor& t, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw structural_error("resize: non-positive output size");
  Tensor out(t.c, out_h, out_w);
  const double ry = static_cast<double>(t.h) / out_h;
  const double rx = static_cast<double>(t.w) / out_w;
  for (int ci = 0; ci < t.c; ++ci)
    for (int y = 0; y < out_h; ++y)
      for (int x = 0; x < out_w; ++x) {
        int sy = static_cast<int>(std::floor((y + 0.5) * ry));
        int sx = static_cast<int>(std::floor((x + 0.5) * rx));
        if (sy > t.h - 1) sy = t.h - 1;
        if (sx > t.w - 1) sx = t.w - 1;
        out.at(ci, y, x) = t.at(ci, sy, sx);
      }
  return out;
}

Tensor upsample2x(const Tensor& t) {
  Tensor out(t.c, 2 * t.h, 2 * t.w);
  for (int ci = 0; ci < t.c; ++ci)
    for (int y = 0; y < 2 * t.h; ++y)
      for (int x = 0; x < 2 * t.w; ++x) {
        const int y0 = y / 2, x0 = x / 2;
        const int y1 = (y % 2 && y0 + 1 < t.h) ? y0 + 1 : y0;
        const int x1 = (x % 2 && x0 + 1 < t.w) ? x0 + 1 : x0;
        const double fx = x % 2 ? 0.5 : 0.0;
        const double top = lerp(t.at(ci, y0, x0), t.at(ci, y0, x1), fx);
        const double bot = lerp(t.at(ci, y1, x0), t.at(ci, y1, x1), fx);
        out.at(ci, y, x) = lerp(top, bot, y % 2 ? 0.5 : 0.0);
      }
  return out;
}

Tensor downsample2x(const Tensor& t, int out_h, int out_w) {
  if (2 * (out_h - 1) >= t.h || 2 * (out_w - 1) >= t.w)
    throw structural_error("downsample2x: output exceeds half the input size");
  Tensor out(t.c, out_h, out_w);
  for (int ci = 0; ci < t.c; ++ci)
    for (int y = 0; y < out_h; ++y)
      for (int x = 0; x < out_w; ++x) out.at(ci, y, x) = t.at(ci, 2 * y, 2 * x);
  return out;
}

Tensor flip_horizontal(const Tensor& t) {
  Tensor out(t.c, t.h, t.w);
  for (int ci = 0; ci < t.c; ++ci)
    for (int y = 0; y < t.h; ++y)
      for (int x = 0; x < t.w; ++x) out.at(ci, y, x) = t.at(ci, y, t.w - 1 - x);
  return out;
}

Tensor flip_vertical(const Tensor& t) {
  Tensor out(t.c, t.h, t.w);
  for (int ci = 0; ci < t.c; ++ci)
    for (int y = 0; y < t.h; ++y)
      for (int x = 0; x < t.w; ++x) out.at(ci, y, x) = t.at(ci, t.h - 1 - y, x);
  return out;
}

Tensor rotate_about_center(const Tensor& t, double degrees, bool nearest) {
  double s, c;
  sincos_deg(degrees, s, c);
  const double cy = (t.h - 1) * 0.5, cx = (t.w - 1) * 0.5;
  Tensor out(t.c, t.h, t.w);
  for (int ci = 0; ci < t.c; ++ci)
    for (int y = 0; y < t.h; ++y)
      for (int x = 0; x < t.w; ++x) {
        const double dy = y - cy, dx = x - cx;
        // Inverse of the forward map (dr, dc) -> (dr*c + dc*s, -dr*s + dc*c).
        const double sy = cy + dy * c - dx * s;
        const double sx = cx + dy * s + dx * c;
        out.at(ci, y, x) = nearest ? sample_nearest_zero(t, ci, sy, sx)
                                   : sample_bilinear_zero(t, ci, sy, sx);
      }
  return out;
}

Tensor scale_about_center(const Tensor& t, double factor, bool nearest) {
  if (factor <= 0) throw structural_error("scale: factor must be positive");
  const double cy = (t.h - 1) * 0.5, cx = (t.w - 1) * 0.5;
  Tensor out(t.c, t.h, t.w);
  for (int ci = 0; ci < t.c; ++ci)
    for (int y = 0; y < t.h; ++y)
      for (int x = 0; x < t.w; ++x) {
        const double sy = cy + (y - cy) / factor;
        const double sx = cx + (x - cx) / factor;
        out.at(ci, y, x) = nearest ? sample_nearest_zero(t, ci, sy, sx)
                                   : sample_bilinear_zero(t, ci, sy, sx);
      }
  return out;
}

Tensor crop(const Tensor& t, int y0, int x0, int out_h, int out_w) {
  if (y0 < 0 || x0 < 0 || y0 + out_h > t.h || x0 + out_w > t.w)
    throw structural_error("crop: window outside tensor");
  Tensor out(t.c, out_h, out_w);
  for (int ci = 0; ci < t.c; ++ci)
    for (int y = 0; y < out_h; ++y)
      for (int x = 0; x < out_w; ++x) out.at(ci, y, x) = t.at(ci, y0 + y, x0 + x);
  return out;
}

}  // namespace vseg

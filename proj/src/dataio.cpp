#include "vseg/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "vseg/error.hpp"
#include "vseg/imageops.hpp"

namespace fs = std::filesystem;

namespace vseg {

namespace {

std::vector<fs::path> list_sorted(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    if (e.path().filename().string().front() == '.') continue;
    out.push_back(e.path());
  }
  std::sort(out.begin(), out.end(),
            [](const fs::path& a, const fs::path& b) {
              return a.filename().string() < b.filename().string();
            });
  return out;
}

Tensor mat_to_tensor(const cv::Mat& src, const std::string& path) {
  const int nc = src.channels();
  if (nc != 1 && nc != 3 && nc != 4)
    throw load_error("unsupported channel count in " + path);
  double scale;
  switch (src.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    default: throw load_error("unsupported bit depth in " + path);
  }
  const int out_c = nc == 1 ? 1 : 3;
  Tensor t(out_c, src.rows, src.cols);
  // OpenCV loads BGR(A); an alpha channel is dropped and planes stored RGB.
  for (int y = 0; y < src.rows; ++y) {
    const std::uint8_t* row8 = src.depth() == CV_8U ? src.ptr<std::uint8_t>(y) : nullptr;
    const std::uint16_t* row16 =
        src.depth() == CV_16U ? src.ptr<std::uint16_t>(y) : nullptr;
    for (int x = 0; x < src.cols; ++x) {
      auto px = [&](int ch) {
        return scale * (row8 ? row8[x * nc + ch] : row16[x * nc + ch]);
      };
      if (out_c == 1) {
        t.at(0, y, x) = px(0);
      } else {
        t.at(0, y, x) = px(2);
        t.at(1, y, x) = px(1);
        t.at(2, y, x) = px(0);
      }
    }
  }
  return t;
}

Tensor binarize_map(const Tensor& t) {
  Tensor out(1, t.h, t.w);
  for (int y = 0; y < t.h; ++y)
    for (int x = 0; x < t.w; ++x) {
      double mean = 0.0;
      for (int c = 0; c < t.c; ++c) mean += t.at(c, y, x);
      out.at(0, y, x) = mean / t.c > 0.5 ? 1.0 : 0.0;
    }
  return out;
}

Tensor green_channel(const Tensor& t) {
  if (t.c == 1) return t;
  Tensor out(1, t.h, t.w);
  std::copy(t.plane(1), t.plane(1) + t.plane_size(), out.plane(0));
  return out;
}

double max_mean_intensity(const Tensor& img) {
  double best = 0.0;
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      double mean = 0.0;
      for (int c = 0; c < img.c; ++c) mean += img.at(c, y, x);
      best = std::max(best, mean / img.c);
    }
  return best;
}

struct SplitRanges {
  // [begin, end) indices into the sorted file list
  int train0, train1, val0, val1, test0, test1;
};

SplitRanges split_ranges(Dataset d, int n) {
  switch (d) {
    case Dataset::DRIVE:
      if (n != 40)
        throw load_error("DRIVE root must hold exactly 40 images (20 test + 20 "
                         "training), found " + std::to_string(n));
      // Canonical names sort the 20 test images first.
      return {20, 35, 35, 40, 0, 20};
    case Dataset::STARE:
      if (n != 20)
        throw load_error("STARE root must hold exactly 20 images, found " +
                         std::to_string(n));
      return {0, 7, 7, 10, 10, 20};
    case Dataset::CHASE_DB1:
      if (n != 28)
        throw load_error("CHASE_DB1 root must hold exactly 28 images, found " +
                         std::to_string(n));
      return {0, 15, 15, 20, 20, 28};
    case Dataset::SYNTHETIC: {
      if (n < 3)
        throw load_error("SYNTHETIC root needs at least 3 images, found " +
                         std::to_string(n));
      const int held = std::max(1, n / 6);
      return {0, n - 2 * held, n - 2 * held, n - held, n - held, n};
    }
  }
  throw load_error("unknown dataset");
}

}  // namespace

Tensor load_image_file(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (m.empty()) throw load_error("cannot read image: " + path);
  return mat_to_tensor(m, path);
}

void save_image_file(const Tensor& img, const std::string& path) {
  if (img.c != 1 && img.c != 3) throw io_error("can only write 1- or 3-channel images");
  cv::Mat m(img.h, img.w, img.c == 1 ? CV_8UC1 : CV_8UC3);
  auto q = [](double v) {
    const long r = std::lround(v * 255.0);
    return static_cast<std::uint8_t>(std::clamp(r, 0L, 255L));
  };
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      if (img.c == 1)
        m.at<std::uint8_t>(y, x) = q(img.at(0, y, x));
      else
        m.at<cv::Vec3b>(y, x) =
            cv::Vec3b(q(img.at(2, y, x)), q(img.at(1, y, x)), q(img.at(0, y, x)));
  if (!cv::imwrite(path, m)) throw io_error("cannot write image: " + path);
}

Tensor derive_fov(const Tensor& image, double threshold, std::size_t min_component) {
  const int h = image.h, w = image.w;
  std::vector<char> lit(static_cast<std::size_t>(h) * w, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double mean = 0.0;
      for (int c = 0; c < image.c; ++c) mean += image.at(c, y, x);
      lit[y * w + x] = mean / image.c > threshold ? 1 : 0;
    }

  // Largest 4-connected lit component.
  std::vector<int> comp(static_cast<std::size_t>(h) * w, -1);
  int best_id = -1;
  std::size_t best_size = 0;
  int next_id = 0;
  std::deque<int> queue;
  for (int start = 0; start < h * w; ++start) {
    if (!lit[start] || comp[start] != -1) continue;
    const int id = next_id++;
    std::size_t size = 0;
    comp[start] = id;
    queue.push_back(start);
    while (!queue.empty()) {
      const int at = queue.front();
      queue.pop_front();
      ++size;
      const int y = at / w, x = at % w;
      const int nb[4] = {at - w, at + w, at - 1, at + 1};
      const bool ok[4] = {y > 0, y + 1 < h, x > 0, x + 1 < w};
      for (int k = 0; k < 4; ++k)
        if (ok[k] && lit[nb[k]] && comp[nb[k]] == -1) {
          comp[nb[k]] = id;
          queue.push_back(nb[k]);
        }
    }
    if (size >= min_component && size > best_size) {
      best_size = size;
      best_id = id;
    }
  }
  if (best_id < 0)
    throw load_error("derived FOV mask is empty; lower the threshold");

  // Fill holes: everything not reachable from the border without crossing
  // the component belongs to the mask.
  std::vector<char> outside(static_cast<std::size_t>(h) * w, 0);
  auto push_if_open = [&](int idx) {
    if (!outside[idx] && comp[idx] != best_id) {
      outside[idx] = 1;
      queue.push_back(idx);
    }
  };
  for (int x = 0; x < w; ++x) {
    push_if_open(x);
    push_if_open((h - 1) * w + x);
  }
  for (int y = 0; y < h; ++y) {
    push_if_open(y * w);
    push_if_open(y * w + w - 1);
  }
  while (!queue.empty()) {
    const int at = queue.front();
    queue.pop_front();
    const int y = at / w, x = at % w;
    if (y > 0) push_if_open(at - w);
    if (y + 1 < h) push_if_open(at + w);
    if (x > 0) push_if_open(at - 1);
    if (x + 1 < w) push_if_open(at + 1);
  }
  Tensor mask(1, h, w);
  for (int i = 0; i < h * w; ++i) mask.v[i] = outside[i] ? 0.0 : 1.0;
  return mask;
}

void save_probability_map(const Tensor& map, const std::string& path) {
  if (map.c != 1) throw io_error("probability map must be single-channel");
  save_image_file(map, path);
}

Tensor load_probability_map(const std::string& path) {
  Tensor t = load_image_file(path);
  if (t.c != 1) throw load_error("probability map is not grayscale: " + path);
  return t;
}

DatasetSplit load_dataset(const std::string& root, Dataset dataset,
                          const LoadOptions& opts) {
  const fs::path base(root);
  const auto images = list_sorted(base / "images");
  const auto truths = list_sorted(base / "truth");
  const auto masks = list_sorted(base / "mask");
  if (images.empty())
    throw load_error("no images under " + (base / "images").string());
  if (truths.size() != images.size())
    throw load_error("found " + std::to_string(images.size()) + " images but " +
                     std::to_string(truths.size()) + " truth maps under " +
                     base.string());
  if (!masks.empty() && masks.size() != images.size())
    throw load_error("mask directory must be empty/absent or hold one mask per "
                     "image under " + base.string());
  if (dataset == Dataset::DRIVE && masks.empty())
    throw load_error("DRIVE ships FOV masks; expected them under " +
                     (base / "mask").string());

  const SplitRanges r = split_ranges(dataset, static_cast<int>(images.size()));

  std::vector<FundusSample> all;
  all.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    FundusSample s;
    s.id = images[i].stem().string();
    s.source_dataset = dataset;
    s.image = load_image_file(images[i].string());
    s.truth = binarize_map(load_image_file(truths[i].string()));
    if (!masks.empty()) s.fov = binarize_map(load_image_file(masks[i].string()));

    if (dataset == Dataset::STARE && opts.stare_green_only)
      s.image = green_channel(s.image);
    if (dataset == Dataset::CHASE_DB1 && opts.chase_rescale != 1.0) {
      const int nh = static_cast<int>(std::lround(s.image.h * opts.chase_rescale));
      const int nw = static_cast<int>(std::lround(s.image.w * opts.chase_rescale));
      s.image = resize_bilinear(s.image, nh, nw);
      s.truth = resize_nearest(s.truth, nh, nw);
      if (!s.fov.empty()) s.fov = resize_nearest(s.fov, nh, nw);
    }
    if (s.fov.empty())
      s.fov = derive_fov(s.image, opts.fov_threshold * max_mean_intensity(s.image));

    if (s.truth.h != s.image.h || s.truth.w != s.image.w)
      throw structural_error("truth size differs from image for sample " + s.id);
    if (s.fov.h != s.image.h || s.fov.w != s.image.w)
      throw structural_error("FOV size differs from image for sample " + s.id);

    std::size_t stray = 0;
    for (std::size_t k = 0; k < s.truth.size(); ++k)
      if (s.truth.v[k] > 0.5 && s.fov.v[k] <= 0.5) ++stray;
    if (stray > 0)
      std::fprintf(stderr, "warning: sample %s has %zu vessel pixels outside the FOV\n",
                   s.id.c_str(), stray);
    all.push_back(std::move(s));
  }

  DatasetSplit split;
  split.dataset = dataset;
  for (int i = r.train0; i < r.train1; ++i) split.train.push_back(all[i]);
  for (int i = r.val0; i < r.val1; ++i) split.val.push_back(all[i]);
  for (int i = r.test0; i < r.test1; ++i) split.test.push_back(all[i]);
  return split;
}

}  // namespace vseg

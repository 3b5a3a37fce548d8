// Copyright 2026 The ODExAI Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "odexai/imageproc.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <utility>

#include "odexai/error.h"

namespace odexai {

MaskGrid::MaskGrid(int width, int height, float fill)
    : MaskGrid(width, height,
               std::vector<float>(static_cast<std::size_t>(std::max(width, 0)) *
                                      std::max(height, 0),
                                  fill)) {}

MaskGrid::MaskGrid(int width, int height, std::vector<float> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "mask dims must be positive");
  }
  if (values_.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::kDimensionMismatch, "mask size mismatch");
  }
  for (float v : values_) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw Error(ErrorCode::kInvalidArgument, "mask value outside [0,1]");
    }
  }
}

SegmentLabelMap::SegmentLabelMap(int width, int height, std::vector<int> labels,
                                 int segment_count)
    : width_(width),
      height_(height),
      labels_(std::move(labels)),
      segment_count_(segment_count) {
  if (labels_.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::kDimensionMismatch, "label map size mismatch");
  }
  if (segment_count <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "segment_count must be positive");
  }
}

SaliencyMap MinMaxNormalize(const SaliencyMap& map) {
  const auto& v = map.values();
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  std::vector<double> out(v.size(), 1.0);
  if (hi > lo) {
    const double range = hi - lo;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out[i] = std::clamp((v[i] - lo) / range, 0.0, 1.0);
    }
  }
  return SaliencyMap(map.width(), map.height(), std::move(out));
}

ImageBuffer ApplyMask(const ImageBuffer& image, const MaskGrid& mask,
                      const ImageBuffer& baseline) {
  if (image.width() != mask.width() || image.height() != mask.height() ||
      image.width() != baseline.width() ||
      image.height() != baseline.height()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "image, mask and baseline must share dimensions");
  }
  const auto& src = image.pixels();
  const auto& base = baseline.pixels();
  const auto& m = mask.values();
  std::vector<float> out(src.size());
  for (std::size_t p = 0; p < m.size(); ++p) {
    const float keep = m[p];
    for (int c = 0; c < ImageBuffer::kChannels; ++c) {
      const std::size_t i = p * ImageBuffer::kChannels + c;
      out[i] = std::clamp(keep * src[i] + (1.0f - keep) * base[i], 0.0f, 1.0f);
    }
  }
  return ImageBuffer(image.width(), image.height(), std::move(out));
}

std::vector<double> GaussianTaps(double sigma) {
  if (!(sigma > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "sigma must be positive");
  }
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    taps[k + radius] = std::exp(-(k * k) / (2.0 * sigma * sigma));
    total += taps[k + radius];
  }
  for (double& t : taps) t /= total;
  return taps;
}

ImageBuffer GaussianBlur(const ImageBuffer& image, double sigma) {
  const std::vector<double> taps = GaussianTaps(sigma);
  const int radius = static_cast<int>(taps.size() / 2);
  const int w = image.width();
  const int h = image.height();
  constexpr int kC = ImageBuffer::kChannels;
  const auto& src = image.pixels();

  std::vector<double> tmp(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < kC; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int xx = std::clamp(x + k, 0, w - 1);
          acc += taps[k + radius] * src[(static_cast<std::size_t>(y) * w + xx) * kC + c];
        }
        tmp[(static_cast<std::size_t>(y) * w + x) * kC + c] = acc;
      }
    }
  }
  std::vector<float> out(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < kC; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int yy = std::clamp(y + k, 0, h - 1);
          acc += taps[k + radius] * tmp[(static_cast<std::size_t>(yy) * w + x) * kC + c];
        }
        out[(static_cast<std::size_t>(y) * w + x) * kC + c] =
            static_cast<float>(std::clamp(acc, 0.0, 1.0));
      }
    }
  }
  return ImageBuffer(w, h, std::move(out));
}

namespace {

// Linear sample position along one axis: fractional index into the source.
struct AxisSample {
  int i0;
  int i1;
  float t;
};

std::vector<AxisSample> CornerAlignedAxis(int in, int canvas, int out,
                                          double shift) {
  std::vector<AxisSample> samples(out);
  const double scale =
      (in > 1 && canvas > 1) ? static_cast<double>(in - 1) / (canvas - 1) : 0.0;
  for (int x = 0; x < out; ++x) {
    const double u = std::clamp((x + shift) * scale, 0.0,
                                static_cast<double>(in - 1));
    const int i0 = static_cast<int>(std::floor(u));
    const int i1 = std::min(i0 + 1, in - 1);
    samples[x] = {i0, i1, static_cast<float>(u - i0)};
  }
  return samples;
}

std::vector<AxisSample> HalfPixelAxis(int in, int out) {
  std::vector<AxisSample> samples(out);
  const double scale = static_cast<double>(in) / out;
  for (int x = 0; x < out; ++x) {
    const double u = std::clamp((x + 0.5) * scale - 0.5, 0.0,
                                static_cast<double>(in - 1));
    const int i0 = static_cast<int>(std::floor(u));
    const int i1 = std::min(i0 + 1, in - 1);
    samples[x] = {i0, i1, static_cast<float>(u - i0)};
  }
  return samples;
}

}  // namespace

MaskGrid UpsampleAndCrop(const MaskGrid& grid, int canvas_w, int canvas_h,
                         int out_w, int out_h, double shift_x, double shift_y) {
  if (canvas_w < grid.width() || canvas_h < grid.height() || out_w <= 0 ||
      out_h <= 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "upsampling target smaller than the source grid");
  }
  const auto xs = CornerAlignedAxis(grid.width(), canvas_w, out_w, shift_x);
  const auto ys = CornerAlignedAxis(grid.height(), canvas_h, out_h, shift_y);
  std::vector<float> out(static_cast<std::size_t>(out_w) * out_h);
  for (int y = 0; y < out_h; ++y) {
    const AxisSample& sy = ys[y];
    for (int x = 0; x < out_w; ++x) {
      const AxisSample& sx = xs[x];
      const float top = grid.at(sy.i0, sx.i0) * (1.0f - sx.t) +
                        grid.at(sy.i0, sx.i1) * sx.t;
      const float bottom = grid.at(sy.i1, sx.i0) * (1.0f - sx.t) +
                           grid.at(sy.i1, sx.i1) * sx.t;
      out[static_cast<std::size_t>(y) * out_w + x] =
          std::clamp(top * (1.0f - sy.t) + bottom * sy.t, 0.0f, 1.0f);
    }
  }
  return MaskGrid(out_w, out_h, std::move(out));
}

MaskGrid BilinearUpsample(const MaskGrid& grid, int out_w, int out_h,
                          double shift_x, double shift_y) {
  return UpsampleAndCrop(grid, out_w, out_h, out_w, out_h, shift_x, shift_y);
}

std::vector<double> ResizeBilinear(const std::vector<double>& src, int src_w,
                                   int src_h, int out_w, int out_h) {
  if (src.size() != static_cast<std::size_t>(src_w) * src_h || out_w <= 0 ||
      out_h <= 0) {
    throw Error(ErrorCode::kDimensionMismatch, "bad resize dimensions");
  }
  const auto xs = HalfPixelAxis(src_w, out_w);
  const auto ys = HalfPixelAxis(src_h, out_h);
  auto at = [&](int r, int c) {
    return src[static_cast<std::size_t>(r) * src_w + c];
  };
  std::vector<double> out(static_cast<std::size_t>(out_w) * out_h);
  for (int y = 0; y < out_h; ++y) {
    const AxisSample& sy = ys[y];
    for (int x = 0; x < out_w; ++x) {
      const AxisSample& sx = xs[x];
      const double top = at(sy.i0, sx.i0) * (1.0 - sx.t) + at(sy.i0, sx.i1) * sx.t;
      const double bottom =
          at(sy.i1, sx.i0) * (1.0 - sx.t) + at(sy.i1, sx.i1) * sx.t;
      out[static_cast<std::size_t>(y) * out_w + x] =
          top * (1.0 - sy.t) + bottom * sy.t;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// SLIC

namespace {

std::array<double, 3> RgbToLab(double r, double g, double b) {
  auto linear = [](double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
  };
  r = linear(r);
  g = linear(g);
  b = linear(b);
  // D65 reference white.
  const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
  const double y = (0.2126729 * r + 0.7151522 * g + 0.0721750 * b) / 1.0;
  const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
  auto f = [](double t) {
    constexpr double kEps = 216.0 / 24389.0;
    constexpr double kKappa = 24389.0 / 27.0;
    return t > kEps ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0;
  };
  const double fx = f(x), fy = f(y), fz = f(z);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

// Picks a seed lattice close to n_segments cells with near-square cells.
std::pair<int, int> ChooseLattice(int width, int height, int n) {
  int best_x = 1, best_y = 1;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int nx = 1; nx <= std::min(width, 2 * n); ++nx) {
    const int base = std::max(1, n / nx);
    for (int ny : {base, base + 1}) {
      if (ny > height) continue;
      const double count_cost =
          std::abs(std::log(static_cast<double>(nx) * ny / n));
      const double aspect_cost = std::abs(std::log(
          (static_cast<double>(width) / nx) / (static_cast<double>(height) / ny)));
      const double cost = count_cost + 0.5 * aspect_cost;
      // Ties go to the lattice with more columns.
      if (cost < best_cost - 1e-12 ||
          (std::abs(cost - best_cost) <= 1e-12 && nx > best_x)) {
        best_cost = cost;
        best_x = nx;
        best_y = ny;
      }
    }
  }
  return {best_x, best_y};
}

struct Center {
  double l, a, b, x, y;
};

}  // namespace

SegmentLabelMap SlicSegment(const ImageBuffer& image, int n_segments,
                            const SlicOptions& options) {
  const int w = image.width();
  const int h = image.height();
  const std::size_t n_pixels = image.pixel_count();
  if (n_segments <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "n_segments must be positive");
  }
  if (static_cast<std::size_t>(n_segments) > n_pixels) {
    throw Error(ErrorCode::kTooManySegments,
                "n_segments exceeds the number of pixels");
  }
  if (!(options.compactness > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "compactness must be positive");
  }

  std::vector<std::array<double, 3>> lab(n_pixels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      lab[static_cast<std::size_t>(y) * w + x] =
          RgbToLab(image.at(y, x, 0), image.at(y, x, 1), image.at(y, x, 2));
    }
  }
  auto lab_at = [&](int y, int x) -> const std::array<double, 3>& {
    return lab[static_cast<std::size_t>(y) * w + x];
  };

  const auto [nx, ny] = ChooseLattice(w, h, n_segments);
  const double cell_w = static_cast<double>(w) / nx;
  const double cell_h = static_cast<double>(h) / ny;
  const double step = std::sqrt(cell_w * cell_h);

  auto gradient = [&](int y, int x) {
    const int x0 = std::max(x - 1, 0), x1 = std::min(x + 1, w - 1);
    const int y0 = std::max(y - 1, 0), y1 = std::min(y + 1, h - 1);
    double g = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double dx = lab_at(y, x1)[c] - lab_at(y, x0)[c];
      const double dy = lab_at(y1, x)[c] - lab_at(y0, x)[c];
      g += dx * dx + dy * dy;
    }
    return g;
  };

  std::vector<Center> centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      int sx = std::min(static_cast<int>((i + 0.5) * cell_w), w - 1);
      int sy = std::min(static_cast<int>((j + 0.5) * cell_h), h - 1);
      // Move the seed off edges: lowest gradient in its 3x3 neighbourhood,
      // only when strictly lower than the lattice position.
      int best_x = sx, best_y = sy;
      double best_g = gradient(sy, sx);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = sy + dy, xx = sx + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          const double g = gradient(yy, xx);
          if (g < best_g) {
            best_g = g;
            best_x = xx;
            best_y = yy;
          }
        }
      }
      const auto& c = lab_at(best_y, best_x);
      const bool moved = best_x != sx || best_y != sy;
      centers.push_back({c[0], c[1], c[2],
                         moved ? best_x + 0.5 : (i + 0.5) * cell_w,
                         moved ? best_y + 0.5 : (j + 0.5) * cell_h});
    }
  }

  const double spatial_weight =
      (options.compactness / step) * (options.compactness / step);
  const int reach_x = static_cast<int>(std::ceil(cell_w));
  const int reach_y = static_cast<int>(std::ceil(cell_h));
  std::vector<int> assign(n_pixels, -1);
  std::vector<double> dist(n_pixels);

  auto distance = [&](const Center& c, int y, int x) {
    const auto& p = lab_at(y, x);
    const double dl = p[0] - c.l, da = p[1] - c.a, db = p[2] - c.b;
    const double dx = x + 0.5 - c.x, dy = y + 0.5 - c.y;
    return dl * dl + da * da + db * db + spatial_weight * (dx * dx + dy * dy);
  };

  for (int iter = 0; iter < std::max(options.iterations, 1); ++iter) {
    std::fill(assign.begin(), assign.end(), -1);
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const Center& c = centers[k];
      const int x_lo = std::max(0, static_cast<int>(std::floor(c.x)) - reach_x);
      const int x_hi = std::min(w - 1, static_cast<int>(std::floor(c.x)) + reach_x);
      const int y_lo = std::max(0, static_cast<int>(std::floor(c.y)) - reach_y);
      const int y_hi = std::min(h - 1, static_cast<int>(std::floor(c.y)) + reach_y);
      for (int y = y_lo; y <= y_hi; ++y) {
        for (int x = x_lo; x <= x_hi; ++x) {
          const double d = distance(c, y, x);
          const std::size_t p = static_cast<std::size_t>(y) * w + x;
          if (d < dist[p]) {
            dist[p] = d;
            assign[p] = static_cast<int>(k);
          }
        }
      }
    }
    // Pixels outside every search window fall back to the nearest centre.
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        if (assign[p] >= 0) continue;
        for (std::size_t k = 0; k < centers.size(); ++k) {
          const double d = distance(centers[k], y, x);
          if (d < dist[p]) {
            dist[p] = d;
            assign[p] = static_cast<int>(k);
          }
        }
      }
    }
    std::vector<Center> sums(centers.size(), Center{0, 0, 0, 0, 0});
    std::vector<std::size_t> counts(centers.size(), 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        Center& s = sums[assign[p]];
        const auto& c = lab[p];
        s.l += c[0];
        s.a += c[1];
        s.b += c[2];
        s.x += x + 0.5;
        s.y += y + 0.5;
        ++counts[assign[p]];
      }
    }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      if (counts[k] == 0) continue;
      const double n = static_cast<double>(counts[k]);
      centers[k] = {sums[k].l / n, sums[k].a / n, sums[k].b / n, sums[k].x / n,
                    sums[k].y / n};
    }
  }

  // Connectivity enforcement: each cluster keeps its largest 4-connected
  // component; orphan fragments are absorbed by growing the kept segments
  // breadth-first, so every segment stays connected.
  constexpr std::array<int, 4> kDx = {-1, 0, 1, 0};
  constexpr std::array<int, 4> kDy = {0, -1, 0, 1};
  std::vector<int> component_of(n_pixels, -1);
  std::vector<std::size_t> component_size;
  std::vector<std::size_t> best_component(centers.size(), SIZE_MAX);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < n_pixels; ++start) {
    if (component_of[start] >= 0) continue;
    const int id = static_cast<int>(component_size.size());
    std::size_t size = 0;
    stack.assign(1, start);
    component_of[start] = id;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++size;
      const int px = static_cast<int>(p % w), py = static_cast<int>(p / w);
      for (int d = 0; d < 4; ++d) {
        const int xx = px + kDx[d], yy = py + kDy[d];
        if (xx < 0 || xx >= w || yy < 0 || yy >= h) continue;
        const std::size_t q = static_cast<std::size_t>(yy) * w + xx;
        if (component_of[q] < 0 && assign[q] == assign[start]) {
          component_of[q] = id;
          stack.push_back(q);
        }
      }
    }
    component_size.push_back(size);
    std::size_t& best = best_component[assign[start]];
    if (best == SIZE_MAX || size > component_size[best]) best = id;
  }

  // Kept components are numbered in scan order of their first pixel.
  std::vector<int> component_label(component_size.size(), -1);
  std::vector<bool> kept(component_size.size(), false);
  for (std::size_t c : best_component) {
    if (c != SIZE_MAX) kept[c] = true;
  }
  int next_label = 0;
  std::vector<int> labels(n_pixels, -1);
  std::deque<std::size_t> frontier;
  for (std::size_t p = 0; p < n_pixels; ++p) {
    const int c = component_of[p];
    if (!kept[c]) continue;
    if (component_label[c] < 0) component_label[c] = next_label++;
    labels[p] = component_label[c];
    frontier.push_back(p);
  }
  while (!frontier.empty()) {
    const std::size_t p = frontier.front();
    frontier.pop_front();
    const int px = static_cast<int>(p % w), py = static_cast<int>(p / w);
    for (int d = 0; d < 4; ++d) {
      const int xx = px + kDx[d], yy = py + kDy[d];
      if (xx < 0 || xx >= w || yy < 0 || yy >= h) continue;
      const std::size_t q = static_cast<std::size_t>(yy) * w + xx;
      if (labels[q] < 0) {
        labels[q] = labels[p];
        frontier.push_back(q);
      }
    }
  }
  return SegmentLabelMap(w, h, std::move(labels), next_label);
}

}  // namespace odexai

#include "fpe/fov.hpp"

#include <algorithm>
#include <cstdint>
#include <vector>

#include "fpe/error.hpp"
#include "vector_clones.hpp"

namespace fpe::fov {

using imaging::BBox;
using imaging::ChannelSumMap;
using imaging::FovMask;
using imaging::RasterImage;

namespace {

struct Point {
  std::int64_t x;
  std::int64_t y;
  friend bool operator==(const Point&, const Point&) = default;
};

std::int64_t cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

std::int64_t floor_div(std::int64_t num, std::int64_t den) {
  std::int64_t q = num / den;
  if ((num % den != 0) && ((num < 0) != (den < 0))) --q;
  return q;
}

std::int64_t ceil_div(std::int64_t num, std::int64_t den) { return -floor_div(-num, den); }

// Andrew's monotone chain; returns vertices counter-clockwise without
// collinear points.
std::vector<Point> hull_of(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;

  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Point& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

void draw_segment(FovMask& out, const Point& a, const Point& b) {
  const std::int64_t dx = b.x - a.x;
  const std::int64_t dy = b.y - a.y;
  const std::int64_t steps = std::max(std::abs(dx), std::abs(dy));
  if (steps == 0) {
    out.set(static_cast<std::size_t>(a.x), static_cast<std::size_t>(a.y));
    return;
  }
  for (std::int64_t i = 0; i <= steps; ++i) {
    // round(a + d*i/steps) with ties toward +inf, in integers
    const std::int64_t x = a.x + floor_div(2 * dx * i + steps, 2 * steps);
    const std::int64_t y = a.y + floor_div(2 * dy * i + steps, 2 * steps);
    out.set(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
  }
}

}  // namespace

FPE_VECTOR_CLONES ChannelSumMap channel_sum_map(const RasterImage& image) {
  ChannelSumMap sums(image.width(), image.height());
  for (std::size_t y = 0; y < image.height(); ++y) {
    const auto src = image.row(y);
    auto dst = sums.row(y);
    for (std::size_t x = 0; x < image.width(); ++x) {
      dst[x] = static_cast<std::uint16_t>(src[3 * x] + src[3 * x + 1] + src[3 * x + 2]);
    }
  }
  return sums;
}

SumHistogram histogram(const ChannelSumMap& sums) {
  SumHistogram hist{};
  for (const std::uint16_t v : sums.data()) ++hist[v];
  return hist;
}

OtsuResult otsu_threshold(std::span<const std::uint64_t> hist) {
  std::uint64_t total = 0;
  std::uint64_t weighted = 0;
  std::size_t min_bin = hist.size();
  std::size_t max_bin = 0;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    if (hist[i] == 0) continue;
    total += hist[i];
    weighted += hist[i] * i;
    min_bin = std::min(min_bin, i);
    max_bin = i;
  }
  if (total == 0) fail(ErrorKind::Contract, "otsu_threshold: empty histogram");
  if (min_bin == max_bin) fail(ErrorKind::DegenerateHistogram, "otsu_threshold: all mass in a single bin");

  // Class statistics come from exact integer running sums, so scaling every
  // count by k yields bit-identical ratios.
  const double n = static_cast<double>(total);
  std::uint64_t count0 = 0;
  std::uint64_t sum0 = 0;
  OtsuResult best{min_bin, -1.0};
  for (std::size_t t = min_bin; t < max_bin; ++t) {
    count0 += hist[t];
    sum0 += hist[t] * t;
    if (hist[t] == 0 && t != min_bin) {
      // same split as t-1; cannot beat it under the lowest-maximizer rule
      continue;
    }
    const std::uint64_t count1 = total - count0;
    const std::uint64_t sum1 = weighted - sum0;
    const double w0 = static_cast<double>(count0) / n;
    const double w1 = static_cast<double>(count1) / n;
    const double mu0 = static_cast<double>(sum0) / static_cast<double>(count0);
    const double mu1 = static_cast<double>(sum1) / static_cast<double>(count1);
    const double var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (var > best.between_class_variance) best = {t, var};
  }
  return best;
}

FPE_VECTOR_CLONES FovMask threshold_above(const ChannelSumMap& sums, std::size_t threshold) {
  FovMask mask(sums.width(), sums.height());
  auto dst = mask.data();
  const auto src = sums.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > threshold ? 1 : 0;
  return mask;
}

FovMask fill_holes(const FovMask& mask) {
  const std::size_t w = mask.width();
  const std::size_t h = mask.height();
  const auto in = mask.data();
  // 0 = unvisited background, 1 = foreground, 2 = background reached from border
  std::vector<std::uint8_t> state(in.begin(), in.end());
  // Scanline flood: each seed grows into a maximal run, and the rows above
  // and below get one seed per unvisited run they share with it.
  std::vector<std::size_t> stack;
  auto seed_runs = [&](std::size_t row, std::size_t lo, std::size_t hi) {
    const std::size_t base = row * w;
    for (std::size_t x = lo; x <= hi; ++x) {
      if (state[base + x] != 0) continue;
      stack.push_back(base + x);
      while (x <= hi && state[base + x] == 0) ++x;
    }
  };
  seed_runs(0, 0, w - 1);
  seed_runs(h - 1, 0, w - 1);
  for (std::size_t y = 0; y < h; ++y) {
    seed_runs(y, 0, 0);
    seed_runs(y, w - 1, w - 1);
  }
  while (!stack.empty()) {
    const std::size_t idx = stack.back();
    stack.pop_back();
    if (state[idx] != 0) continue;
    const std::size_t y = idx / w;
    const std::size_t base = y * w;
    std::size_t lo = idx - base;
    std::size_t hi = lo;
    while (lo > 0 && state[base + lo - 1] == 0) --lo;
    while (hi + 1 < w && state[base + hi + 1] == 0) ++hi;
    std::fill(state.begin() + static_cast<std::ptrdiff_t>(base + lo),
              state.begin() + static_cast<std::ptrdiff_t>(base + hi + 1), std::uint8_t{2});
    if (y > 0) seed_runs(y - 1, lo, hi);
    if (y + 1 < h) seed_runs(y + 1, lo, hi);
  }

  FovMask out(w, h);
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = state[i] == 2 ? 0 : 1;
  return out;
}

FovMask estimate_fov(const RasterImage& image) {
  const ChannelSumMap sums = channel_sum_map(image);
  const SumHistogram hist = histogram(sums);
  OtsuResult otsu;
  try {
    otsu = otsu_threshold(hist);
  } catch (const Error& e) {
    fail(ErrorKind::FovEstimation, std::string("fov estimation failed: ") + e.what());
  }
  FovMask mask = fill_holes(threshold_above(sums, otsu.threshold));
  if (mask.empty_foreground()) fail(ErrorKind::FovEstimation, "fov estimation produced an empty mask");
  return mask;
}

BBox bounding_box(const FovMask& mask) {
  BBox box{mask.height(), 0, mask.width(), 0};
  bool any = false;
  for (std::size_t y = 0; y < mask.height(); ++y) {
    const auto row = mask.row(y);
    const auto first = std::find(row.begin(), row.end(), std::uint8_t{1});
    if (first == row.end()) continue;
    const auto last = std::find(row.rbegin(), row.rend(), std::uint8_t{1});
    any = true;
    box.row_min = std::min(box.row_min, y);
    box.row_max = y;
    box.col_min = std::min(box.col_min, static_cast<std::size_t>(first - row.begin()));
    box.col_max = std::max(box.col_max, static_cast<std::size_t>(row.rend() - last - 1));
  }
  if (!any) fail(ErrorKind::EmptyMask, "bounding_box: mask has no foreground");
  return box;
}

FovMask convex_hull_mask(const FovMask& mask) {
  // Only the row extremes can be hull vertices.
  std::vector<Point> pts;
  for (std::size_t y = 0; y < mask.height(); ++y) {
    const auto row = mask.row(y);
    const auto first = std::find(row.begin(), row.end(), std::uint8_t{1});
    if (first == row.end()) continue;
    const auto last = std::find(row.rbegin(), row.rend(), std::uint8_t{1});
    const auto iy = static_cast<std::int64_t>(y);
    pts.push_back({first - row.begin(), iy});
    pts.push_back({row.rend() - last - 1, iy});
  }
  if (pts.empty()) fail(ErrorKind::EmptyMask, "convex_hull_mask: mask has no foreground");

  const std::vector<Point> hull = hull_of(std::move(pts));
  FovMask out(mask.width(), mask.height());
  if (hull.size() <= 2) {
    draw_segment(out, hull.front(), hull.back());
    return out;
  }

  std::int64_t y_min = hull.front().y;
  std::int64_t y_max = hull.front().y;
  std::int64_t x_min = hull.front().x;
  std::int64_t x_max = hull.front().x;
  for (const Point& p : hull) {
    y_min = std::min(y_min, p.y);
    y_max = std::max(y_max, p.y);
    x_min = std::min(x_min, p.x);
    x_max = std::max(x_max, p.x);
  }

  for (std::int64_t y = y_min; y <= y_max; ++y) {
    std::int64_t lo = x_min;
    std::int64_t hi = x_max;
    for (std::size_t i = 0; i < hull.size() && lo <= hi; ++i) {
      const Point& a = hull[i];
      const Point& b = hull[(i + 1) % hull.size()];
      const std::int64_t dx = b.x - a.x;
      const std::int64_t dy = b.y - a.y;
      // inside iff dy * (x - ax) <= dx * (y - ay)
      const std::int64_t rhs = dx * (y - a.y);
      if (dy > 0) {
        hi = std::min(hi, a.x + floor_div(rhs, dy));
      } else if (dy < 0) {
        lo = std::max(lo, a.x + ceil_div(rhs, dy));
      } else if (rhs < 0) {
        lo = hi + 1;
      }
    }
    if (lo > hi) continue;
    auto row = out.row(static_cast<std::size_t>(y));
    std::fill(row.begin() + lo, row.begin() + hi + 1, std::uint8_t{1});
  }
  return out;
}

}  // namespace fpe::fov

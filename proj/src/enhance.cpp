#include "fpe/enhance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fpe/error.hpp"
#include "fpe/fov.hpp"
#include "vector_clones.hpp"

namespace fpe::enhance {

using imaging::FovMask;
using imaging::GrayMap;
using imaging::RasterImage;

namespace {

// Half away from zero; after the clamp v is non-negative and v - floor(v) is exact.
std::uint8_t round_channel(double v) {
  v = std::clamp(v, 0.0, 255.0);
  const double whole = std::floor(v);
  return static_cast<std::uint8_t>(whole + (v - whole >= 0.5 ? 1.0 : 0.0));
}

void require_same_shape(const RasterImage& image, const FovMask& mask, const char* op) {
  require(image.width() == mask.width() && image.height() == mask.height(),
          std::string(op) + ": mask dimensions do not match image");
}

// One output row from 2*radius+1 source rows: near[i] and far[i] are the
// rows i taps before and after the centre (near[0] is the centre). Mirrored
// taps are folded, and each pixel sums centre first, then outward, in blocks
// of eight kept in registers.
inline void blur_line(const double* const* near, const double* const* far, const std::vector<double>& kernel,
                      std::size_t width, double* out) {
  constexpr std::size_t kBlock = 8;
  const std::size_t radius = kernel.size() / 2;
  const double* centre = near[0];
  std::size_t x = 0;
  for (; x + kBlock <= width; x += kBlock) {
    double acc[kBlock];
    for (std::size_t j = 0; j < kBlock; ++j) acc[j] = kernel[radius] * centre[x + j];
    for (std::size_t i = 1; i <= radius; ++i) {
      const double wk = kernel[radius + i];
      const double* a = near[i] + x;
      const double* b = far[i] + x;
      for (std::size_t j = 0; j < kBlock; ++j) acc[j] += wk * (a[j] + b[j]);
    }
    for (std::size_t j = 0; j < kBlock; ++j) out[x + j] = acc[j];
  }
  for (; x < width; ++x) {
    double acc = kernel[radius] * centre[x];
    for (std::size_t i = 1; i <= radius; ++i) acc += kernel[radius + i] * (near[i][x] + far[i][x]);
    out[x] = acc;
  }
}

// Sample (x, y) sits at src[(y * width + x) * step], so interleaved channels
// are read in place.
template <typename T>
inline void blur_rows_strided(const T* src, std::size_t step, std::span<double> dst, std::size_t width,
                              std::size_t height, const std::vector<double>& kernel) {
  const std::size_t radius = kernel.size() / 2;
  std::vector<double> padded(width + 2 * radius);
  std::vector<const double*> near(radius + 1);
  std::vector<const double*> far(radius + 1);
  double* centre = padded.data() + radius;
  for (std::size_t i = 0; i <= radius; ++i) {
    near[i] = centre - i;
    far[i] = centre + i;
  }
  for (std::size_t y = 0; y < height; ++y) {
    const T* in = src + y * width * step;
    for (std::size_t x = 0; x < width; ++x) centre[x] = static_cast<double>(in[x * step]);
    std::fill(padded.begin(), padded.begin() + radius, centre[0]);
    std::fill(padded.begin() + radius + width, padded.end(), centre[width - 1]);
    blur_line(near.data(), far.data(), kernel, width, dst.data() + y * width);
  }
}

FPE_VECTOR_CLONES void blur_rows(std::span<const double> src, std::span<double> dst, std::size_t width,
                                 std::size_t height, const std::vector<double>& kernel) {
  blur_rows_strided(src.data(), 1, dst, width, height, kernel);
}

FPE_VECTOR_CLONES void blur_rows_rgb(std::span<const std::uint8_t> src, std::size_t channel, std::span<double> dst,
                                     std::size_t width, std::size_t height, const std::vector<double>& kernel) {
  blur_rows_strided(src.data() + channel, 3, dst, width, height, kernel);
}

FPE_VECTOR_CLONES void blur_cols(std::span<const double> src, std::span<double> dst, std::size_t width,
                                 std::size_t height, const std::vector<double>& kernel) {
  const std::size_t radius = kernel.size() / 2;
  const auto last = static_cast<std::ptrdiff_t>(height) - 1;
  auto row = [&](std::ptrdiff_t y) {
    return src.data() + static_cast<std::size_t>(std::clamp(y, std::ptrdiff_t{0}, last)) * width;
  };
  std::vector<const double*> near(radius + 1);
  std::vector<const double*> far(radius + 1);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t i = 0; i <= radius; ++i) {
      const auto off = static_cast<std::ptrdiff_t>(i);
      near[i] = row(static_cast<std::ptrdiff_t>(y) - off);
      far[i] = row(static_cast<std::ptrdiff_t>(y) + off);
    }
    blur_line(near.data(), far.data(), kernel, width, dst.data() + y * width);
  }
}

FPE_VECTOR_CLONES void compose(std::span<const std::uint8_t> work, const std::array<GrayMap, 3>& background,
                                std::span<const std::uint8_t> fov, const EnhanceParams& params,
                                std::span<std::uint8_t> out) {
  const double* bg[3] = {background[0].data().data(), background[1].data().data(), background[2].data().data()};
  for (std::size_t i = 0; i < fov.size(); ++i) {
    if (!fov[i]) continue;
    for (std::size_t c = 0; c < 3; ++c) {
      out[3 * i + c] = round_channel(params.alpha * work[3 * i + c] - params.beta * bg[c][i] + params.gamma);
    }
  }
}

}  // namespace

void EnhanceParams::validate() const {
  require(std::isfinite(alpha) && alpha >= 0.0, "enhance: alpha must be non-negative");
  require(std::isfinite(beta) && beta >= 0.0, "enhance: beta must be non-negative");
  require(gamma >= 0.0 && gamma <= 255.0, "enhance: gamma must lie in [0,255]");
  require(std::isfinite(sigma_divisor) && sigma_divisor > 0.0, "enhance: sigma_divisor must be positive");
  require(std::isfinite(kernel_truncation) && kernel_truncation >= 1.0, "enhance: kernel_truncation must be >= 1");
}

MeanRgb mean_rgb_within(const RasterImage& image, const FovMask& region) {
  require_same_shape(image, region, "mean_rgb_within");
  std::uint64_t sum[3] = {0, 0, 0};
  std::uint64_t n = 0;
  for (std::size_t y = 0; y < image.height(); ++y) {
    const auto px = image.row(y);
    const auto m = region.row(y);
    for (std::size_t x = 0; x < image.width(); ++x) {
      if (!m[x]) continue;
      sum[0] += px[3 * x];
      sum[1] += px[3 * x + 1];
      sum[2] += px[3 * x + 2];
      ++n;
    }
  }
  if (n == 0) fail(ErrorKind::EmptyMask, "mean_rgb_within: empty region");
  const auto dn = static_cast<double>(n);
  return {static_cast<double>(sum[0]) / dn, static_cast<double>(sum[1]) / dn, static_cast<double>(sum[2]) / dn};
}

RasterImage fill_outside(const RasterImage& image, const FovMask& hull, const MeanRgb& color) {
  require_same_shape(image, hull, "fill_outside");
  const std::uint8_t fill[3] = {round_channel(color.r), round_channel(color.g), round_channel(color.b)};
  RasterImage out = image;
  for (std::size_t y = 0; y < image.height(); ++y) {
    auto px = out.row(y);
    const auto m = hull.row(y);
    for (std::size_t x = 0; x < image.width(); ++x) {
      if (m[x]) continue;
      px[3 * x] = fill[0];
      px[3 * x + 1] = fill[1];
      px[3 * x + 2] = fill[2];
    }
  }
  return out;
}

std::vector<double> gaussian_kernel(double sigma, double truncation) {
  require(std::isfinite(sigma) && sigma > 0.0, "gaussian: sigma must be positive");
  require(truncation >= 1.0, "gaussian: truncation must be >= 1");
  const auto radius = static_cast<std::size_t>(std::ceil(truncation * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (std::size_t i = 0; i < kernel.size(); ++i) {
    const double d = static_cast<double>(i) - static_cast<double>(radius);
    kernel[i] = std::exp(-0.5 * d * d / (sigma * sigma));
    total += kernel[i];
  }
  for (double& k : kernel) k /= total;
  return kernel;
}

GrayMap gaussian_background(const GrayMap& map, double sigma, double truncation) {
  const auto kernel = gaussian_kernel(sigma, truncation);
  GrayMap tmp(map.width(), map.height());
  GrayMap out(map.width(), map.height());
  blur_rows(map.data(), tmp.data(), map.width(), map.height(), kernel);
  blur_cols(tmp.data(), out.data(), map.width(), map.height(), kernel);
  return out;
}

std::array<GrayMap, 3> gaussian_background(const RasterImage& image, double sigma, double truncation) {
  const auto kernel = gaussian_kernel(sigma, truncation);
  const std::size_t w = image.width();
  const std::size_t h = image.height();
  std::array<GrayMap, 3> planes{GrayMap(w, h), GrayMap(w, h), GrayMap(w, h)};
  GrayMap tmp(w, h);
  for (std::size_t c = 0; c < 3; ++c) {
    blur_rows_rgb(image.data(), c, tmp.data(), w, h, kernel);
    blur_cols(tmp.data(), planes[c].data(), w, h, kernel);
  }
  return planes;
}

RasterImage contrast_enhance(const RasterImage& image, const FovMask& fov, const EnhanceParams& params) {
  params.validate();
  require_same_shape(image, fov, "contrast_enhance");

  const FovMask hull = fov::convex_hull_mask(fov);
  const RasterImage work = fill_outside(image, hull, mean_rgb_within(image, hull));
  const double sigma = static_cast<double>(image.width()) / params.sigma_divisor;
  const auto background = gaussian_background(work, sigma, params.kernel_truncation);

  RasterImage out(image.width(), image.height());
  compose(work.data(), background, fov.data(), params, out.data());
  return out;
}

}  // namespace fpe::enhance

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

#include "fpe/imaging.hpp"

// Field-of-view estimation: channel sum -> Otsu threshold -> hole filling,
// plus the derived bounding box and convex hull.
namespace fpe::fov {

// Channel sums span 0..765.
inline constexpr std::size_t kSumBins = 766;

using SumHistogram = std::array<std::uint64_t, kSumBins>;

struct OtsuResult {
  // Foreground is every value strictly greater than the threshold.
  std::size_t threshold{0};
  double between_class_variance{0.0};
};

imaging::ChannelSumMap channel_sum_map(const imaging::RasterImage& image);
SumHistogram histogram(const imaging::ChannelSumMap& sums);

// Maximizes w0*w1*(mu0-mu1)^2 over thresholds; the lowest maximizer wins.
// Throws DegenerateHistogram when all mass sits in one bin.
OtsuResult otsu_threshold(std::span<const std::uint64_t> histogram);

imaging::FovMask threshold_above(const imaging::ChannelSumMap& sums, std::size_t threshold);

// Background connected (4-neighbourhood) to the border stays background;
// every other background pixel becomes foreground.
imaging::FovMask fill_holes(const imaging::FovMask& mask);

imaging::FovMask estimate_fov(const imaging::RasterImage& image);

imaging::BBox bounding_box(const imaging::FovMask& mask);

// Rasterized convex hull of the foreground pixel centres. A pixel is set when
// its centre satisfies every hull half-plane, evaluated in exact integer
// arithmetic. Degenerate (collinear) hulls are drawn as a DDA line.
imaging::FovMask convex_hull_mask(const imaging::FovMask& mask);

}  // namespace fpe::fov

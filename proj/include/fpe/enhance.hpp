#pragma once

#include <array>

#include "fpe/imaging.hpp"

namespace fpe::enhance {

// out = alpha * I - beta * (G_sigma * I) + gamma, with sigma = width / sigma_divisor.
struct EnhanceParams {
  double alpha{4.0};
  double beta{4.0};
  double gamma{128.0};
  double sigma_divisor{90.0};
  // Kernel radius in units of sigma.
  double kernel_truncation{3.0};

  void validate() const;
};

struct MeanRgb {
  double r{0.0};
  double g{0.0};
  double b{0.0};
};

MeanRgb mean_rgb_within(const imaging::RasterImage& image, const imaging::FovMask& region);

// Pixels outside `hull` get `color`, rounded half away from zero.
imaging::RasterImage fill_outside(const imaging::RasterImage& image, const imaging::FovMask& hull, const MeanRgb& color);

// Normalized 1-D kernel of radius ceil(truncation * sigma).
std::vector<double> gaussian_kernel(double sigma, double truncation);

// Separable Gaussian blur with edge replication.
imaging::GrayMap gaussian_background(const imaging::GrayMap& map, double sigma, double truncation = 3.0);
std::array<imaging::GrayMap, 3> gaussian_background(const imaging::RasterImage& image, double sigma,
                                                    double truncation = 3.0);

imaging::RasterImage contrast_enhance(const imaging::RasterImage& image, const imaging::FovMask& fov,
                                      const EnhanceParams& params = {});

}  // namespace fpe::enhance

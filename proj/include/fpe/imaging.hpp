#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fpe::imaging {

struct Rgb {
  std::uint8_t r{0};
  std::uint8_t g{0};
  std::uint8_t b{0};

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Row-major grid of scalars. Shared carrier for channel sums, blurred
// backgrounds and masks.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t width, std::size_t height, T fill = T{})
      : width_(width), height_(height), data_(checked_area(width, height), fill) {}
  Grid(std::size_t width, std::size_t height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != checked_area(width, height))
      throw std::invalid_argument("grid data length does not match dimensions");
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }

  const T& at(std::size_t x, std::size_t y) const { return data_[index(x, y)]; }
  T& at(std::size_t x, std::size_t y) { return data_[index(x, y)]; }

  std::span<const T> row(std::size_t y) const {
    check_row(y);
    return {data_.data() + y * width_, width_};
  }
  std::span<T> row(std::size_t y) {
    check_row(y);
    return {data_.data() + y * width_, width_};
  }

  std::span<const T> data() const noexcept { return data_; }
  std::span<T> data() noexcept { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static std::size_t checked_area(std::size_t width, std::size_t height) {
    if (width == 0 || height == 0) throw std::invalid_argument("grid dimensions must be positive");
    return width * height;
  }
  void check_row(std::size_t y) const {
    if (y >= height_) throw std::out_of_range("grid row out of range");
  }
  std::size_t index(std::size_t x, std::size_t y) const {
    if (x >= width_ || y >= height_) throw std::out_of_range("grid coordinate out of range");
    return y * width_ + x;
  }

  std::size_t width_{0};
  std::size_t height_{0};
  std::vector<T> data_;
};

using GrayMap = Grid<double>;
using ChannelSumMap = Grid<std::uint16_t>;

// Binary field-of-view mask; 1 = inside. Stored as bytes so rows can be
// scanned without std::vector<bool> proxies.
class FovMask : public Grid<std::uint8_t> {
 public:
  FovMask() = default;
  FovMask(std::size_t width, std::size_t height, bool fill = false)
      : Grid<std::uint8_t>(width, height, fill ? 1 : 0) {}

  bool test(std::size_t x, std::size_t y) const { return at(x, y) != 0; }
  void set(std::size_t x, std::size_t y, bool value = true) { at(x, y) = value ? 1 : 0; }
  std::size_t count() const noexcept;
  bool empty_foreground() const noexcept {
    return std::none_of(data().begin(), data().end(), [](std::uint8_t v) { return v != 0; });
  }
};

// Inclusive pixel rectangle.
struct BBox {
  std::size_t row_min{0};
  std::size_t row_max{0};
  std::size_t col_min{0};
  std::size_t col_max{0};

  std::size_t width() const noexcept { return col_max - col_min + 1; }
  std::size_t height() const noexcept { return row_max - row_min + 1; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

// 8-bit interleaved RGB image.
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(std::size_t width, std::size_t height, Rgb fill = {});
  RasterImage(std::size_t width, std::size_t height, std::vector<std::uint8_t> rgb);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  static constexpr std::size_t channels() noexcept { return 3; }

  Rgb pixel(std::size_t x, std::size_t y) const;
  void set_pixel(std::size_t x, std::size_t y, Rgb value);
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t channel) const;

  std::span<const std::uint8_t> row(std::size_t y) const;
  std::span<std::uint8_t> row(std::size_t y);
  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::span<std::uint8_t> data() noexcept { return data_; }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  std::size_t offset(std::size_t x, std::size_t y) const;

  std::size_t width_{0};
  std::size_t height_{0};
  std::vector<std::uint8_t> data_;
};

// PNG or JPEG; grayscale sources come back with R = G = B.
RasterImage load_image(const std::filesystem::path& path);
RasterImage decode_image(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const RasterImage& image);
// Lossless PNG; the file is written under a temporary name and renamed.
void save_image(const RasterImage& image, const std::filesystem::path& path);

// Debug export of a mask as a 1-bit PNG (foreground white).
void save_mask_png(const FovMask& mask, const std::filesystem::path& path);
FovMask load_mask_png(const std::filesystem::path& path);

// Writes bytes to `path` atomically (temporary sibling + rename).
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace fpe::imaging

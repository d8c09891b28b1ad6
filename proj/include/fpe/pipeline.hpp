#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fpe/cohort.hpp"
#include "fpe/enhance.hpp"
#include "fpe/error.hpp"
#include "fpe/imaging.hpp"

namespace fpe::pipeline {

enum class EnhanceStage { AfterResize, BeforeResize };

std::string to_string(EnhanceStage stage);

struct PreprocessConfig {
  std::size_t target_size{512};
  enhance::EnhanceParams enhance;
  EnhanceStage enhance_stage{EnhanceStage::AfterResize};
  bool square_pad{true};
  bool emit_png{true};
  bool emit_tensor{false};
  std::size_t workers{1};

  void validate() const;
};

// Channel-major float tensor with values in [-1, 1].
struct TensorRecord {
  std::string image_id;
  std::size_t channels{3};
  std::size_t height{0};
  std::size_t width{0};
  std::vector<float> values;
};

// `.t32` layout: "FPT1", u32 LE channels, height, width, then f32 LE values.
std::vector<std::uint8_t> encode_tensor(const TensorRecord& tensor);
TensorRecord decode_tensor(std::span<const std::uint8_t> bytes, std::string image_id = {});
void write_tensor(const TensorRecord& tensor, const std::filesystem::path& path);
TensorRecord read_tensor(const std::filesystem::path& path);

// Sub-image spanning `bbox`. With square_pad the shorter side is padded with
// black, split evenly; an odd remainder goes to the bottom/right.
imaging::RasterImage crop_to_fov(const imaging::RasterImage& image, const imaging::BBox& bbox, bool square_pad);
imaging::FovMask crop_mask(const imaging::FovMask& mask, const imaging::BBox& bbox, bool square_pad);

// Bilinear resampling with pixel-centre alignment.
imaging::RasterImage resize(const imaging::RasterImage& image, std::size_t width, std::size_t height);
inline imaging::RasterImage resize(const imaging::RasterImage& image, std::size_t target) {
  return resize(image, target, target);
}
// Bilinear weights on the 0/1 mask, kept where the interpolated value >= 0.5.
imaging::FovMask resize_mask(const imaging::FovMask& mask, std::size_t width, std::size_t height);

// pixel / 127.5 - 1, channel-major.
TensorRecord normalize(const imaging::RasterImage& image, std::string image_id = {});

struct PreprocessResult {
  imaging::RasterImage image;
  std::optional<TensorRecord> tensor;
};

PreprocessResult preprocess_image(const imaging::RasterImage& image, const PreprocessConfig& config,
                                  const std::string& image_id = {});

// Loads record.path (relative paths resolve against base_dir) and runs the
// full chain. Throws fpe::Error on any failure.
PreprocessResult preprocess_one(const cohort::ManifestRecord& record, const PreprocessConfig& config,
                                const std::filesystem::path& base_dir = {});

struct BatchFailure {
  std::string image_id;
  ErrorKind kind{ErrorKind::Io};
  std::string message;
};

struct BatchOutput {
  std::string image_id;
  std::string png_sha256;
  std::string tensor_sha256;
};

struct BatchReport {
  std::size_t processed{0};
  std::vector<BatchFailure> failed;
  std::vector<BatchOutput> outputs;  // manifest order
  double wall_time{0.0};
  double per_image_mean{0.0};
  double per_image_sd{0.0};
};

// Processes every record with config.workers threads and writes
// <out_dir>/png/<id>.png, <out_dir>/tensor/<id>.t32 and <out_dir>/report.json.
// Per-record failures are collected; an unusable out_dir throws.
BatchReport run_batch(std::span<const cohort::ManifestRecord> manifest, const PreprocessConfig& config,
                      const std::filesystem::path& out_dir, const std::filesystem::path& base_dir = {});

std::string batch_report_json(const BatchReport& report, const PreprocessConfig& config);

std::string sha256_hex(std::span<const std::uint8_t> bytes);

}  // namespace fpe::pipeline

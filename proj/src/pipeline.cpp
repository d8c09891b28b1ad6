#include "fpe/pipeline.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

#include <openssl/evp.h>

#include <json.hpp>

#include "fpe/fov.hpp"
#include "vector_clones.hpp"

namespace fpe::pipeline {

using imaging::BBox;
using imaging::FovMask;
using imaging::RasterImage;

namespace {

struct Padding {
  std::size_t width;
  std::size_t height;
  std::size_t top;
  std::size_t left;
};

Padding padding_for(const BBox& bbox, bool square_pad) {
  const std::size_t w = bbox.width();
  const std::size_t h = bbox.height();
  if (!square_pad || w == h) return {w, h, 0, 0};
  const std::size_t side = std::max(w, h);
  return {side, side, (side - h) / 2, (side - w) / 2};
}

void check_bbox(const BBox& bbox, std::size_t width, std::size_t height) {
  require(bbox.row_min <= bbox.row_max && bbox.row_max < height && bbox.col_min <= bbox.col_max &&
              bbox.col_max < width,
          "bounding box outside image");
}

// Source coordinate for destination index under pixel-centre alignment.
struct Tap {
  std::size_t lo;
  std::size_t hi;
  double frac;
};

std::vector<Tap> taps(std::size_t src, std::size_t dst) {
  std::vector<Tap> out(dst);
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  for (std::size_t i = 0; i < dst; ++i) {
    double s = (static_cast<double>(i) + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const auto lo = static_cast<std::size_t>(std::floor(s));
    out[i] = {lo, std::min(lo + 1, src - 1), s - static_cast<double>(lo)};
  }
  return out;
}

// Half away from zero for the non-negative values bilinear blending yields.
std::uint8_t round_blend(double v) {
  const double whole = std::floor(v);
  return static_cast<std::uint8_t>(whole + (v - whole >= 0.5 ? 1.0 : 0.0));
}

bool safe_file_stem(const std::string& id) {
  return !id.empty() && id != "." && id != ".." && id.find_first_of("/\\") == std::string::npos &&
         id.find('\0') == std::string::npos;
}

}  // namespace

std::string to_string(EnhanceStage stage) {
  return stage == EnhanceStage::AfterResize ? "after_resize" : "before_resize";
}

void PreprocessConfig::validate() const {
  require(target_size >= 32, "target_size must be >= 32");
  require(workers >= 1, "workers must be >= 1");
  enhance.validate();
}

RasterImage crop_to_fov(const RasterImage& image, const BBox& bbox, bool square_pad) {
  check_bbox(bbox, image.width(), image.height());
  const Padding pad = padding_for(bbox, square_pad);
  RasterImage out(pad.width, pad.height);
  const std::size_t bytes = bbox.width() * 3;
  for (std::size_t y = 0; y < bbox.height(); ++y) {
    const auto src = image.row(bbox.row_min + y).subspan(bbox.col_min * 3, bytes);
    auto dst = out.row(pad.top + y).subspan(pad.left * 3, bytes);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return out;
}

FovMask crop_mask(const FovMask& mask, const BBox& bbox, bool square_pad) {
  check_bbox(bbox, mask.width(), mask.height());
  const Padding pad = padding_for(bbox, square_pad);
  FovMask out(pad.width, pad.height);
  for (std::size_t y = 0; y < bbox.height(); ++y) {
    const auto src = mask.row(bbox.row_min + y).subspan(bbox.col_min, bbox.width());
    auto dst = out.row(pad.top + y).subspan(pad.left, bbox.width());
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return out;
}

FPE_VECTOR_CLONES RasterImage resize(const RasterImage& image, std::size_t width, std::size_t height) {
  require(width >= 1 && height >= 1, "resize target must be positive");
  if (width == image.width() && height == image.height()) return image;
  const auto xs = taps(image.width(), width);
  const auto ys = taps(image.height(), height);
  RasterImage out(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    const auto r0 = image.row(ys[y].lo);
    const auto r1 = image.row(ys[y].hi);
    const double fy = ys[y].frac;
    auto dst = out.row(y);
    for (std::size_t x = 0; x < width; ++x) {
      const Tap& t = xs[x];
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = (1.0 - t.frac) * r0[3 * t.lo + c] + t.frac * r0[3 * t.hi + c];
        const double bottom = (1.0 - t.frac) * r1[3 * t.lo + c] + t.frac * r1[3 * t.hi + c];
        dst[3 * x + c] = round_blend((1.0 - fy) * top + fy * bottom);
      }
    }
  }
  return out;
}

FovMask resize_mask(const FovMask& mask, std::size_t width, std::size_t height) {
  require(width >= 1 && height >= 1, "resize target must be positive");
  if (width == mask.width() && height == mask.height()) return mask;
  const auto xs = taps(mask.width(), width);
  const auto ys = taps(mask.height(), height);
  FovMask out(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    const auto r0 = mask.row(ys[y].lo);
    const auto r1 = mask.row(ys[y].hi);
    const double fy = ys[y].frac;
    auto dst = out.row(y);
    for (std::size_t x = 0; x < width; ++x) {
      const Tap& t = xs[x];
      const double top = (1.0 - t.frac) * r0[t.lo] + t.frac * r0[t.hi];
      const double bottom = (1.0 - t.frac) * r1[t.lo] + t.frac * r1[t.hi];
      dst[x] = (1.0 - fy) * top + fy * bottom >= 0.5 ? 1 : 0;
    }
  }
  return out;
}

TensorRecord normalize(const RasterImage& image, std::string image_id) {
  TensorRecord t;
  t.image_id = std::move(image_id);
  t.height = image.height();
  t.width = image.width();
  const std::size_t plane = t.height * t.width;
  t.values.resize(3 * plane);
  // 256-entry table of the exact per-value result
  std::array<float, 256> table{};
  for (std::size_t v = 0; v < table.size(); ++v) table[v] = static_cast<float>(static_cast<double>(v) / 127.5 - 1.0);
  const auto src = image.data();
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) t.values[c * plane + i] = table[src[3 * i + c]];
  }
  return t;
}

PreprocessResult preprocess_image(const RasterImage& image, const PreprocessConfig& config,
                                  const std::string& image_id) {
  config.validate();
  const FovMask fov = fov::estimate_fov(image);
  const BBox box = fov::bounding_box(fov);
  const RasterImage cropped = crop_to_fov(image, box, config.square_pad);
  const FovMask cropped_fov = crop_mask(fov, box, config.square_pad);
  const std::size_t side = config.target_size;

  PreprocessResult result;
  if (config.enhance_stage == EnhanceStage::AfterResize) {
    const RasterImage resized = resize(cropped, side);
    FovMask resized_fov = resize_mask(cropped_fov, side, side);
    if (resized_fov.empty_foreground()) fail(ErrorKind::FovEstimation, "field of view vanished after resize");
    result.image = enhance::contrast_enhance(resized, resized_fov, config.enhance);
  } else {
    result.image = resize(enhance::contrast_enhance(cropped, cropped_fov, config.enhance), side);
  }
  if (config.emit_tensor) result.tensor = normalize(result.image, image_id);
  return result;
}

PreprocessResult preprocess_one(const cohort::ManifestRecord& record, const PreprocessConfig& config,
                                const std::filesystem::path& base_dir) {
  std::filesystem::path path = record.path;
  if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
  return preprocess_image(imaging::load_image(path), config, record.image_id);
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorKind::Io, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

BatchReport run_batch(std::span<const cohort::ManifestRecord> manifest, const PreprocessConfig& config,
                      const std::filesystem::path& out_dir, const std::filesystem::path& base_dir) {
  config.validate();
  const auto png_dir = out_dir / "png";
  const auto tensor_dir = out_dir / "tensor";
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (!ec && config.emit_png) std::filesystem::create_directories(png_dir, ec);
  if (!ec && config.emit_tensor) std::filesystem::create_directories(tensor_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    fail(ErrorKind::Io, "cannot create output directory " + out_dir.string());
  }

  struct Slot {
    bool ok{false};
    BatchOutput output;
    BatchFailure failure;
    double seconds{0.0};
  };
  std::vector<Slot> slots(manifest.size());
  std::atomic<std::size_t> next{0};
  using Clock = std::chrono::steady_clock;

  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < manifest.size(); i = next.fetch_add(1)) {
      const auto& record = manifest[i];
      Slot& slot = slots[i];
      const auto start = Clock::now();
      try {
        if (!safe_file_stem(record.image_id)) {
          fail(ErrorKind::Contract, "image_id is not usable as a file name: '" + record.image_id + "'");
        }
        const PreprocessResult result = preprocess_one(record, config, base_dir);
        slot.output.image_id = record.image_id;
        if (config.emit_png) {
          const auto bytes = imaging::encode_png(result.image);
          imaging::write_file_atomic(png_dir / (record.image_id + ".png"), bytes);
          slot.output.png_sha256 = sha256_hex(bytes);
        }
        if (result.tensor) {
          const auto bytes = encode_tensor(*result.tensor);
          imaging::write_file_atomic(tensor_dir / (record.image_id + ".t32"), bytes);
          slot.output.tensor_sha256 = sha256_hex(bytes);
        }
        slot.ok = true;
      } catch (const Error& e) {
        slot.failure = {record.image_id, e.kind(), e.what()};
      } catch (const std::exception& e) {
        slot.failure = {record.image_id, ErrorKind::Contract, e.what()};
      }
      slot.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    }
  };

  const auto wall_start = Clock::now();
  const std::size_t workers = std::max<std::size_t>(1, std::min(config.workers, manifest.size()));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  BatchReport report;
  report.wall_time = std::chrono::duration<double>(Clock::now() - wall_start).count();
  double sum = 0.0;
  for (auto& slot : slots) {
    sum += slot.seconds;
    if (slot.ok) {
      ++report.processed;
      report.outputs.push_back(std::move(slot.output));
    } else {
      report.failed.push_back(std::move(slot.failure));
    }
  }
  if (!slots.empty()) {
    report.per_image_mean = sum / static_cast<double>(slots.size());
    if (slots.size() > 1) {
      double ss = 0.0;
      for (const auto& slot : slots) ss += (slot.seconds - report.per_image_mean) * (slot.seconds - report.per_image_mean);
      report.per_image_sd = std::sqrt(ss / static_cast<double>(slots.size() - 1));
    }
  }

  const std::string json = batch_report_json(report, config);
  imaging::write_file_atomic(out_dir / "report.json",
                             std::span(reinterpret_cast<const std::uint8_t*>(json.data()), json.size()));
  return report;
}

std::string batch_report_json(const BatchReport& report, const PreprocessConfig& config) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["tool"] = {{"name", "fpe"}, {"version", FPE_VERSION}};
  j["config"] = {
      {"target_size", config.target_size},
      {"enhance_stage", to_string(config.enhance_stage)},
      {"square_pad", config.square_pad},
      {"emit_png", config.emit_png},
      {"emit_tensor", config.emit_tensor},
      {"workers", config.workers},
      {"enhance",
       {{"alpha", config.enhance.alpha},
        {"beta", config.enhance.beta},
        {"gamma", config.enhance.gamma},
        {"sigma_divisor", config.enhance.sigma_divisor},
        {"kernel_truncation", config.enhance.kernel_truncation}}},
  };
  j["processed"] = report.processed;
  ordered_json failed = ordered_json::array();
  for (const auto& f : report.failed) {
    failed.push_back({{"image_id", f.image_id}, {"error", std::string(to_string(f.kind))}, {"message", f.message}});
  }
  j["failed"] = std::move(failed);
  j["wall_time_s"] = report.wall_time;
  j["per_image_time_s"] = {{"mean", report.per_image_mean}, {"sd", report.per_image_sd}};
  ordered_json outputs = ordered_json::array();
  for (const auto& o : report.outputs) {
    ordered_json entry = {{"image_id", o.image_id}};
    if (!o.png_sha256.empty()) entry["png_sha256"] = o.png_sha256;
    if (!o.tensor_sha256.empty()) entry["tensor_sha256"] = o.tensor_sha256;
    outputs.push_back(std::move(entry));
  }
  j["outputs"] = std::move(outputs);
  return j.dump(2) + "\n";
}

}  // namespace fpe::pipeline

#include <fstream>
#include <random>

#include <gtest/gtest.h>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "fpe/error.hpp"
#include "fpe/imaging.hpp"
#include "support/synthetic.hpp"

namespace fpe::imaging {
namespace {

using fpe::testing::TempDir;

TEST(RasterImage, ValidatesDimensions) {
  EXPECT_THROW(RasterImage(0, 4), std::invalid_argument);
  EXPECT_THROW(RasterImage(2, 2, std::vector<std::uint8_t>(11)), std::invalid_argument);
  const RasterImage img(3, 2, Rgb{1, 2, 3});
  EXPECT_EQ(img.data().size(), 18u);
  EXPECT_EQ(img.pixel(2, 1), (Rgb{1, 2, 3}));
}

TEST(RasterImage, AccessIsBoundsChecked) {
  RasterImage img(4, 4);
  EXPECT_THROW(img.pixel(4, 0), std::out_of_range);
  EXPECT_THROW(img.set_pixel(0, 4, {}), std::out_of_range);
  EXPECT_THROW((void)img.at(0, 0, 3), std::out_of_range);
  EXPECT_THROW((void)img.row(4), std::out_of_range);
  FovMask m(2, 2);
  EXPECT_THROW((void)m.test(2, 0), std::out_of_range);
}

TEST(ImageIo, PngRoundTripIsLossless) {
  TempDir dir("imaging");
  std::mt19937_64 rng(7);
  for (const auto [w, h] : {std::pair<std::size_t, std::size_t>{64, 64}, {1, 1}, {100, 80}}) {
    const RasterImage img = fpe::testing::random_image(w, h, rng);
    const auto path = dir / ("img_" + std::to_string(w) + "x" + std::to_string(h) + ".png");
    save_image(img, path);
    const RasterImage back = load_image(path);
    EXPECT_EQ(back.width(), w);
    EXPECT_EQ(back.height(), h);
    EXPECT_EQ(back, img);
  }
}

TEST(ImageIo, GrayscaleJpegExpandsToThreeEqualChannels) {
  TempDir dir("imaging");
  cv::Mat gray(24, 32, CV_8UC1);
  for (int y = 0; y < gray.rows; ++y)
    for (int x = 0; x < gray.cols; ++x) gray.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(4 * x + y);
  const auto path = dir / "gray.jpg";
  ASSERT_TRUE(cv::imwrite(path.string(), gray));

  const RasterImage img = load_image(path);
  EXPECT_EQ(img.width(), 32u);
  EXPECT_EQ(img.height(), 24u);
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x) {
      const Rgb p = img.pixel(x, y);
      ASSERT_EQ(p.r, p.g);
      ASSERT_EQ(p.g, p.b);
    }
}

TEST(ImageIo, TruncatedFilesAreFormatErrors) {
  TempDir dir("imaging");
  std::mt19937_64 rng(1);
  save_image(fpe::testing::random_image(40, 40, rng), dir / "full.png");
  const auto bytes = encode_png(fpe::testing::random_image(40, 40, rng));
  {
    std::ofstream out(dir / "cut.png", std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size() / 2));
  }
  try {
    (void)load_image(dir / "cut.png");
    FAIL() << "expected a format error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Format);
  }

  cv::Mat color(16, 16, CV_8UC3, cv::Scalar(10, 20, 30));
  std::vector<std::uint8_t> jpeg;
  cv::imencode(".jpg", color, jpeg);
  jpeg.resize(jpeg.size() - 40);
  try {
    (void)decode_image(jpeg);
    FAIL() << "expected a format error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Format);
  }

  fpe::testing::write_text(dir / "text.png", "definitely not an image");
  EXPECT_THROW((void)load_image(dir / "text.png"), Error);
}

TEST(ImageIo, MissingFileAndMissingDirectoryAreIoErrors) {
  TempDir dir("imaging");
  try {
    (void)load_image(dir / "nope.png");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
  try {
    save_image(RasterImage(2, 2), dir / "missing" / "x.png");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}

TEST(ImageIo, MaskExportsAsBilevelPng) {
  TempDir dir("imaging");
  const FovMask mask = fpe::testing::disc_mask(33, 21, 16, 10, 8);
  save_mask_png(mask, dir / "mask.png");
  const cv::Mat raw = cv::imread((dir / "mask.png").string(), cv::IMREAD_UNCHANGED);
  ASSERT_FALSE(raw.empty());
  EXPECT_EQ(raw.channels(), 1);
  EXPECT_EQ(load_mask_png(dir / "mask.png"), mask);
}

}  // namespace
}  // namespace fpe::imaging

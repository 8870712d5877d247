#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "edffd/error.hpp"
#include "edffd/image.hpp"
#include "edffd/image_io.hpp"
#include "edffd/synthetic.hpp"

using namespace edffd;

namespace {

ImageBuffer random_image(int w, int h, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ImageBuffer img(w, h, c);
  for (float& v : img.data()) v = u(rng);
  return img;
}

}  // namespace

TEST(Bilinear, ExactAtLatticePoints) {
  const ImageBuffer img = random_image(8, 8, 3, 1);
  const Sample s = sample_bilinear(img, 3.0, 5.0);
  EXPECT_TRUE(s.valid);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(s.value[c], img.at(3, 5, c));
}

TEST(Bilinear, OutsideCanvasIsZeroAndInvalid) {
  const ImageBuffer img(4, 4, 1, 0.7f);
  const Sample s = sample_bilinear(img, -0.5, 2.0);
  EXPECT_FALSE(s.valid);
  EXPECT_EQ(s.value[0], 0.0f);
}

TEST(Bilinear, LinearBetweenPixels) {
  const ImageBuffer img(2, 1, 1, std::vector<float>{0.0f, 1.0f});
  bool valid = false;
  EXPECT_NEAR(sample_bilinear(img, 0.25, 0.0, 0, &valid), 0.25, 1e-7);
  EXPECT_TRUE(valid);
}

TEST(Bilinear, LinearAlongEachAxis) {
  const ImageBuffer img = random_image(6, 6, 1, 2);
  for (double t : {0.1, 0.5, 0.9}) {
    const double expect = (1 - t) * img.at(2, 3) + t * img.at(3, 3);
    EXPECT_NEAR(sample_bilinear(img, 2.0 + t, 3.0, 0, nullptr), expect, 1e-6);
  }
}

TEST(Pyramid, HalvesEachLevel) {
  const Pyramid p = build_pyramid(ImageBuffer(256, 256, 1, 0.5f), 3);
  ASSERT_EQ(p.levels.size(), 3u);
  EXPECT_EQ(p.levels[1].width(), 128);
  EXPECT_EQ(p.levels[2].height(), 64);
}

TEST(Pyramid, ConstantImageStaysConstant) {
  const Pyramid p = build_pyramid(ImageBuffer(64, 48, 3, 0.3f), 3);
  for (const auto& level : p.levels)
    for (float v : level.data()) EXPECT_EQ(v, 0.3f);
}

TEST(Pyramid, TooCoarse) {
  try {
    build_pyramid(ImageBuffer(8, 8, 1), 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooCoarse);
  }
}

TEST(Psnr, IdenticalIsInfinite) {
  const ImageBuffer a = random_image(16, 16, 3, 3);
  EXPECT_TRUE(std::isinf(psnr_masked(a, a, Mask(16, 16))));
}

TEST(Psnr, ClosedForm) {
  const double p = psnr_masked(ImageBuffer(8, 8, 1, 0.0f), ImageBuffer(8, 8, 1, 0.5f), Mask(8, 8));
  EXPECT_NEAR(p, 10.0 * std::log10(4.0), 1e-9);
}

TEST(Psnr, HalfMaskMatchesPixelList) {
  const ImageBuffer a = random_image(20, 10, 3, 4), b = random_image(20, 10, 3, 5);
  Mask m(20, 10, 0.0f);
  double se = 0.0;
  int n = 0;
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) {
      m.at(x, y) = 1.0f;
      for (int c = 0; c < 3; ++c, ++n) se += std::pow(double(a.at(x, y, c)) - b.at(x, y, c), 2);
    }
  const double oracle = 10.0 * std::log10(1.0 / (se / n));
  EXPECT_NEAR(psnr_masked(a, b, m), oracle, 1e-9);
  EXPECT_DOUBLE_EQ(psnr_masked(a, b, m), psnr_masked(b, a, m));
}

TEST(Psnr, EmptyMaskThrows) {
  const ImageBuffer a(4, 4, 1);
  try {
    psnr_masked(a, a, Mask(4, 4, 0.0f));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyMask);
  }
}

TEST(Luminance, Weights) {
  ImageBuffer rgb(1, 1, 3);
  rgb.at(0, 0, 0) = 1.0f;
  rgb.at(0, 0, 1) = 0.5f;
  rgb.at(0, 0, 2) = 0.25f;
  EXPECT_NEAR(to_luminance(rgb).at(0, 0), 0.299 + 0.587 * 0.5 + 0.114 * 0.25, 1e-6);
}

TEST(ImageIo, PngRoundTripIsExactAt8Bits) {
  const auto dir = std::filesystem::temp_directory_path() / "edffd_image_io";
  std::filesystem::create_directories(dir);
  ImageBuffer img(7, 5, 3);
  int k = 0;
  for (float& v : img.data()) v = static_cast<float>((k++ * 37) % 256) / 255.0f;
  for (const char* name : {"a.png", "a.ppm"}) {
    io::write_image(dir / name, img);
    const ImageBuffer back = io::read_image(dir / name);
    ASSERT_TRUE(back.same_shape(img));
    for (std::size_t i = 0; i < img.data().size(); ++i) EXPECT_EQ(back.data()[i], img.data()[i]);
  }
}

TEST(ImageIo, LoadedValuesAreInUnitRange) {
  const auto dir = std::filesystem::temp_directory_path() / "edffd_image_io";
  std::filesystem::create_directories(dir);
  io::write_image(dir / "t.png", ProceduralTexture(3).render(32, 32, 1));
  const ImageBuffer loaded = io::read_image(dir / "t.png");
  for (float v : loaded.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(ImageIo, MissingFileIsIoError) {
  try {
    io::read_image("/nonexistent/file.png");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

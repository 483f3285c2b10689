#include <gtest/gtest.h>

#include <random>

#include "mldetect/image.hpp"
#include "support.hpp"

using namespace mldetect;

// Reference values from scikit-image's rgb2lab (D65, 2-degree observer).
struct LabReference {
  double r, g, b, L, a, bb;
};

TEST(Lab, MatchesReferenceColorimetry) {
  const LabReference refs[] = {
      {0.5, 0.5, 0.5, 53.3889647, -0.00146849652, 0.00278358687},
      {1.0, 0.0, 0.0, 53.24058794, 80.09230823, 67.20275104},
      {0.2, 0.4, 0.8, 45.03116962, 18.70808505, -57.84931969},
      {0.0, 1.0, 0.0, 87.73509949, -86.18302974, 83.17970318},
  };
  for (const auto& r : refs) {
    const LabColor c = rgb_to_lab(r.r, r.g, r.b);
    EXPECT_NEAR(c.L, r.L, 1e-4);
    EXPECT_NEAR(c.a, r.a, 1e-4);
    EXPECT_NEAR(c.b, r.bb, 1e-4);
  }
}

TEST(Lab, NeutralAxisEndpoints) {
  const LabColor black = rgb_to_lab(0, 0, 0);
  EXPECT_NEAR(black.L, 0.0, 1e-9);
  EXPECT_NEAR(black.a, 0.0, 1e-6);
  EXPECT_NEAR(black.b, 0.0, 1e-6);
  EXPECT_NEAR(rescale_ab(black.a), 128.0 / 255.0, 1e-6);
  const LabColor white = rgb_to_lab(1, 1, 1);
  EXPECT_NEAR(white.L, 100.0, 1e-6);
  // The rounded sRGB matrix does not map white exactly onto D65, leaving a
  // residual chroma of a few thousandths (the reference library agrees).
  EXPECT_NEAR(white.a, 0.0, 1e-2);
  EXPECT_NEAR(white.b, 0.0, 1e-2);
  const LabColor gray = rgb_to_lab(0.5, 0.5, 0.5);
  EXPECT_GT(gray.L, 0.0);
  EXPECT_LT(gray.L, 100.0);
}

TEST(Resize, SameSizeIsACopy) {
  std::mt19937_64 rng(1);
  const RasterImage img = testing_support::random_image(17, 9, rng);
  EXPECT_EQ(resize_bilinear(img, 17, 9).data, img.data);
}

TEST(Resize, ConstantImageStaysConstant) {
  const RasterImage img(30, 20, 0.25f);
  const RasterImage r = resize_bilinear(img, 47, 13);
  for (float v : r.data) EXPECT_FLOAT_EQ(v, 0.25f);
}

TEST(Resize, CommutesWithHorizontalFlip) {
  std::mt19937_64 rng(2);
  const RasterImage img = testing_support::random_image(40, 24, rng);
  const RasterImage a = flip_horizontal(resize_bilinear(img, 29, 31));
  const RasterImage b = resize_bilinear(flip_horizontal(img), 29, 31);
  ASSERT_EQ(a.data.size(), b.data.size());
  for (std::size_t i = 0; i < a.data.size(); ++i) EXPECT_NEAR(a.data[i], b.data[i], 1e-6);
}

TEST(Crop, RoundsOutwardAndClips) {
  RasterImage img(10, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) img.at(x, y, 0) = static_cast<float>(10 * y + x);
  const RasterImage c = crop(img, {2.5, -3, 3.2, 5});
  EXPECT_EQ(c.width, 4);  // columns 2..5
  EXPECT_EQ(c.height, 2);
  EXPECT_EQ(c.at(0, 0, 0), 2.0f);
  EXPECT_EQ(c.at(3, 1, 0), 15.0f);
}

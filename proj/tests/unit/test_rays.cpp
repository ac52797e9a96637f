#include <algorithm>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "unerf/rays.hpp"

using namespace unerf;

namespace {

Camera small_camera(int size = 5) {
  Camera c;
  c.width = size;
  c.height = size;
  c.focal = 10;
  return c;
}

}  // namespace

TEST(GenerateRays, CentrePixelLooksDownTheOpticalAxis) {
  const RayBatch b = generate_rays(small_camera(), std::vector<Pixel>{{2, 2}});
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b.origins[0], (Vec3{0, 0, 0}));
  EXPECT_NEAR(b.directions[0].x, 0, 1e-15);
  EXPECT_NEAR(b.directions[0].y, 0, 1e-15);
  EXPECT_NEAR(b.directions[0].z, -1, 1e-15);
}

TEST(GenerateRays, FocalFromFieldOfView) {
  EXPECT_NEAR(focal_from_fov(800, std::numbers::pi / 2), 400.0, 1e-9);
}

TEST(GenerateRays, TranslatedCameraSharesOrigin) {
  Camera c = small_camera();
  c.cam_to_world[3] = 1.5;
  c.cam_to_world[7] = -2;
  c.cam_to_world[11] = 7;
  const RayBatch b = generate_rays(c, all_pixels(c));
  ASSERT_EQ(b.size(), 25u);
  for (std::size_t i = 0; i < b.size(); ++i) {
    EXPECT_EQ(b.origins[i], (Vec3{1.5, -2, 7}));
    EXPECT_NEAR(norm(b.directions[i]), 1.0, 1e-12);
  }
}

TEST(GenerateRays, ImageAxesFollowTheCameraConvention) {
  // +X right and +Y up: column 0 points left, row 0 points up.
  const RayBatch b = generate_rays(small_camera(), std::vector<Pixel>{{2, 0}, {0, 2}});
  EXPECT_LT(b.directions[0].x, 0);
  EXPECT_GT(b.directions[1].y, 0);
}

TEST(GenerateRays, OutOfBoundsPixelThrows) {
  EXPECT_THROW(generate_rays(small_camera(), std::vector<Pixel>{{5, 0}}), RangeError);
  EXPECT_THROW(generate_rays(small_camera(), std::vector<Pixel>{{0, -1}}), RangeError);
}

TEST(Camera, ValidateRejectsBadCameras) {
  Camera c = small_camera();
  c.cam_to_world[0] = 2;
  EXPECT_THROW(c.validate(), ContractError);
  c = small_camera();
  c.near = 6;
  c.far = 2;
  EXPECT_THROW(c.validate(), ContractError);
  c = small_camera();
  c.focal = 0;
  EXPECT_THROW(c.validate(), ContractError);
}

TEST(Stratified, MidpointsWithoutJitter) {
  const auto d = stratified_samples(0, 1, 4, false, nullptr);
  ASSERT_EQ(d.size(), 4u);
  const double want[] = {0.125, 0.375, 0.625, 0.875};
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(d[i], want[i]);
}

TEST(Stratified, JitteredSamplesStayInTheirBins) {
  Rng rng(7);
  for (int run = 0; run < 200; ++run) {
    const auto d = stratified_samples(2, 6, 16, true, &rng);
    for (std::size_t i = 0; i < 16; ++i) {
      EXPECT_GE(d[i], 2 + 0.25 * i);
      EXPECT_LE(d[i], 2 + 0.25 * (i + 1));
      if (i) EXPECT_GT(d[i], d[i - 1]);
    }
  }
}

TEST(Stratified, FixedSeedIsDeterministic) {
  Rng a(99), b(99);
  EXPECT_EQ(stratified_samples(2, 6, 32, true, &a), stratified_samples(2, 6, 32, true, &b));
}

TEST(Stratified, TooFewSamplesThrows) {
  EXPECT_THROW(stratified_samples(0, 1, 1, false, nullptr), ContractError);
}

TEST(Importance, UniformWeightsReproduceQuantiles) {
  const auto coarse = stratified_samples(0, 1, 8, false, nullptr);
  const std::vector<double> w(8, 0.3);
  const auto d = importance_samples(coarse, w, 0, 1, 10, true, nullptr);
  for (std::size_t j = 0; j < 10; ++j) EXPECT_NEAR(d[j], (j + 0.5) / 10, 1e-12);
}

TEST(Importance, OneHotWeightKeepsEverySampleInItsBin) {
  const auto coarse = stratified_samples(2, 6, 8, false, nullptr);
  std::vector<double> w(8, 0.0);
  w[5] = 1.0;
  for (bool deterministic : {true, false}) {
    Rng rng(13);
    const auto d = importance_samples(coarse, w, 2, 6, 64, deterministic, &rng);
    for (double t : d) {
      EXPECT_GE(t, 4.5);
      EXPECT_LE(t, 5.0);
    }
  }
}

TEST(Importance, ZeroWeightsFallBackToUniform) {
  const auto coarse = stratified_samples(0, 4, 4, false, nullptr);
  const auto d = importance_samples(coarse, std::vector<double>(4, 0.0), 0, 4, 4, true, nullptr);
  const double want[] = {0.5, 1.5, 2.5, 3.5};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(d[i], want[i], 1e-12);
}

TEST(Importance, HistogramMatchesThePdf) {
  Rng wr(21);
  const std::vector<double> coarse = unerf::testing::random_depths(12, wr, 2, 6);
  std::vector<double> w(12);
  for (double& x : w) x = uniform01(wr) * uniform01(wr);
  w[3] = 0;
  const auto pdf = unerf::testing::importance_pdf(coarse, w, 2, 6);

  Rng rng(5);
  const std::size_t draws = 100000;
  std::vector<std::size_t> count(12, 0);
  std::size_t made = 0;
  while (made < draws) {
    for (double t : importance_samples(coarse, w, 2, 6, 1000, false, &rng)) {
      ASSERT_GE(t, 2.0);
      ASSERT_LE(t, 6.0);
      const auto b = std::upper_bound(pdf.edges.begin() + 1, pdf.edges.end() - 1, t) - pdf.edges.begin() - 1;
      ++count[static_cast<std::size_t>(b)];
    }
    made += 1000;
  }
  for (std::size_t b = 0; b < 12; ++b) {
    EXPECT_NEAR(static_cast<double>(count[b]) / draws, pdf.prob[b], 0.02) << "bin " << b;
  }
}

TEST(Importance, SeededDrawsAreDeterministicAndSorted) {
  const auto coarse = stratified_samples(2, 6, 16, false, nullptr);
  std::vector<double> w(16);
  for (std::size_t i = 0; i < 16; ++i) w[i] = std::sin(0.4 * i) + 1.0;
  Rng a(3), b(3);
  const auto da = importance_samples(coarse, w, 2, 6, 32, false, &a);
  EXPECT_EQ(da, importance_samples(coarse, w, 2, 6, 32, false, &b));
  EXPECT_TRUE(std::is_sorted(da.begin(), da.end()));
}

TEST(Importance, NegativeWeightThrows) {
  const std::vector<double> coarse{1, 2};
  EXPECT_THROW(importance_samples(coarse, std::vector<double>{0.5, -0.1}, 0, 3, 4, true, nullptr), ContractError);
}

TEST(Encode, ZeroWithTwoFrequencies) {
  const std::vector<double> v{0.0};
  EXPECT_EQ(positional_encode(v, 2), (std::vector<double>{0, 0, 1, 0, 1}));
}

TEST(Encode, OneWithOneFrequency) {
  const auto e = positional_encode(std::vector<double>{1.0}, 1);
  ASSERT_EQ(e.size(), 3u);
  EXPECT_EQ(e[0], 1.0);
  EXPECT_NEAR(e[1], 0.0, 1e-15);
  EXPECT_NEAR(e[2], -1.0, 1e-15);
}

TEST(Encode, ComponentsAreBoundedAndLengthMatches) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(3);
    for (double& x : v) x = 20 * uniform01(rng) - 10;
    const auto e = positional_encode(v, 6);
    ASSERT_EQ(e.size(), encoded_width(3, 6));
    for (std::size_t i = 3; i < e.size(); ++i) EXPECT_LE(std::abs(e[i]), 1.0);
  }
}

TEST(Encode, InjectiveThroughTheRawChannel) {
  // sin/cos alone alias v and v + 2; the raw channel separates them.
  const auto a = positional_encode(std::vector<double>{-0.75}, 1);
  const auto b = positional_encode(std::vector<double>{0.75 + 0.5}, 1);
  EXPECT_NE(a, b);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const double x = 2 * uniform01(rng) - 1, y = 2 * uniform01(rng) - 1;
    if (x != y) EXPECT_NE(positional_encode(std::vector<double>{x}, 3), positional_encode(std::vector<double>{y}, 3));
  }
}

TEST(Encode, PointsMatchVectorEncoding) {
  const std::vector<Vec3> pts{{0.1, -0.2, 0.3}, {1, 2, 3}};
  const Tensor<double> t = encode_points<double>(pts, 3);
  ASSERT_EQ(t.shape(), (Shape{2, encoded_width(3, 3)}));
  for (std::size_t r = 0; r < 2; ++r) {
    const auto e = positional_encode(std::vector<double>{pts[r].x, pts[r].y, pts[r].z}, 3);
    for (std::size_t c = 0; c < e.size(); ++c) EXPECT_EQ(t.at(r, c), e[c]);
  }
}

TEST(Merge, Examples) {
  EXPECT_EQ(merge_depths(std::vector<double>{1, 3}, std::vector<double>{2}), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(merge_depths(std::vector<double>{}, std::vector<double>{2}), (std::vector<double>{2}));
}

TEST(Merge, RandomInputsGiveSortedMultisetUnion) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(static_cast<std::size_t>(uniform01(rng) * 10)), b(static_cast<std::size_t>(uniform01(rng) * 10));
    for (double& x : a) x = std::floor(uniform01(rng) * 8);
    for (double& x : b) x = std::floor(uniform01(rng) * 8);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const auto m = merge_depths(a, b);
    std::vector<double> want = a;
    want.insert(want.end(), b.begin(), b.end());
    std::sort(want.begin(), want.end());
    EXPECT_EQ(m, want);
  }
}

TEST(SampleSet, PositionsLieOnTheRays) {
  Camera c = small_camera(7);
  c.cam_to_world = look_at({3, 1, 2}, {0, 0, 0});
  const RayBatch rays = generate_rays(c, all_pixels(c));
  std::vector<double> depths;
  Rng rng(4);
  for (std::size_t r = 0; r < rays.size(); ++r) {
    const auto d = stratified_samples(rays.near[r], rays.far[r], 8, true, &rng);
    depths.insert(depths.end(), d.begin(), d.end());
  }
  const SampleSet s = make_sample_set(rays, depths, 8);
  for (std::size_t r = 0; r < rays.size(); ++r) {
    for (std::size_t i = 0; i < 8; ++i) {
      const Vec3 want = rays.origins[r] + s.depths[r * 8 + i] * rays.directions[r];
      EXPECT_LT(norm(s.positions[r * 8 + i] - want), 1e-9);
      if (i) EXPECT_GT(s.depths[r * 8 + i], s.depths[r * 8 + i - 1]);
    }
  }
}

TEST(SampleSet, RejectsDecreasingOrOutOfRangeDepths) {
  const RayBatch rays = generate_rays(small_camera(), std::vector<Pixel>{{0, 0}});
  EXPECT_THROW(make_sample_set(rays, {3.0, 2.5}, 2), ContractError);
  EXPECT_THROW(make_sample_set(rays, {1.0, 2.5}, 2), ContractError);
  EXPECT_THROW(make_sample_set(rays, {3.0}, 2), DimensionError);
}

TEST(Streams, DistinctKeysGiveDistinctSeeds) {
  EXPECT_NE(stream_seed(1, 0), stream_seed(1, 1));
  EXPECT_NE(stream_seed(1, 0), stream_seed(2, 0));
  EXPECT_EQ(stream_seed(5, 9), stream_seed(5, 9));
}

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "unerf/gradcheck.hpp"
#include "unerf/ops.hpp"
#include "unerf/resample.hpp"

using namespace unerf;
using unerf::testing::random_depths;
using DF = DepthedFeatures<double>;

namespace {

DF scalar_features(std::vector<double> depths, std::vector<double> values) {
  DF f;
  f.features = Tensor<double>({values.size(), 1}, values);
  f.depths = std::move(depths);
  return f;
}

// Affine features a_c + b_c * t over `depths`.
DF affine(const std::vector<double>& depths, const std::vector<double>& a, const std::vector<double>& b) {
  DF f;
  f.depths = depths;
  f.features = Tensor<double>({depths.size(), a.size()});
  for (std::size_t i = 0; i < depths.size(); ++i)
    for (std::size_t c = 0; c < a.size(); ++c) f.features.at(i, c) = a[c] + b[c] * depths[i];
  return f;
}

}  // namespace

TEST(SplitAnchors, EvenAndOddIndices) {
  const auto [a, i] = split_anchors(scalar_features({1, 2, 3, 4}, {10, 20, 30, 40}));
  EXPECT_EQ(a.depths, (std::vector<double>{1, 3}));
  EXPECT_EQ(i.depths, (std::vector<double>{2, 4}));
  EXPECT_EQ(a.features[1], 30);
  EXPECT_EQ(i.features[0], 20);
}

TEST(SplitAnchors, TwoSamples) {
  const auto [a, i] = split_anchors(scalar_features({1, 2}, {0, 0}));
  EXPECT_EQ(a.size(), 1u);
  EXPECT_EQ(i.size(), 1u);
}

TEST(SplitAnchors, PartitionsTheInput) {
  Rng rng(3);
  const auto d = random_depths(11, rng, 0, 5);
  auto [a, i] = split_anchor_depths(d);
  a.insert(a.end(), i.begin(), i.end());
  std::sort(a.begin(), a.end());
  EXPECT_EQ(a, d);
}

TEST(SplitAnchors, TooFewSamplesThrows) {
  EXPECT_THROW(split_anchor_depths(std::vector<double>{1}), ContractError);
}

TEST(PositionAware, Midpoint) {
  const Tensor<double> y = interp_position_aware(scalar_features({0, 2}, {0, 2}), std::vector<double>{1});
  EXPECT_DOUBLE_EQ(y.item(), 1);
}

TEST(PositionAware, Substitution) {
  const Tensor<double> y = interp_position_aware(scalar_features({1, 3}, {4, 8}), std::vector<double>{1.5});
  EXPECT_DOUBLE_EQ(y.item(), 5);
}

TEST(PositionAware, AnchorDepthReturnsTheAnchorExactly) {
  const DF a = scalar_features({0.1, 0.7, 1.9}, {0.3, -1.1, 2.2});
  const Tensor<double> y = interp_position_aware(a, a.depths);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(y[i], a.features[i]);
}

TEST(PositionAware, AffineFeaturesRecoveredInsideAndOutside) {
  Rng rng(42);
  double worst = 0;
  for (int set = 0; set < 200; ++set) {
    const auto d = random_depths(2 + static_cast<std::size_t>(uniform01(rng) * 8), rng, 2, 6);
    std::vector<double> a(3), b(3);
    for (double& x : a) x = 4 * uniform01(rng) - 2;
    for (double& x : b) x = 4 * uniform01(rng) - 2;
    std::vector<double> q(12);
    for (double& x : q) x = 1 + 6 * uniform01(rng);  // reaches outside [2, 6]
    const Tensor<double> y = interp_position_aware(affine(d, a, b), q);
    for (std::size_t i = 0; i < q.size(); ++i)
      for (std::size_t c = 0; c < 3; ++c) worst = std::max(worst, std::abs(y.at(i, c) - (a[c] + b[c] * q[i])));
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(PositionAware, InteriorQueriesAreConvexCombinations) {
  Rng rng(5);
  for (int set = 0; set < 100; ++set) {
    const auto d = random_depths(6, rng, 0, 1);
    DF f;
    f.depths = d;
    f.features = unerf::testing::random_tensor({6, 2}, rng);
    std::vector<double> q(10);
    for (double& x : q) x = d.front() + (d.back() - d.front()) * uniform01(rng);
    const Tensor<double> y = interp_position_aware(f, q);
    for (std::size_t i = 0; i < q.size(); ++i) {
      const std::size_t hi = static_cast<std::size_t>(std::upper_bound(d.begin(), d.end(), q[i]) - d.begin());
      const std::size_t lo = hi == 0 ? 0 : std::min(hi - 1, d.size() - 2);
      for (std::size_t c = 0; c < 2; ++c) {
        const double l = f.features.at(lo, c), h = f.features.at(lo + 1, c);
        EXPECT_GE(y.at(i, c), std::min(l, h) - 1e-15);
        EXPECT_LE(y.at(i, c), std::max(l, h) + 1e-15);
      }
    }
  }
}

TEST(PositionAware, CoincidentAnchorsReturnTheLeftFeature) {
  const InterpPlan p = plan_interpolation(Interp::PositionAware, std::vector<double>{1, 1}, std::vector<double>{1.5});
  EXPECT_EQ(p.w[0], 0.0);
  EXPECT_EQ(p.lo[0], 0u);
}

TEST(PositionAware, NeedsTwoAnchors) {
  EXPECT_THROW(interp_position_aware(scalar_features({1}, {1}), std::vector<double>{1}), ContractError);
}

TEST(PositionAware, WeightsDependOnlyOnDepths) {
  const std::vector<double> d{0.5, 1.0, 2.5, 3.0}, q{0.2, 0.7, 1.9, 3.3};
  const InterpPlan p = plan_interpolation(Interp::PositionAware, d, q);
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    DF f;
    f.depths = d;
    f.features = unerf::testing::random_tensor({4, 3}, rng);
    const Tensor<double> y = interp_position_aware(f, q);
    for (std::size_t i = 0; i < q.size(); ++i)
      for (std::size_t c = 0; c < 3; ++c) {
        const double lo = f.features.at(p.lo[i], c), hi = f.features.at(p.hi[i], c);
        EXPECT_DOUBLE_EQ(y.at(i, c), lo + (hi - lo) * p.w[i]);
      }
  }
}

TEST(PositionAware, GradientMatchesFiniteDifferences) {
  Rng rng(8);
  const auto d = random_depths(7, rng, 2, 6);
  std::vector<double> q(9);
  for (double& x : q) x = 1.5 + 5 * uniform01(rng);
  for (Interp in : {Interp::PositionAware, Interp::Nearest, Interp::Average}) {
    const auto r = gradient_check(
        [&](std::span<const Tensor<double>> x) {
          DF f;
          f.depths = d;
          f.features = x[0];
          const Tensor<double> y = interpolate(in, f, q);
          return ops::sum(ops::mul(y, y));
        },
        {unerf::testing::random_tensor({7, 2}, rng)});
    EXPECT_TRUE(r.passed()) << interp_name(in) << " " << r.max_rel_error;
  }
}

TEST(Nearest, Rules) {
  const DF a = scalar_features({1, 3}, {4, 8});
  const Tensor<double> y = interp_nearest(a, std::vector<double>{3, 1.4, 2.0, 2.6, 0, 9});
  const double want[] = {8, 4, 4, 8, 4, 8};
  for (int i = 0; i < 6; ++i) EXPECT_EQ(y[i], want[i]) << i;
}

TEST(Nearest, SingleAnchorIsEnough) {
  EXPECT_EQ(interp_nearest(scalar_features({2}, {7}), std::vector<double>{5}).item(), 7);
}

TEST(Average, IgnoresDepth) {
  const DF a = scalar_features({1, 3}, {4, 8});
  for (double q : {1.1, 2.0, 2.9}) EXPECT_EQ(interp_average(a, std::vector<double>{q}).item(), 6);
}

TEST(Average, SymmetricCaseMatchesPositionAware) {
  const DF a = scalar_features({1, 2, 3, 4}, {0.3, 5, -2, 1});
  const std::vector<double> q{1.5, 2.5, 3.5};
  const Tensor<double> avg = interp_average(a, q), pa = interp_position_aware(a, q);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(avg[i], pa[i]);
}

TEST(Average, OffMidpointAffineQueryIsInexact) {
  const DF a = affine({1, 3}, {0.5}, {2.0});
  const std::vector<double> q{1.5};
  EXPECT_GT(std::abs(interp_average(a, q).item() - (0.5 + 2.0 * 1.5)), 0.1);
  EXPECT_EQ(interp_position_aware(a, q).item(), 0.5 + 2.0 * 1.5);
}

TEST(Interleave, MergesByDepth) {
  const DF out = interleave(scalar_features({1, 3}, {10, 30}), scalar_features({2, 4}, {20, 40}));
  EXPECT_EQ(out.depths, (std::vector<double>{1, 2, 3, 4}));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(out.features[i], 10.0 * (i + 1));
}

TEST(Interleave, EmptyInterpolatedSetKeepsAnchors) {
  DF empty;
  empty.features = Tensor<double>({0, 1});
  const DF out = interleave(scalar_features({1, 3}, {10, 30}), empty);
  EXPECT_EQ(out.depths, (std::vector<double>{1, 3}));
  EXPECT_EQ(out.features[1], 30);
}

TEST(Interleave, DuplicateDepthThrows) {
  EXPECT_THROW(interleave(scalar_features({1, 3}, {0, 0}), scalar_features({3}, {0})), ContractError);
}

TEST(Interleave, SplitInterpolateInterleaveRestoresDepths) {
  Rng rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = random_depths(4 + static_cast<std::size_t>(uniform01(rng) * 12), rng, 2, 6);
    DF f;
    f.depths = d;
    f.features = unerf::testing::random_tensor({d.size(), 2}, rng);
    const auto [anchors, inter] = split_anchors(f);
    if (anchors.size() < 2) continue;
    DF rebuilt{inter.depths, interp_position_aware(anchors, inter.depths)};
    const DF out = interleave(anchors, rebuilt);
    EXPECT_EQ(out.depths, d);
  }
}

TEST(Upsample, AnchorsPassThroughAndOddSamplesInterpolate) {
  // Two rays of four samples; coarse rows are the even samples.
  const std::vector<double> depths{1, 2, 4, 5, 2, 3, 3.5, 6};
  const Tensor<double> coarse({4, 1}, {10, 40, 20, 35});
  const Tensor<double> up = upsample_rays(Interp::PositionAware, coarse, depths, 2, 4);
  ASSERT_EQ(up.shape(), (Shape{8, 1}));
  const double want[] = {10, 20, 40, 50, 20, 30, 35, 60};
  for (int i = 0; i < 8; ++i) EXPECT_DOUBLE_EQ(up[i], want[i]) << i;
}

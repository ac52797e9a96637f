#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "unerf/gradcheck.hpp"
#include "unerf/metrics.hpp"
#include "unerf/trainer.hpp"

using namespace unerf;
using unerf::testing::TempDir;
using unerf::testing::tiny_scene;
namespace fs = std::filesystem;

namespace {

// One 1x1 view looking at the origin.
Dataset single_ray_dataset(Color rgb) {
  Dataset d;
  Camera c;
  c.width = c.height = 1;
  c.focal = 1;
  c.cam_to_world = look_at({0, -4, 0}, {0, 0, 0});
  d.cameras.push_back(c);
  Image img(1, 1, 3);
  for (int k = 0; k < 3; ++k) img.pixels[k] = static_cast<float>(rgb[k]);
  d.images.push_back(img);
  d.alpha.push_back({1.0f});
  d.file_paths.push_back("r_0");
  return d;
}

TrainConfig tiny_config(const fs::path& data, std::size_t iterations = 20) {
  TrainConfig c;
  c.network.width = 16;
  c.rays = 32;
  c.n_coarse = 16;
  c.n_fine = 16;
  c.iterations = iterations;
  c.eval_every = 0;
  c.eval_views = 1;
  c.data_dir = data.string();
  return c;
}

bool same(const Tensor<float>& a, const Tensor<float>& b) {
  return a.shape() == b.shape() && std::ranges::equal(a.values(), b.values());
}

Image constant_image(int w, int h, float v) {
  Image img(w, h, 3);
  for (float& p : img.pixels) p = v;
  return img;
}

// Frozen values from an independent scikit-image run on metric_pair(seed).
const double kReferenceMetrics[10][2] = {
    {24.73333546417393, 0.9412576740229534},  {24.811960628454727, 0.9545806941397359},
    {24.644763294410836, 0.9549475284548053}, {24.74283524177086, 0.9382068758019528},
    {24.741544107752375, 0.9516752419151779}, {24.892213572698974, 0.9389150911947496},
    {24.68446321763637, 0.9534909897806874},  {24.864704537350583, 0.9596369180462726},
    {24.676354098384333, 0.9540096333761126}, {24.66371482106361, 0.9532976281485421}};

}  // namespace

TEST(PhotometricLoss, ExactOutputsGiveZero) {
  const Tensor<double> t({2, 3}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
  EXPECT_EQ(photometric_loss(t, t, t).item(), 0.0);
}

TEST(PhotometricLoss, FineOffByATenth) {
  const Tensor<double> t({2, 3}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
  Tensor<double> f = t.clone();
  for (double& v : f.values()) v += 0.1;
  EXPECT_NEAR(photometric_loss(t, f, t).item(), 0.01, 1e-15);
}

TEST(PhotometricLoss, ShapeMismatchThrows) {
  const Tensor<double> a({2, 3}), b({3, 3});
  EXPECT_THROW(photometric_loss(a, a, b), ContractError);
}

TEST(PhotometricLoss, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  const Tensor<double> target = unerf::testing::random_tensor({5, 3}, rng, 0, 1);
  const auto r = gradient_check(
      [&](std::span<const Tensor<double>> in) { return photometric_loss(in[0], in[1], target); },
      {unerf::testing::random_tensor({5, 3}, rng, 0, 1), unerf::testing::random_tensor({5, 3}, rng, 0, 1)});
  EXPECT_TRUE(r.passed()) << r.max_rel_error;
}

TEST(TrainStep, ZeroLearningRateLeavesParametersUnchanged) {
  TrainConfig c = tiny_config("");
  c.lr = 0;
  Trainer t(c, single_ray_dataset({0.3, 0.6, 0.2}), {});
  std::vector<Tensor<float>> before;
  for (const auto& p : t.model().fine.params()) before.push_back(p.value.clone());
  for (int i = 0; i < 3; ++i) t.step();
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_TRUE(same(t.model().fine.params()[i].value, before[i]));
}

TEST(TrainStep, SingleRayOverfits) {
  TrainConfig c = tiny_config("", 500);
  c.network.width = 32;
  c.rays = 1;
  Trainer t(c, single_ray_dataset({0.3, 0.6, 0.2}), {});
  double last = 0;
  for (int i = 0; i < 500; ++i) last = t.step().loss;
  EXPECT_LT(last, 1e-4);
}

TEST(TrainStep, FixedSeedGivesIdenticalTrajectories) {
  const fs::path data = tiny_scene();
  Trainer a = Trainer::from_config(tiny_config(data));
  Trainer b = Trainer::from_config(tiny_config(data));
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.step().loss, b.step().loss) << i;
}

TEST(TrainStep, NonFiniteLossNamesTheTensor) {
  TrainConfig c = tiny_config("");
  Trainer t(c, single_ray_dataset({0.3, 0.6, 0.2}), {});
  t.model().coarse.param("l1.w")[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    t.step();
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("first non-finite tensor"), std::string::npos) << msg;
    EXPECT_EQ(msg.find("none recorded"), std::string::npos) << msg;
  }
}

TEST(TrainStep, ActivationCountIsReported) {
  TrainConfig c = tiny_config("");
  Trainer t(c, single_ray_dataset({0.3, 0.6, 0.2}), {});
  EXPECT_GT(t.step().activation_elems, 0u);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.rays = 0;
  EXPECT_THROW(c.validate(), ContractError);
  c = TrainConfig{};
  c.lr = -1;
  EXPECT_THROW(c.validate(), ContractError);
  c = TrainConfig{};
  c.network = NetworkConfig::toy(Variant::UnerfSub);
  c.n_coarse = 20;
  EXPECT_THROW(c.validate(), ContractError);
  c.fine_only = true;
  c.n_fine = 28;
  EXPECT_NO_THROW(c.validate());
  c.n_fine = 0;
  EXPECT_THROW(c.validate(), ContractError);
  c = TrainConfig{};
  c.grad_clip = -1;
  EXPECT_THROW(c.validate(), ContractError);
}

TEST(TrainConfig, JsonRoundTrip) {
  TrainConfig c;
  c.network = NetworkConfig::toy(Variant::UnerfConv);
  c.network.kernel = 5;
  c.fine_only = true;
  c.grad_clip = 0.5;
  c.seed = 9;
  c.data_dir = "/some/where";
  const TrainConfig back = train_config_from_json(to_json(c));
  EXPECT_TRUE(back.network == c.network);
  EXPECT_TRUE(back.fine_only);
  EXPECT_EQ(back.grad_clip, 0.5);
  EXPECT_EQ(back.seed, 9u);
  EXPECT_EQ(back.data_dir, c.data_dir);
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(TrainConfig, FineOnlyKeepsANerfCoarseNetwork) {
  TrainConfig c = tiny_config("");
  c.network = NetworkConfig::toy(Variant::UnerfConv);
  c.network.width = 16;
  c.fine_only = true;
  c.n_coarse = 12;
  c.n_fine = 20;
  Trainer t(c, single_ray_dataset({0.3, 0.6, 0.2}), {});
  EXPECT_EQ(t.model().coarse.config().variant, Variant::Nerf);
  EXPECT_EQ(t.model().fine.config().variant, Variant::UnerfConv);
  EXPECT_TRUE(std::isfinite(t.step().loss));
}

TEST(TrainStep, GradientClippingBoundsTheFirstUpdate) {
  // Adam's first step moves each parameter by about lr regardless of the
  // gradient scale, unless the clipped gradient is below eps.
  TrainConfig c = tiny_config("");
  c.grad_clip = 1e-12;
  Trainer t(c, single_ray_dataset({0.3, 0.6, 0.2}), {});
  std::vector<Tensor<float>> before;
  for (const auto& p : t.model().fine.params()) before.push_back(p.value.clone());
  t.step();
  double moved = 0;
  for (std::size_t i = 0; i < before.size(); ++i)
    for (std::size_t k = 0; k < before[i].numel(); ++k)
      moved = std::max(moved, std::abs(static_cast<double>(t.model().fine.params()[i].value[k]) - before[i][k]));
  EXPECT_LT(moved, 0.5 * c.lr);
}

TEST(Checkpoint, SaveLoadIsBitExact) {
  TempDir dir;
  Trainer t = Trainer::from_config(tiny_config(tiny_scene()));
  for (int i = 0; i < 3; ++i) t.step();
  t.save(dir / "a.ckpt");
  const Model m = load_model(dir / "a.ckpt");
  for (std::size_t i = 0; i < m.fine.params().size(); ++i) {
    EXPECT_TRUE(same(m.fine.params()[i].value, t.model().fine.params()[i].value));
    EXPECT_TRUE(same(m.coarse.params()[i].value, t.model().coarse.params()[i].value));
  }
  EXPECT_TRUE(m.config.network == t.config().network);
}

TEST(Checkpoint, MismatchedVariantIsRejected) {
  TempDir dir;
  Trainer t = Trainer::from_config(tiny_config(tiny_scene()));
  t.save(dir / "a.ckpt");
  try {
    load_model(dir / "a.ckpt", Variant::UnerfSub);
    FAIL() << "expected ContractError";
  } catch (const ContractError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("nerf"), std::string::npos) << msg;
    EXPECT_NE(msg.find("unerf-sub"), std::string::npos) << msg;
  }
}

TEST(Checkpoint, CorruptionFailsTheChecksum) {
  TempDir dir;
  Trainer t = Trainer::from_config(tiny_config(tiny_scene()));
  t.save(dir / "a.ckpt");
  std::fstream f(dir / "a.ckpt", std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(static_cast<std::streamoff>(fs::file_size(dir / "a.ckpt") / 2));
  f.put('\x5a');
  f.close();
  EXPECT_THROW(load_checkpoint(dir / "a.ckpt"), ParseError);
}

TEST(Checkpoint, WrongVersionIsExplicit) {
  TempDir dir;
  Trainer t = Trainer::from_config(tiny_config(tiny_scene()));
  t.save(dir / "a.ckpt");
  std::fstream f(dir / "a.ckpt", std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(8);  // version follows the 8-byte magic
  f.put('\x07');
  f.close();
  try {
    load_checkpoint(dir / "a.ckpt");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, MissingFileIsIoError) {
  EXPECT_THROW(load_checkpoint("/nonexistent/x.ckpt"), IoError);
}

TEST(Checkpoint, ResumeContinuesTheTrajectory) {
  TempDir dir;
  const TrainConfig c = tiny_config(tiny_scene(), 16);
  Trainer straight = Trainer::from_config(c);
  std::vector<double> want;
  for (int i = 0; i < 16; ++i) want.push_back(straight.step().loss);

  Trainer first = Trainer::from_config(c);
  for (int i = 0; i < 8; ++i) first.step();
  first.save(dir / "half.ckpt");
  Trainer resumed = resume_trainer(dir / "half.ckpt");
  EXPECT_EQ(resumed.iteration(), 8u);
  for (int i = 8; i < 16; ++i) EXPECT_NEAR(resumed.step().loss, want[i], 1e-6 * std::abs(want[i])) << i;
}

TEST(Psnr, Examples) {
  const Image a = constant_image(4, 4, 0.5f);
  EXPECT_EQ(psnr(a, a), kPsnrIdentical);
  EXPECT_NEAR(psnr(constant_image(4, 4, 0.6f), a), 20.0, 1e-5);
  EXPECT_NEAR(psnr(constant_image(4, 4, 1.0f), constant_image(4, 4, 0.0f)), 0.0, 1e-12);
  EXPECT_THROW(psnr(a, constant_image(4, 3, 0.5f)), ContractError);
}

TEST(Psnr, MaskedRestrictsToForeground) {
  Image a = constant_image(2, 1, 0.5f), b = constant_image(2, 1, 0.5f);
  b.pixels[3] = b.pixels[4] = b.pixels[5] = 0.6f;
  const std::vector<double> mask{0.0, 1.0};
  EXPECT_NEAR(masked_psnr(a, b, mask), 20.0, 1e-5);
}

TEST(Ssim, IdenticalIsOne) {
  const auto [a, b] = unerf::testing::metric_pair(0);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, ConstantImagesClosedForm) {
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  for (auto [x, y] : {std::pair{0.2, 0.7}, std::pair{0.5, 0.5}, std::pair{0.0, 1.0}}) {
    const double want = (2 * x * y + c1) * c2 / ((x * x + y * y + c1) * c2);
    EXPECT_NEAR(ssim(constant_image(16, 12, static_cast<float>(x)), constant_image(16, 12, static_cast<float>(y))),
                want, 1e-6);
  }
}

TEST(Ssim, SelfBeatsInverse) {
  for (int seed = 0; seed < 5; ++seed) {
    const Image x = unerf::testing::metric_pair(seed).first;
    Image inv = x;
    for (float& v : inv.pixels) v = 1 - v;
    EXPECT_GT(ssim(x, x), ssim(x, inv));
  }
}

TEST(Ssim, TooSmallImageThrows) {
  EXPECT_THROW(ssim(constant_image(10, 20, 0.5f), constant_image(10, 20, 0.5f)), ContractError);
}

TEST(Metrics, AgreeWithFrozenReferenceValues) {
  for (int seed = 0; seed < 10; ++seed) {
    const auto [a, b] = unerf::testing::metric_pair(seed);
    EXPECT_NEAR(psnr(a, b), kReferenceMetrics[seed][0], 1e-6) << seed;
    EXPECT_NEAR(ssim(a, b), kReferenceMetrics[seed][1], 1e-4) << seed;
  }
}

TEST(Metrics, AgreeWithStraightLineImplementations) {
  for (int seed = 0; seed < 10; ++seed) {
    const auto [a, b] = unerf::testing::metric_pair(seed, 17, 31);
    EXPECT_NEAR(psnr(a, b), unerf::testing::reference_psnr(a, b), 1e-6) << seed;
    EXPECT_NEAR(ssim(a, b), unerf::testing::reference_ssim(a, b), 1e-4) << seed;
  }
}

TEST(TrainLoop, WritesTheLogCsv) {
  TempDir dir;
  TrainConfig c = tiny_config(tiny_scene(), 6);
  c.log_every = 2;
  c.eval_every = 3;
  Trainer t = Trainer::from_config(c);
  t.train(dir / "log.csv");
  std::ifstream in(dir / "log.csv");
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(header, kTrainLogHeader);
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4u);  // 2, 3, 4, 6
  EXPECT_EQ(t.iteration(), 6u);
  ASSERT_TRUE(t.history().back().val.has_value());
}

#include "test_support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <unistd.h>

#include "unerf/scenes.hpp"

namespace unerf::testing {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = fs::temp_directory_path() /
          (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" + std::to_string(rd()));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

Tensor<double> random_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
  Tensor<double> t(shape);
  for (double& v : t.values()) v = lo + (hi - lo) * uniform01(rng);
  return t;
}

std::vector<double> random_depths(std::size_t n, Rng& rng, double lo, double hi) {
  std::vector<double> d;
  while (d.size() < n) {
    d.clear();
    for (std::size_t i = 0; i < n; ++i) d.push_back(lo + (hi - lo) * uniform01(rng));
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
  }
  return d;
}

fs::path tiny_scene(const std::string& tag, int resolution, std::size_t n_train) {
  static std::mutex mu;
  static std::map<std::string, std::unique_ptr<TempDir>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[tag + "-" + std::to_string(resolution) + "-" + std::to_string(n_train)];
  if (!slot) {
    slot = std::make_unique<TempDir>("scene-" + tag);
    DatasetSpec spec;
    spec.resolution = resolution;
    spec.n_train = n_train;
    spec.n_val = 2;
    spec.n_test = 2;
    gen_dataset(AnalyticScene::default_scene(), spec, slot->path());
  }
  return slot->path();
}

ReferenceComposite reference_composite(std::span<const double> sigma, std::span<const double> rgb,
                                       std::span<const double> depths, double far, const Color& background) {
  const std::size_t n = sigma.size();
  ReferenceComposite out;
  out.weights.resize(n);
  double transmittance = 1.0;
  double wsum = 0, tsum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double delta = (i + 1 < n ? depths[i + 1] : far) - depths[i];
    const double alpha = 1.0 - std::exp(-sigma[i] * delta);
    const double w = transmittance * alpha;
    out.weights[i] = w;
    for (int c = 0; c < 3; ++c) out.rgb[c] += w * rgb[3 * i + c];
    wsum += w;
    tsum += w * depths[i];
    transmittance *= 1.0 - alpha;
  }
  for (int c = 0; c < 3; ++c) out.rgb[c] += (1.0 - wsum) * background[c];
  out.acc = wsum;
  out.depth = tsum / std::max(wsum, 1e-10);
  return out;
}

std::vector<std::set<std::size_t>> unet_receptive_field(std::size_t n, int kernel) {
  using Sets = std::vector<std::set<std::size_t>>;
  const long k = kernel;
  std::vector<Sets> down(4);
  down[0].resize(n);
  for (std::size_t i = 0; i < n; ++i) down[0][i] = {i};
  for (int lv = 1; lv < 4; ++lv) {
    const long len = static_cast<long>(down[lv - 1].size());
    down[lv].resize(static_cast<std::size_t>(len / 2));
    for (long j = 0; j < len / 2; ++j) {
      for (long t = 0; t < k; ++t) {
        const long src = std::clamp(2 * j - (k - 1) / 2 + t, 0L, len - 1);
        down[lv][j].insert(down[lv - 1][src].begin(), down[lv - 1][src].end());
      }
    }
  }
  Sets h = down[3];
  for (int lv = 2; lv >= 0; --lv) {
    const std::size_t len = down[lv].size(), half = h.size();
    Sets up(len);
    for (std::size_t m = 0; m < len; ++m) {
      std::vector<std::size_t> from;
      if (m % 2 == 0) {
        from = {m / 2};
      } else if ((m + 1) / 2 < half) {
        from = {(m - 1) / 2, (m + 1) / 2};
      } else {
        from = {(m - 1) / 2 - 1, (m - 1) / 2};
      }
      for (std::size_t f : from) up[m].insert(h[f].begin(), h[f].end());
      up[m].insert(down[lv][m].begin(), down[lv][m].end());
    }
    h = std::move(up);
  }
  return h;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double u01(std::uint64_t seed, std::uint64_t i) {
  return static_cast<double>(splitmix(seed * 1000003ull + i) >> 11) * 0x1.0p-53;
}

}  // namespace

std::pair<Image, Image> metric_pair(int seed, int height, int width) {
  Image x(width, height, 3), y(width, height, 3);
  const std::size_t n = x.pixels.size();
  const auto s = static_cast<std::uint64_t>(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double row = static_cast<double>((i / 3) / static_cast<std::size_t>(width));
    const double col = static_cast<double>((i / 3) % static_cast<std::size_t>(width));
    const double base = 0.5 + 0.4 * std::sin(0.3 * row + 0.2 * col + seed);
    x.pixels[i] = static_cast<float>(std::clamp(0.7 * base + 0.3 * u01(s, i), 0.0, 1.0));
    y.pixels[i] = static_cast<float>(std::clamp(static_cast<double>(x.pixels[i]) + 0.2 * (u01(s + 100, i) - 0.5), 0.0, 1.0));
  }
  return {x, y};
}

double reference_ssim(const Image& a, const Image& b) {
  constexpr int win = 11;
  constexpr double sigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double g[win][win];
  double gsum = 0;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      const double di = i - win / 2, dj = j - win / 2;
      g[i][j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
      gsum += g[i][j];
    }
  auto lum = [](const Image& im, int r, int c) {
    double s = 0;
    for (int ch = 0; ch < im.channels; ++ch) s += im.at(r, c, ch);
    return s / im.channels;
  };
  double total = 0;
  int count = 0;
  for (int r = 0; r + win <= a.height; ++r) {
    for (int c = 0; c + win <= a.width; ++c) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double w = g[i][j] / gsum, x = lum(a, r + i, c + j), y = lum(b, r + i, c + j);
          mx += w * x;
          my += w * y;
          sxx += w * x * x;
          syy += w * y * y;
          sxy += w * x * y;
        }
      const double vx = sxx - mx * mx, vy = syy - my * my, cov = sxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / count;
}

double reference_psnr(const Image& a, const Image& b) {
  double se = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    se += d * d;
  }
  return 10.0 * std::log10(1.0 / (se / static_cast<double>(a.pixels.size())));
}

SampleSet random_sample_set(std::size_t rays, std::size_t n, Rng& rng) {
  RayBatch b;
  for (std::size_t r = 0; r < rays; ++r) {
    b.origins.push_back({4 * uniform01(rng) - 2, 4 * uniform01(rng) - 2, 4 * uniform01(rng) - 2});
    b.directions.push_back(normalized({uniform01(rng) - 0.5, uniform01(rng) - 0.5, uniform01(rng) - 0.5}));
    b.near.push_back(2);
    b.far.push_back(6);
  }
  std::vector<double> depths;
  for (std::size_t r = 0; r < rays; ++r) {
    const auto d = random_depths(n, rng, 2, 6);
    depths.insert(depths.end(), d.begin(), d.end());
  }
  return make_sample_set(b, depths, n);
}

Vec3 random_direction(Rng& rng) {
  return normalized({uniform01(rng) - 0.5, uniform01(rng) - 0.5, uniform01(rng) - 0.5 + 1e-3});
}

ImportancePdf importance_pdf(std::span<const double> depths, std::span<const double> w, double near, double far) {
  ImportancePdf p;
  p.edges.push_back(near);
  for (std::size_t i = 1; i < depths.size(); ++i) p.edges.push_back((depths[i - 1] + depths[i]) / 2);
  p.edges.push_back(far);
  double total = 0;
  for (double x : w) total += x + 1e-5;
  for (double x : w) p.prob.push_back((x + 1e-5) / total);
  return p;
}

}  // namespace unerf::testing

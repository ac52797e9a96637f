#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "unerf/image_io.hpp"
#include "unerf/rays.hpp"
#include "unerf/render.hpp"
#include "unerf/tensor.hpp"

namespace unerf::testing {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "unerf");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const noexcept { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

Tensor<double> random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0);

// Sorted, strictly increasing random depths in [lo, hi].
std::vector<double> random_depths(std::size_t n, Rng& rng, double lo, double hi);

// Rays from random origins with sorted random depths in [2, 6].
SampleSet random_sample_set(std::size_t rays, std::size_t n, Rng& rng);

Vec3 random_direction(Rng& rng);

// Bin edges and probabilities of the importance PDF, written out directly:
// edges at near, coarse midpoints and far; weights floored by 1e-5.
struct ImportancePdf {
  std::vector<double> edges, prob;
};
ImportancePdf importance_pdf(std::span<const double> depths, std::span<const double> w, double near, double far);

// Small default-scene dataset (train/val/test) written once per process under
// `tag`; the default resolution keeps SSIM windows valid.
fs::path tiny_scene(const std::string& tag = "tiny", int resolution = 16, std::size_t n_train = 6);

// Straight-line transcription of the transmittance recurrence for one ray.
struct ReferenceComposite {
  std::vector<double> weights;
  Color rgb{};
  double acc = 0;
  double depth = 0;
};
ReferenceComposite reference_composite(std::span<const double> sigma, std::span<const double> rgb,
                                       std::span<const double> depths, double far, const Color& background);

// For each output sample of a U-shaped conv trunk over n samples, the set of
// input samples that can influence it.
std::vector<std::set<std::size_t>> unet_receptive_field(std::size_t n, int kernel);

// Deterministic image pair shared with the frozen metric reference values.
std::pair<Image, Image> metric_pair(int seed, int height = 20, int width = 24);

// Windowed SSIM evaluated window-by-window with a full 2D Gaussian.
double reference_ssim(const Image& a, const Image& b);

double reference_psnr(const Image& a, const Image& b);

}  // namespace unerf::testing

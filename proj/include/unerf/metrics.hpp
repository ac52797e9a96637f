#pragma once

#include <limits>
#include <span>

#include "unerf/image_io.hpp"

namespace unerf {

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

// Mean squared error over every channel of every pixel.
double mse(const Image& img, const Image& ref);

// -10 log10(MSE); kPsnrIdentical when MSE is zero.
double psnr(const Image& img, const Image& ref);

// PSNR restricted to pixels with mask > 0.5.
double masked_psnr(const Image& img, const Image& ref, std::span<const double> mask);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;
};

// Mean local SSIM of the channel-mean luminance over every window position
// that fits inside the image. Throws ContractError for images smaller than
// the window.
double ssim(const Image& img, const Image& ref, const SsimOptions& options = {});

}  // namespace unerf

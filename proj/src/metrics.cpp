#include "unerf/metrics.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "unerf/errors.hpp"

namespace unerf {

namespace {

void check_pair(const Image& a, const Image& b, const char* what) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw ContractError(std::string(what) + ": image shapes differ (" + std::to_string(a.width) + "x" +
                        std::to_string(a.height) + "x" + std::to_string(a.channels) + " vs " +
                        std::to_string(b.width) + "x" + std::to_string(b.height) + "x" +
                        std::to_string(b.channels) + ")");
  }
}

double psnr_from_mse(double m) { return m == 0.0 ? kPsnrIdentical : -10.0 * std::log10(m); }

std::vector<double> luminance(const Image& img) {
  std::vector<double> y(static_cast<std::size_t>(img.width) * img.height);
  for (std::size_t p = 0; p < y.size(); ++p) {
    double s = 0;
    for (int c = 0; c < img.channels; ++c) s += img.pixels[p * img.channels + c];
    y[p] = s / img.channels;
  }
  return y;
}

// Separable valid-mode filter.
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h, const std::vector<double>& g) {
  const int k = static_cast<int>(g.size());
  const int ow = w - k + 1, oh = h - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < ow; ++c) {
      double s = 0;
      for (int i = 0; i < k; ++i) s += g[i] * src[static_cast<std::size_t>(r) * w + c + i];
      tmp[static_cast<std::size_t>(r) * ow + c] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int r = 0; r < oh; ++r)
    for (int c = 0; c < ow; ++c) {
      double s = 0;
      for (int i = 0; i < k; ++i) s += g[i] * tmp[static_cast<std::size_t>(r + i) * ow + c];
      out[static_cast<std::size_t>(r) * ow + c] = s;
    }
  return out;
}

}  // namespace

double mse(const Image& img, const Image& ref) {
  check_pair(img, ref, "mse");
  if (img.pixels.empty()) throw ContractError("mse: empty images");
  double s = 0;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const double d = static_cast<double>(img.pixels[i]) - ref.pixels[i];
    s += d * d;
  }
  return s / static_cast<double>(img.pixels.size());
}

double psnr(const Image& img, const Image& ref) { return psnr_from_mse(mse(img, ref)); }

double masked_psnr(const Image& img, const Image& ref, std::span<const double> mask) {
  check_pair(img, ref, "masked_psnr");
  const std::size_t px = static_cast<std::size_t>(img.width) * img.height;
  if (mask.size() != px) throw ContractError("masked_psnr: mask needs one value per pixel");
  double s = 0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < px; ++p) {
    if (!(mask[p] > 0.5)) continue;
    for (int c = 0; c < img.channels; ++c) {
      const std::size_t i = p * img.channels + c;
      const double d = static_cast<double>(img.pixels[i]) - ref.pixels[i];
      s += d * d;
      ++n;
    }
  }
  if (n == 0) throw ContractError("masked_psnr: mask selects no pixels");
  return psnr_from_mse(s / static_cast<double>(n));
}

double ssim(const Image& img, const Image& ref, const SsimOptions& o) {
  check_pair(img, ref, "ssim");
  if (o.window < 1 || o.window % 2 == 0) throw ContractError("ssim: window must be a positive odd size");
  if (img.width < o.window || img.height < o.window) {
    throw ContractError("ssim: image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                        " is smaller than the " + std::to_string(o.window) + "x" + std::to_string(o.window) +
                        " window");
  }
  std::vector<double> g(o.window);
  double gsum = 0;
  const int half = o.window / 2;
  for (int i = 0; i < o.window; ++i) {
    g[i] = std::exp(-0.5 * (i - half) * (i - half) / (o.sigma * o.sigma));
    gsum += g[i];
  }
  for (double& v : g) v /= gsum;

  const std::vector<double> x = luminance(img), y = luminance(ref);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const int w = img.width, h = img.height;
  const auto mx = filter_valid(x, w, h, g), my = filter_valid(y, w, h, g);
  const auto sxx = filter_valid(xx, w, h, g), syy = filter_valid(yy, w, h, g), sxy = filter_valid(xy, w, h, g);

  const double c1 = (o.k1 * o.data_range) * (o.k1 * o.data_range);
  const double c2 = (o.k2 * o.data_range) * (o.k2 * o.data_range);
  double total = 0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

}  // namespace unerf

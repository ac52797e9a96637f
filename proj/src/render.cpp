#include "unerf/render.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "unerf/errors.hpp"
#include "unerf/ops.hpp"

namespace unerf {

template <typename T>
RenderResult<T> composite(const RadianceOutput<T>& radiance, const SampleSet& samples, const Color& background) {
  const std::size_t rays = samples.rays, n = samples.samples;
  if (radiance.sigma.shape() != Shape{rays, n} || radiance.rgb.shape() != Shape{rays * n, 3}) {
    throw DimensionError("composite: radiance " + shape_str(radiance.sigma.shape()) + "/" +
                         shape_str(radiance.rgb.shape()) + " does not match " + std::to_string(rays) +
                         " rays x " + std::to_string(n) + " samples");
  }
  Tensor<T> deltas({rays, n});
  for (std::size_t r = 0; r < rays; ++r) {
    const double* t = samples.depths.data() + r * n;
    for (std::size_t i = 0; i < n; ++i) {
      const double next = i + 1 < n ? t[i + 1] : samples.far[r];
      if (next < t[i]) {
        throw ContractError("composite: depths of ray " + std::to_string(r) + " decrease at sample " +
                            std::to_string(i));
      }
      deltas[r * n + i] = static_cast<T>(next - t[i]);
    }
  }

  RenderResult<T> out;
  out.background = background;
  out.weights = ops::ray_weights(radiance.sigma, deltas);
  out.acc = ops::sum_rows(out.weights);
  const Tensor<T> bg({1, 3}, {static_cast<T>(background[0]), static_cast<T>(background[1]),
                              static_cast<T>(background[2])});
  out.rgb = ops::add(ops::ray_sum(out.weights, radiance.rgb),
                     ops::mul(ops::scale_shift(out.acc, T{-1}, T{1}), bg));
  out.depth.resize(rays);
  for (std::size_t r = 0; r < rays; ++r) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < n; ++i) {
      num += static_cast<double>(out.weights[r * n + i]) * samples.depths[r * n + i];
      den += static_cast<double>(out.weights[r * n + i]);
    }
    out.depth[r] = num / std::max(den, 1e-10);
  }
  return out;
}

std::size_t default_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* cap = std::getenv("NF_LAB_THREADS")) {
    const long v = std::strtol(cap, nullptr, 10);
    if (v >= 1) n = std::min(n, static_cast<std::size_t>(v));
  }
  return n;
}

std::vector<double> coarse_depths(const RayBatch& rays, std::size_t n, bool jitter, std::span<Rng> rngs) {
  const std::size_t count = rays.size();
  if (rngs.size() != count) throw DimensionError("coarse_depths: one rng per ray required");
  std::vector<double> depths(count * n);
  for (std::size_t r = 0; r < count; ++r) {
    const auto t = stratified_samples(rays.near[r], rays.far[r], n, jitter, &rngs[r]);
    std::copy(t.begin(), t.end(), depths.begin() + r * n);
  }
  return depths;
}

std::vector<double> fine_depths(const RayBatch& rays, std::span<const double> coarse, std::span<const double> weights,
                                std::size_t nc, std::size_t nf, bool deterministic, std::span<Rng> rngs) {
  const std::size_t count = rays.size();
  if (coarse.size() != count * nc || weights.size() != count * nc || rngs.size() != count) {
    throw DimensionError("fine_depths: coarse depths, weights and rngs must cover every ray");
  }
  std::vector<double> merged(count * (nc + nf));
  for (std::size_t r = 0; r < count; ++r) {
    const auto ct = coarse.subspan(r * nc, nc);
    const auto extra =
        importance_samples(ct, weights.subspan(r * nc, nc), rays.near[r], rays.far[r], nf, deterministic, &rngs[r]);
    const auto m = merge_depths(ct, extra);
    std::copy(m.begin(), m.end(), merged.begin() + r * (nc + nf));
  }
  return merged;
}

template <typename T>
std::vector<double> render_rays(const FieldFn<T>& coarse, const FieldFn<T>& fine, const RayBatch& rays,
                                std::span<const std::uint64_t> ray_ids, const RenderOptions& options,
                                std::vector<double>* depth, std::vector<double>* acc,
                                std::vector<double>* coarse_rgb) {
  const std::size_t count = rays.size();
  if (ray_ids.size() != count) throw DimensionError("render_rays: one id per ray required");
  const std::size_t nc = options.n_coarse, nf = options.n_fine;
  std::vector<Rng> rngs;
  rngs.reserve(count);
  for (std::uint64_t id : ray_ids) rngs.emplace_back(stream_seed(options.seed, id));

  const std::vector<double> depths = coarse_depths(rays, nc, !options.deterministic, rngs);
  const SampleSet coarse_samples = make_sample_set(rays, depths, nc);
  const RenderResult<T> c = composite(coarse(coarse_samples), coarse_samples, options.background);

  auto export_result = [&](const RenderResult<T>& res, std::vector<double>& rgb) {
    rgb.resize(count * 3);
    for (std::size_t i = 0; i < count * 3; ++i) rgb[i] = static_cast<double>(res.rgb[i]);
    if (depth) *depth = res.depth;
    if (acc) {
      acc->resize(count);
      for (std::size_t r = 0; r < count; ++r) (*acc)[r] = static_cast<double>(res.acc[r]);
    }
  };

  std::vector<double> rgb;
  if (coarse_rgb) export_result(c, *coarse_rgb);
  if (nf == 0) {
    export_result(c, rgb);
    return rgb;
  }

  std::vector<double> w(count * nc);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<double>(c.weights[i]);
  std::vector<double> merged = fine_depths(rays, depths, w, nc, nf, options.deterministic, rngs);
  const SampleSet fine_samples = make_sample_set(rays, std::move(merged), nc + nf);
  export_result(composite(fine(fine_samples), fine_samples, options.background), rgb);
  return rgb;
}

template <typename T>
RenderedImage render_image(const FieldFn<T>& coarse, const FieldFn<T>& fine, const Camera& camera,
                           const RenderOptions& options) {
  camera.validate();
  if (options.chunk == 0) throw ContractError("render_image: chunk size must be positive");
  const std::vector<Pixel> pixels = all_pixels(camera);
  const std::size_t total = pixels.size();
  RenderedImage out;
  out.rgb = Image(camera.width, camera.height, 3);
  out.depth.assign(total, 0.0);
  out.acc.assign(total, 0.0);
  if (options.keep_coarse) out.coarse = Image(camera.width, camera.height, 3);

  const std::size_t chunks = (total + options.chunk - 1) / options.chunk;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto render_chunk = [&](std::size_t ci) {
      const std::size_t begin = ci * options.chunk;
      const std::size_t end = std::min(total, begin + options.chunk);
      const std::span<const Pixel> px(pixels.data() + begin, end - begin);
      const RayBatch rays = generate_rays(camera, px);
      std::vector<std::uint64_t> ids(end - begin);
      for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = begin + i;
      std::vector<double> depth, acc, crgb;
      const auto rgb = render_rays(coarse, fine, rays, ids, options, &depth, &acc,
                                   options.keep_coarse ? &crgb : nullptr);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        for (int ch = 0; ch < 3; ++ch) {
          out.rgb.pixels[(begin + i) * 3 + ch] = static_cast<float>(rgb[i * 3 + ch]);
          if (options.keep_coarse) out.coarse->pixels[(begin + i) * 3 + ch] = static_cast<float>(crgb[i * 3 + ch]);
        }
        out.depth[begin + i] = depth[i];
        out.acc[begin + i] = acc[i];
      }
  };
  auto worker = [&] {
    for (std::size_t ci = next++; ci < chunks; ci = next++) {
      try {
        render_chunk(ci);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = chunks;
      }
    }
  };

  const std::size_t threads = std::min(chunks, options.threads ? options.threads : default_threads());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

template RenderResult<float> composite(const RadianceOutput<float>&, const SampleSet&, const Color&);
template RenderResult<double> composite(const RadianceOutput<double>&, const SampleSet&, const Color&);
template RenderedImage render_image(const FieldFn<float>&, const FieldFn<float>&, const Camera&, const RenderOptions&);
template RenderedImage render_image(const FieldFn<double>&, const FieldFn<double>&, const Camera&, const RenderOptions&);
template std::vector<double> render_rays(const FieldFn<float>&, const FieldFn<float>&, const RayBatch&,
                                         std::span<const std::uint64_t>, const RenderOptions&,
                                         std::vector<double>*, std::vector<double>*, std::vector<double>*);
template std::vector<double> render_rays(const FieldFn<double>&, const FieldFn<double>&, const RayBatch&,
                                         std::span<const std::uint64_t>, const RenderOptions&,
                                         std::vector<double>*, std::vector<double>*, std::vector<double>*);

}  // namespace unerf

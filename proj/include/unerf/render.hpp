#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "unerf/fields.hpp"
#include "unerf/image_io.hpp"
#include "unerf/rays.hpp"

namespace unerf {

using Color = std::array<double, 3>;

inline constexpr Color kWhite{1.0, 1.0, 1.0};

template <typename T>
struct RenderResult {
  Tensor<T> rgb;              // [rays, 3]
  Tensor<T> weights;          // [rays, samples]
  Tensor<T> acc;              // [rays, 1], sum of weights
  std::vector<double> depth;  // expected depth per ray
  Color background = kWhite;
};

// Volume-rendering quadrature over each ray: delta_i = t_{i+1} - t_i (last
// delta = far - t_N), alpha_i = 1 - exp(-sigma_i delta_i), w_i = T_i alpha_i,
// rgb = sum w_i c_i + (1 - sum w_i) * background. Differentiable w.r.t.
// sigma and rgb. Throws ContractError if a ray's depths decrease.
template <typename T>
RenderResult<T> composite(const RadianceOutput<T>& radiance, const SampleSet& samples, const Color& background);

// Anything that maps samples to density and colour: a network or an oracle.
template <typename T>
using FieldFn = std::function<RadianceOutput<T>(const SampleSet&)>;

template <typename T>
FieldFn<T> field_fn(const RadianceField<T>& field) {
  return [&field](const SampleSet& s) { return field.forward(make_field_input<T>(s, field.config())); };
}

struct RenderOptions {
  std::size_t n_coarse = 64;
  std::size_t n_fine = 128;  // 0: no importance pass, the coarse image is final
  std::size_t chunk = 1024;  // rays per evaluation
  bool deterministic = true; // midpoint strata and quantile importance samples
  std::uint64_t seed = 0;    // per-pixel streams when not deterministic
  Color background = kWhite;
  bool keep_coarse = false;
  // Worker threads; 0 picks default_threads().
  std::size_t threads = 0;
};

// Worker count: hardware concurrency, capped by NF_LAB_THREADS when set.
std::size_t default_threads();

struct RenderedImage {
  Image rgb;                   // fine (final) image, 3 channels
  std::vector<double> depth;   // per pixel
  std::vector<double> acc;     // per pixel
  std::optional<Image> coarse; // when keep_coarse
};

// Stratified depths for every ray (rays x n); rngs holds one stream per ray
// and is used only when jitter is set.
std::vector<double> coarse_depths(const RayBatch& rays, std::size_t n, bool jitter, std::span<Rng> rngs);

// Per ray, the coarse depths merged with nf importance samples drawn from
// that ray's coarse weights: rays x (nc + nf).
std::vector<double> fine_depths(const RayBatch& rays, std::span<const double> coarse, std::span<const double> weights,
                                std::size_t nc, std::size_t nf, bool deterministic, std::span<Rng> rngs);

// Coarse stratified pass, importance samples drawn from the detached coarse
// weights, fine pass over the merged depths. Output does not depend on chunk
// size or thread count.
template <typename T>
RenderedImage render_image(const FieldFn<T>& coarse, const FieldFn<T>& fine, const Camera& camera,
                           const RenderOptions& options);

// Same pipeline over explicit rays, returning per-ray colours (rays x 3).
template <typename T>
std::vector<double> render_rays(const FieldFn<T>& coarse, const FieldFn<T>& fine, const RayBatch& rays,
                                std::span<const std::uint64_t> ray_ids, const RenderOptions& options,
                                std::vector<double>* depth = nullptr, std::vector<double>* acc = nullptr,
                                std::vector<double>* coarse_rgb = nullptr);

}  // namespace unerf

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "unerf/tensor.hpp"

namespace unerf {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend Vec3 operator*(double s, Vec3 a) { return a * s; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
  double operator[](std::size_t i) const { return i == 0 ? x : i == 1 ? y : z; }
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(Vec3 a) { return a * (1.0 / norm(a)); }

// Row-major 4x4.
using Mat4 = std::array<double, 16>;

inline Mat4 identity4() { return {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1}; }

// Pinhole camera. Camera space looks along -Z with +X right and +Y up.
struct Camera {
  int width = 0;
  int height = 0;
  double focal = 0;  // pixels
  Mat4 cam_to_world = identity4();
  double near = 2.0;
  double far = 6.0;

  // Throws ContractError on a non-orthonormal rotation, near >= far or
  // focal <= 0.
  void validate() const;
  Vec3 origin() const { return {cam_to_world[3], cam_to_world[7], cam_to_world[11]}; }
};

// focal = 0.5 * width / tan(0.5 * camera_angle_x)
double focal_from_fov(int width, double camera_angle_x);

// Camera at `eye` looking at `target`; `up` picks the roll.
Mat4 look_at(Vec3 eye, Vec3 target, Vec3 up = {0, 0, 1});

struct Pixel {
  int row = 0;
  int col = 0;
};

struct RayBatch {
  std::vector<Vec3> origins;
  std::vector<Vec3> directions;  // unit length
  std::vector<double> near;
  std::vector<double> far;

  std::size_t size() const noexcept { return origins.size(); }
};

// One ray through each pixel centre. Throws RangeError for pixels outside
// the image.
RayBatch generate_rays(const Camera& camera, std::span<const Pixel> pixels);

// All pixels in row-major order.
std::vector<Pixel> all_pixels(const Camera& camera);

// Depths t along each of `rays` rays, `samples` per ray, with the derived
// positions origin + t * direction.
struct SampleSet {
  std::size_t rays = 0;
  std::size_t samples = 0;
  std::vector<double> depths;    // rays * samples
  std::vector<Vec3> positions;   // rays * samples
  std::vector<Vec3> view_dirs;   // rays
  std::vector<double> far;       // rays; end of the last quadrature interval

  std::span<const double> ray_depths(std::size_t r) const {
    return {depths.data() + r * samples, samples};
  }
};

// Validates that each ray's depths are nondecreasing and inside [near, far].
SampleSet make_sample_set(const RayBatch& rays, std::vector<double> depths, std::size_t samples);

using Rng = std::mt19937_64;

// Uniform in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Seed for an independent stream keyed by (seed, stream).
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream);

// [near, far] split into n equal bins, one depth per bin: the bin midpoint,
// or uniform within the bin when jitter is set (rng required).
std::vector<double> stratified_samples(double near, double far, std::size_t n, bool jitter,
                                       Rng* rng);

// Inverse-transform sampling from the piecewise-constant PDF whose bins are
// centred on the coarse depths (edges at midpoints, outer edges near/far).
// Each weight gets an additive floor before normalisation. Deterministic
// mode uses the quantiles (j + 0.5) / m; otherwise uniform draws from rng.
// Output is sorted.
inline constexpr double kImportanceWeightFloor = 1e-5;
std::vector<double> importance_samples(std::span<const double> coarse_depths,
                                       std::span<const double> weights, double near, double far,
                                       std::size_t m, bool deterministic, Rng* rng);

// Stable sorted union, duplicates kept.
std::vector<double> merge_depths(std::span<const double> coarse, std::span<const double> fine);

// [v, sin(2^0 pi v), cos(2^0 pi v), ..., sin(2^(L-1) pi v), cos(2^(L-1) pi v)]
// with each block spanning every input dimension.
std::vector<double> positional_encode(std::span<const double> v, int frequencies);

inline std::size_t encoded_width(std::size_t dims, int frequencies) {
  return dims * (1 + 2 * static_cast<std::size_t>(frequencies));
}

// Encodes each point into one row.
template <typename T>
Tensor<T> encode_points(std::span<const Vec3> points, int frequencies);

}  // namespace unerf

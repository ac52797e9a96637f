#include "unerf/rays.hpp"

#include <algorithm>
#include <numbers>
#include <string>

#include "unerf/errors.hpp"

namespace unerf {

void Camera::validate() const {
  if (width <= 0 || height <= 0) throw ContractError("camera: image size must be positive");
  if (!(focal > 0)) throw ContractError("camera: focal must be positive");
  if (!(near < far)) throw ContractError("camera: near must be less than far");
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double d = 0;
      for (int k = 0; k < 3; ++k) d += cam_to_world[k * 4 + i] * cam_to_world[k * 4 + j];
      if (std::abs(d - (i == j ? 1.0 : 0.0)) > 1e-6) {
        throw ContractError("camera: rotation block is not orthonormal");
      }
    }
  }
}

double focal_from_fov(int width, double camera_angle_x) {
  return 0.5 * width / std::tan(0.5 * camera_angle_x);
}

Mat4 look_at(Vec3 eye, Vec3 target, Vec3 up) {
  const Vec3 forward = normalized(target - eye);
  Vec3 right = cross(forward, up);
  if (norm(right) < 1e-9) right = cross(forward, Vec3{0, 1, 0});
  right = normalized(right);
  const Vec3 cam_up = cross(right, forward);
  const Vec3 back = forward * -1.0;
  return {right.x, cam_up.x, back.x, eye.x,  //
          right.y, cam_up.y, back.y, eye.y,  //
          right.z, cam_up.z, back.z, eye.z,  //
          0,       0,        0,      1};
}

RayBatch generate_rays(const Camera& camera, std::span<const Pixel> pixels) {
  RayBatch batch;
  batch.origins.reserve(pixels.size());
  batch.directions.reserve(pixels.size());
  const Mat4& m = camera.cam_to_world;
  const Vec3 origin = camera.origin();
  for (const Pixel& p : pixels) {
    if (p.row < 0 || p.row >= camera.height || p.col < 0 || p.col >= camera.width) {
      throw RangeError("pixel (" + std::to_string(p.row) + "," + std::to_string(p.col) +
                       ") outside " + std::to_string(camera.height) + "x" +
                       std::to_string(camera.width) + " image");
    }
    const double u = (p.col + 0.5 - 0.5 * camera.width) / camera.focal;
    const double v = -(p.row + 0.5 - 0.5 * camera.height) / camera.focal;
    const Vec3 dir{m[0] * u + m[1] * v - m[2], m[4] * u + m[5] * v - m[6],
                   m[8] * u + m[9] * v - m[10]};
    batch.origins.push_back(origin);
    batch.directions.push_back(normalized(dir));
    batch.near.push_back(camera.near);
    batch.far.push_back(camera.far);
  }
  return batch;
}

std::vector<Pixel> all_pixels(const Camera& camera) {
  std::vector<Pixel> px;
  px.reserve(static_cast<std::size_t>(camera.width) * camera.height);
  for (int r = 0; r < camera.height; ++r)
    for (int c = 0; c < camera.width; ++c) px.push_back({r, c});
  return px;
}

SampleSet make_sample_set(const RayBatch& rays, std::vector<double> depths, std::size_t samples) {
  if (depths.size() != rays.size() * samples) {
    throw DimensionError("sample set: " + std::to_string(depths.size()) + " depths for " +
                         std::to_string(rays.size()) + " rays x " + std::to_string(samples));
  }
  SampleSet s;
  s.rays = rays.size();
  s.samples = samples;
  s.positions.resize(depths.size());
  s.view_dirs = rays.directions;
  s.far = rays.far;
  for (std::size_t r = 0; r < s.rays; ++r) {
    for (std::size_t i = 0; i < samples; ++i) {
      const double t = depths[r * samples + i];
      if (t < rays.near[r] || t > rays.far[r] || (i > 0 && t < depths[r * samples + i - 1])) {
        throw ContractError("sample set: depths of ray " + std::to_string(r) +
                            " must be sorted within [near, far]");
      }
      s.positions[r * samples + i] = rays.origins[r] + rays.directions[r] * t;
    }
  }
  s.depths = std::move(depths);
  return s;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finaliser over the combined key
  std::uint64_t z = seed * 0x9e3779b97f4a7c15ull + stream + 0x632be59bd9b4e019ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::vector<double> stratified_samples(double near, double far, std::size_t n, bool jitter,
                                       Rng* rng) {
  if (n < 2) throw ContractError("stratified_samples: need at least 2 samples, got " + std::to_string(n));
  if (jitter && !rng) throw ContractError("stratified_samples: jitter requires an rng");
  const double step = (far - near) / static_cast<double>(n);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double offset = jitter ? uniform01(*rng) : 0.5;
    t[i] = near + (static_cast<double>(i) + offset) * step;
  }
  return t;
}

std::vector<double> importance_samples(std::span<const double> coarse_depths,
                                       std::span<const double> weights, double near, double far,
                                       std::size_t m, bool deterministic, Rng* rng) {
  const std::size_t n = coarse_depths.size();
  if (n == 0 || weights.size() != n) {
    throw ContractError("importance_samples: need one weight per coarse depth");
  }
  if (m < 1) throw ContractError("importance_samples: need at least one sample");
  if (!deterministic && !rng) throw ContractError("importance_samples: random mode requires an rng");

  std::vector<double> edges(n + 1);
  edges[0] = near;
  edges[n] = far;
  for (std::size_t i = 1; i < n; ++i) edges[i] = 0.5 * (coarse_depths[i - 1] + coarse_depths[i]);

  std::vector<double> cdf(n + 1, 0.0);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i] < 0) throw ContractError("importance_samples: negative weight");
    total += weights[i] + kImportanceWeightFloor;
  }
  for (std::size_t i = 0; i < n; ++i) {
    cdf[i + 1] = cdf[i] + (weights[i] + kImportanceWeightFloor) / total;
  }
  cdf[n] = 1.0;

  std::vector<double> u(m);
  for (std::size_t j = 0; j < m; ++j) {
    u[j] = deterministic ? (static_cast<double>(j) + 0.5) / static_cast<double>(m) : uniform01(*rng);
  }
  std::sort(u.begin(), u.end());

  std::vector<double> out(m);
  for (std::size_t j = 0; j < m; ++j) {
    // Bin b with cdf[b] <= u < cdf[b+1].
    auto it = std::upper_bound(cdf.begin() + 1, cdf.end(), u[j]);
    std::size_t b = static_cast<std::size_t>(it - cdf.begin()) - 1;
    b = std::min(b, n - 1);
    const double mass = cdf[b + 1] - cdf[b];
    const double frac = mass > 0 ? (u[j] - cdf[b]) / mass : 0.0;
    out[j] = std::clamp(edges[b] + frac * (edges[b + 1] - edges[b]), near, far);
  }
  return out;
}

std::vector<double> merge_depths(std::span<const double> coarse, std::span<const double> fine) {
  std::vector<double> out(coarse.size() + fine.size());
  std::merge(coarse.begin(), coarse.end(), fine.begin(), fine.end(), out.begin());
  return out;
}

std::vector<double> positional_encode(std::span<const double> v, int frequencies) {
  if (frequencies < 0) throw ContractError("positional_encode: negative frequency count");
  const std::size_t d = v.size();
  std::vector<double> out(encoded_width(d, frequencies));
  std::copy(v.begin(), v.end(), out.begin());
  double scale = std::numbers::pi;
  for (int l = 0; l < frequencies; ++l, scale *= 2.0) {
    double* s = out.data() + d * (1 + 2 * l);
    double* c = s + d;
    for (std::size_t i = 0; i < d; ++i) {
      s[i] = std::sin(scale * v[i]);
      c[i] = std::cos(scale * v[i]);
    }
  }
  return out;
}

template <typename T>
Tensor<T> encode_points(std::span<const Vec3> points, int frequencies) {
  const std::size_t width = encoded_width(3, frequencies);
  Tensor<T> out({points.size(), width});
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double v[3] = {points[i].x, points[i].y, points[i].z};
    const auto enc = positional_encode(v, frequencies);
    std::transform(enc.begin(), enc.end(), out.data() + i * width,
                   [](double e) { return static_cast<T>(e); });
  }
  return out;
}

template Tensor<float> encode_points<float>(std::span<const Vec3>, int);
template Tensor<double> encode_points<double>(std::span<const Vec3>, int);

}  // namespace unerf

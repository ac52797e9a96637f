#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "unerf/render.hpp"

namespace unerf {

struct Albedo {
  enum class Kind { Constant, Checker };
  Kind kind = Kind::Constant;
  Color primary{0.5, 0.5, 0.5};
  Color secondary{0.5, 0.5, 0.5};  // checker only
  double cell = 0.5;               // checker cell edge length

  Color at(Vec3 x) const;
};

struct Primitive {
  enum class Kind { Sphere, Box };
  Kind kind = Kind::Sphere;
  Vec3 center;
  Vec3 size{1, 1, 1};  // sphere: radius in x; box: half extents
  double density = 10.0;
  Albedo albedo;
  // rgb += view_tint * dot(d, kTintAxis)
  double view_tint = 0.0;

  bool contains(Vec3 x) const;
};

inline constexpr Vec3 kTintAxis{0, 0, 1};

struct AnalyticScene {
  std::vector<Primitive> primitives;
  Color background = kWhite;

  // Throws ContractError on negative densities or albedo outside [0, 1].
  void validate() const;

  // sigma=20 checkered sphere plus a small off-centre box, white background.
  static AnalyticScene default_scene();
};

struct OracleSample {
  double sigma = 0;
  Color rgb{0, 0, 0};
};

// sigma sums the densities of the primitives containing x; rgb is the
// density-weighted albedo of those primitives, tinted and clamped to [0, 1]
// (black outside every primitive).
OracleSample oracle_eval(const AnalyticScene& scene, Vec3 x, Vec3 d);

template <typename T>
FieldFn<T> oracle_field(const AnalyticScene& scene);

inline constexpr std::size_t kMinOracleSamples = 256;

// Deterministic single-pass render with n_dense midpoint samples.
RenderedImage oracle_render(const AnalyticScene& scene, const Camera& camera, std::size_t n_dense);

enum class Split { Train, Val, Test };
const char* split_name(Split s) noexcept;
Split parse_split(const std::string& name);

struct Dataset {
  Split split = Split::Train;
  double camera_angle_x = 0;
  std::vector<std::string> file_paths;
  std::vector<Camera> cameras;
  std::vector<Image> images;              // RGB, composited on the background
  std::vector<std::vector<float>> alpha;  // per pixel; all ones for RGB files

  std::size_t size() const noexcept { return cameras.size(); }
};

enum class Placement { Fibonacci, Uniform };

struct DatasetSpec {
  std::size_t n_train = 24;
  std::size_t n_val = 4;
  std::size_t n_test = 4;
  int resolution = 64;
  double camera_angle_x = 0.6911112070083618;
  double radius = 4.0;
  double near = 2.0;
  double far = 6.0;
  std::size_t n_dense = kMinOracleSamples;
  Placement placement = Placement::Fibonacci;
  std::uint64_t seed = 0;
};

// Renders every view with the oracle and writes transforms_<split>.json plus
// <split>/r_<i>.png (RGBA, alpha = accumulated opacity).
void gen_dataset(const AnalyticScene& scene, const DatasetSpec& spec, const std::filesystem::path& dir);

struct LoadOptions {
  Color background = kWhite;
  double near = 2.0;
  double far = 6.0;
};

// Reads transforms_<split>.json and the referenced PNGs. RGBA images are
// composited onto the background as rgb * a + background * (1 - a).
Dataset load_blender(const std::filesystem::path& dir, Split split, const LoadOptions& options = {});

}  // namespace unerf

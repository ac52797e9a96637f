#include "unerf/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "unerf/errors.hpp"

namespace unerf {

namespace fs = std::filesystem;
using json = nlohmann::json;

Color Albedo::at(Vec3 x) const {
  if (kind == Kind::Constant) return primary;
  const auto cell_index = [&](double v) { return static_cast<long long>(std::floor(v / cell)); };
  const long long parity = cell_index(x.x) + cell_index(x.y) + cell_index(x.z);
  return (parity & 1) ? secondary : primary;
}

bool Primitive::contains(Vec3 x) const {
  const Vec3 d = x - center;
  if (kind == Kind::Sphere) return dot(d, d) <= size.x * size.x;
  return std::abs(d.x) <= size.x && std::abs(d.y) <= size.y && std::abs(d.z) <= size.z;
}

void AnalyticScene::validate() const {
  auto in_unit = [](const Color& c) {
    return std::all_of(c.begin(), c.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
  };
  for (std::size_t i = 0; i < primitives.size(); ++i) {
    const Primitive& p = primitives[i];
    if (!(p.density >= 0.0)) throw ContractError("primitive " + std::to_string(i) + ": density must be >= 0");
    if (!in_unit(p.albedo.primary) || !in_unit(p.albedo.secondary)) {
      throw ContractError("primitive " + std::to_string(i) + ": albedo must lie in [0, 1]");
    }
    if (p.albedo.kind == Albedo::Kind::Checker && !(p.albedo.cell > 0.0)) {
      throw ContractError("primitive " + std::to_string(i) + ": checker cell must be positive");
    }
  }
  if (!in_unit(background)) throw ContractError("background must lie in [0, 1]");
}

AnalyticScene AnalyticScene::default_scene() {
  AnalyticScene s;
  Primitive sphere;
  sphere.kind = Primitive::Kind::Sphere;
  sphere.center = {0, 0, 0};
  sphere.size = {1, 1, 1};
  sphere.density = 20.0;
  // Low contrast on purpose: a toy-width field never resolves a bold checker in 5000 steps.
  sphere.albedo = {Albedo::Kind::Checker, {0.57, 0.29, 0.41}, {0.43, 0.31, 0.54}, 0.5};
  s.primitives.push_back(sphere);

  Primitive box;
  box.kind = Primitive::Kind::Box;
  box.center = {0.9, -0.9, 0.6};
  box.size = {0.3, 0.3, 0.3};
  box.density = 20.0;
  box.albedo = {Albedo::Kind::Constant, {0.2, 0.75, 0.3}, {0.2, 0.75, 0.3}, 0.5};
  box.view_tint = 0.1;
  s.primitives.push_back(box);
  s.background = kWhite;
  return s;
}

OracleSample oracle_eval(const AnalyticScene& scene, Vec3 x, Vec3 d) {
  OracleSample out;
  Color acc{0, 0, 0};
  for (const Primitive& p : scene.primitives) {
    if (!p.contains(x)) continue;
    out.sigma += p.density;
    const Color a = p.albedo.at(x);
    const double tint = p.view_tint * dot(d, kTintAxis);
    for (int c = 0; c < 3; ++c) acc[c] += p.density * (a[c] + tint);
  }
  if (out.sigma > 0) {
    for (int c = 0; c < 3; ++c) out.rgb[c] = std::clamp(acc[c] / out.sigma, 0.0, 1.0);
  } else {
    // Zero-density primitives still show their albedo, though nothing renders it.
    for (const Primitive& p : scene.primitives) {
      if (!p.contains(x)) continue;
      const Color a = p.albedo.at(x);
      const double tint = p.view_tint * dot(d, kTintAxis);
      for (int c = 0; c < 3; ++c) out.rgb[c] = std::clamp(a[c] + tint, 0.0, 1.0);
      break;
    }
  }
  return out;
}

template <typename T>
FieldFn<T> oracle_field(const AnalyticScene& scene) {
  return [scene](const SampleSet& s) {
    RadianceOutput<T> out;
    out.sigma = Tensor<T>({s.rays, s.samples});
    out.rgb = Tensor<T>({s.rays * s.samples, 3});
    for (std::size_t r = 0; r < s.rays; ++r) {
      for (std::size_t i = 0; i < s.samples; ++i) {
        const std::size_t k = r * s.samples + i;
        const OracleSample o = oracle_eval(scene, s.positions[k], s.view_dirs[r]);
        out.sigma[k] = static_cast<T>(o.sigma);
        for (int c = 0; c < 3; ++c) out.rgb[k * 3 + c] = static_cast<T>(o.rgb[c]);
      }
    }
    return out;
  };
}

RenderedImage oracle_render(const AnalyticScene& scene, const Camera& camera, std::size_t n_dense) {
  if (n_dense < kMinOracleSamples) {
    throw ContractError("oracle_render: n_dense must be >= " + std::to_string(kMinOracleSamples) + ", got " +
                        std::to_string(n_dense));
  }
  scene.validate();
  RenderOptions options;
  options.n_coarse = n_dense;
  options.n_fine = 0;
  options.deterministic = true;
  options.background = scene.background;
  options.chunk = 512;
  const FieldFn<double> field = oracle_field<double>(scene);
  return render_image<double>(field, field, camera, options);
}

const char* split_name(Split s) noexcept {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw ContractError("unknown split '" + name + "' (expected train, val, test)");
}

namespace {

std::vector<Vec3> fibonacci_sphere(std::size_t n) {
  std::vector<Vec3> pts;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
    const double rad = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(i);
    pts.push_back({rad * std::cos(phi), rad * std::sin(phi), z});
  }
  return pts;
}

Vec3 uniform_on_sphere(Rng& rng) {
  const double z = 2.0 * uniform01(rng) - 1.0;
  const double phi = 2.0 * std::numbers::pi * uniform01(rng);
  const double rad = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {rad * std::cos(phi), rad * std::sin(phi), z};
}

Mat4 camera_pose(Vec3 dir, double radius) {
  // look_at degenerates when the view axis is parallel to +Z.
  const Vec3 up = std::abs(dir.z) > 0.999 ? Vec3{0, 1, 0} : Vec3{0, 0, 1};
  return look_at(dir * radius, {0, 0, 0}, up);
}

json matrix_json(const Mat4& m) {
  json rows = json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({m[4 * r], m[4 * r + 1], m[4 * r + 2], m[4 * r + 3]});
  return rows;
}

}  // namespace

void gen_dataset(const AnalyticScene& scene, const DatasetSpec& spec, const fs::path& dir) {
  const std::size_t total = spec.n_train + spec.n_val + spec.n_test;
  if (total == 0) throw ContractError("gen_dataset: at least one view required");
  if (spec.resolution < 1) throw ContractError("gen_dataset: resolution must be positive");
  scene.validate();

  Rng rng(spec.seed);
  std::vector<Vec3> dirs;
  if (spec.placement == Placement::Fibonacci) {
    dirs = fibonacci_sphere(total);
    // Spread the held-out views over the sphere rather than at one pole.
    std::shuffle(dirs.begin(), dirs.end(), rng);
  } else {
    for (std::size_t i = 0; i < total; ++i) dirs.push_back(uniform_on_sphere(rng));
  }

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("gen_dataset: cannot create " + dir.string() + ": " + ec.message());

  const double focal = focal_from_fov(spec.resolution, spec.camera_angle_x);
  std::size_t next = 0;
  for (Split split : {Split::Train, Split::Val, Split::Test}) {
    const std::size_t count = split == Split::Train ? spec.n_train : split == Split::Val ? spec.n_val : spec.n_test;
    const fs::path sub = dir / split_name(split);
    fs::create_directories(sub, ec);
    if (ec) throw IoError("gen_dataset: cannot create " + sub.string() + ": " + ec.message());

    json manifest;
    manifest["camera_angle_x"] = spec.camera_angle_x;
    manifest["frames"] = json::array();
    for (std::size_t i = 0; i < count; ++i, ++next) {
      Camera cam;
      cam.width = cam.height = spec.resolution;
      cam.focal = focal;
      cam.cam_to_world = camera_pose(dirs[next], spec.radius);
      cam.near = spec.near;
      cam.far = spec.far;
      const RenderedImage shot = oracle_render(scene, cam, spec.n_dense);

      // Straight colour: undo the background blend wherever anything was hit.
      Image rgba(cam.width, cam.height, 4);
      const std::size_t px = static_cast<std::size_t>(cam.width) * cam.height;
      for (std::size_t p = 0; p < px; ++p) {
        const double a = std::clamp(shot.acc[p], 0.0, 1.0);
        for (int c = 0; c < 3; ++c) {
          const double v = shot.rgb.pixels[p * 3 + c];
          const double straight = a > 1e-6 ? (v - (1.0 - a) * scene.background[c]) / a : 0.0;
          rgba.pixels[p * 4 + c] = static_cast<float>(std::clamp(straight, 0.0, 1.0));
        }
        rgba.pixels[p * 4 + 3] = static_cast<float>(a);
      }
      const std::string rel = std::string("./") + split_name(split) + "/r_" + std::to_string(i);
      write_png(dir / (rel + ".png"), rgba);
      manifest["frames"].push_back({{"file_path", rel}, {"transform_matrix", matrix_json(cam.cam_to_world)}});
    }
    const fs::path path = dir / ("transforms_" + std::string(split_name(split)) + ".json");
    std::ofstream out(path);
    if (!out) throw IoError("gen_dataset: cannot write " + path.string());
    out << manifest.dump(2) << '\n';
    if (!out) throw IoError("gen_dataset: write failed for " + path.string());
  }
}

Dataset load_blender(const fs::path& dir, Split split, const LoadOptions& options) {
  const fs::path path = dir / ("transforms_" + std::string(split_name(split)) + ".json");
  std::ifstream in(path);
  if (!in) throw IoError("load_blender: cannot open " + path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (!manifest.is_object() || !manifest.contains("camera_angle_x") || !manifest["camera_angle_x"].is_number()) {
    throw ParseError(path.string() + ": missing numeric camera_angle_x");
  }
  if (!manifest.contains("frames") || !manifest["frames"].is_array()) {
    throw ParseError(path.string() + ": missing frames array");
  }

  Dataset ds;
  ds.split = split;
  ds.camera_angle_x = manifest["camera_angle_x"].get<double>();
  const json& frames = manifest["frames"];
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const json& frame = frames[f];
    const std::string where = path.string() + ": frame " + std::to_string(f);
    if (!frame.is_object() || !frame.contains("file_path") || !frame["file_path"].is_string()) {
      throw ParseError(where + ": missing file_path");
    }
    const json* m = frame.contains("transform_matrix") ? &frame["transform_matrix"] : nullptr;
    if (!m || !m->is_array() || m->size() != 4) throw ParseError(where + ": transform_matrix is not 4x4");
    Mat4 pose{};
    for (std::size_t r = 0; r < 4; ++r) {
      const json& row = (*m)[r];
      if (!row.is_array() || row.size() != 4) throw ParseError(where + ": transform_matrix is not 4x4");
      for (std::size_t c = 0; c < 4; ++c) {
        if (!row[c].is_number()) throw ParseError(where + ": transform_matrix has a non-numeric entry");
        pose[4 * r + c] = row[c].get<double>();
      }
    }

    const std::string rel = frame["file_path"].get<std::string>();
    const fs::path file = dir / (rel + ".png");
    if (!fs::exists(file)) throw IoError(where + ": missing image " + file.string());
    const Image raw = read_png(file);

    Camera cam;
    cam.width = raw.width;
    cam.height = raw.height;
    cam.focal = focal_from_fov(raw.width, ds.camera_angle_x);
    cam.cam_to_world = pose;
    cam.near = options.near;
    cam.far = options.far;

    Image rgb(raw.width, raw.height, 3);
    std::vector<float> alpha(static_cast<std::size_t>(raw.width) * raw.height, 1.0f);
    for (std::size_t p = 0; p < alpha.size(); ++p) {
      const float a = raw.channels == 4 ? raw.pixels[p * 4 + 3] : 1.0f;
      alpha[p] = a;
      for (int c = 0; c < 3; ++c) {
        const float v = raw.pixels[p * raw.channels + c];
        rgb.pixels[p * 3 + c] = v * a + static_cast<float>(options.background[c]) * (1.0f - a);
      }
    }
    ds.file_paths.push_back(rel);
    ds.cameras.push_back(cam);
    ds.images.push_back(std::move(rgb));
    ds.alpha.push_back(std::move(alpha));
  }
  return ds;
}

template FieldFn<float> oracle_field<float>(const AnalyticScene&);
template FieldFn<double> oracle_field<double>(const AnalyticScene&);

}  // namespace unerf

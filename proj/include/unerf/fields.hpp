#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "unerf/gradcheck.hpp"
#include "unerf/graph.hpp"
#include "unerf/rays.hpp"
#include "unerf/resample.hpp"
#include "unerf/tensor.hpp"

namespace unerf {

enum class Variant { Nerf, UnerfConv, UnerfSub };

const char* variant_name(Variant v) noexcept;
// Accepts "nerf", "unerf-conv", "unerf-sub".
Variant parse_variant(const std::string& name);

inline bool is_unet(Variant v) noexcept { return v != Variant::Nerf; }

// Sample counts fed to the U variants must be a multiple of this (three
// stride-2 levels) and at least kUnetMinSamples, so the deepest level keeps
// two anchors for interpolation.
inline constexpr std::size_t kUnetSampleMultiple = 8;
inline constexpr std::size_t kUnetMinSamples = 16;

inline bool valid_unet_samples(std::size_t n) { return n % kUnetSampleMultiple == 0 && n >= kUnetMinSamples; }

struct NetworkConfig {
  Variant variant = Variant::Nerf;
  int width = 256;
  int kernel = 3;  // unerf-conv only
  int pos_freqs = 10;
  int dir_freqs = 4;
  // Re-concatenates the encoded position into the input of trunk layer 5.
  bool skip_injection = true;
  Interp interp = Interp::PositionAware;  // U variants only

  void validate() const;

  // Full-scale layer widths and encodings for `v`.
  static NetworkConfig full(Variant v);
  // Desk-scale widths and encodings for `v`.
  static NetworkConfig toy(Variant v, int width = 32);

  std::size_t pos_width() const { return encoded_width(3, pos_freqs); }
  std::size_t dir_width() const { return encoded_width(3, dir_freqs); }
  std::size_t color_hidden() const { return static_cast<std::size_t>(width) / 2; }
};

bool operator==(const NetworkConfig& a, const NetworkConfig& b);

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
};

template <typename T>
using ParameterSet = std::vector<Parameter<T>>;

template <typename T>
std::size_t total_elements(const ParameterSet<T>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.numel();
  return n;
}

// Network inputs for `rays` rays of `samples` samples each, rows ray-major.
template <typename T>
struct FieldInput {
  std::size_t rays = 0;
  std::size_t samples = 0;
  Tensor<T> pos_enc;            // [rays*samples, pos_width]
  Tensor<T> dir_enc;            // [rays*samples, dir_width]
  std::vector<double> depths;   // rays*samples
};

template <typename T>
FieldInput<T> make_field_input(const SampleSet& samples, const NetworkConfig& config);

template <typename T>
struct RadianceOutput {
  Tensor<T> sigma;  // [rays, samples], >= 0
  Tensor<T> rgb;    // [rays*samples, 3], in [0, 1]
};

template <typename T>
class RadianceField {
 public:
  // Uniform(+-1/sqrt(fan_in)) initialisation from `seed`.
  RadianceField(NetworkConfig config, std::uint64_t seed);

  const NetworkConfig& config() const noexcept { return config_; }
  ParameterSet<T>& params() noexcept { return params_; }
  const ParameterSet<T>& params() const noexcept { return params_; }
  Tensor<T>& param(const std::string& name);
  const Tensor<T>& param(const std::string& name) const;

  // Detached evaluation; records nothing.
  RadianceOutput<T> forward(const FieldInput<T>& input) const;

  // Registers every parameter as a leaf of `graph` (returned in `leaves`, in
  // params() order) and evaluates on the graph.
  RadianceOutput<T> forward(const FieldInput<T>& input, Graph<T>& graph,
                            std::vector<Tensor<T>>& leaves) const;

  // Evaluates with `p` standing in for params() (same order and shapes).
  RadianceOutput<T> forward_with(const FieldInput<T>& input, std::span<const Tensor<T>> p) const;

 private:

  NetworkConfig config_;
  ParameterSet<T> params_;
};

// Parameter count from the layer plan.
std::size_t count_parameters(const NetworkConfig& config);

struct ActivationCount {
  std::size_t trunk = 0;
  std::size_t heads = 0;
  std::size_t total() const noexcept { return trunk + heads; }
};

// Stored activation-function outputs of one forward pass over `rays` rays of
// `samples` samples, from the layer plan.
ActivationCount activation_accounting(const NetworkConfig& config, std::size_t samples, std::size_t rays);

// Central-difference check of d/dparams of a random linear functional of the
// field output (sigma and rgb), in double precision on random rays.
GradCheckReport field_gradient_check(const NetworkConfig& config, std::size_t rays, std::size_t samples,
                                     std::uint64_t seed, const GradCheckOptions& options = {});

}  // namespace unerf

#include "unerf/fields.hpp"

#include <cmath>

#include "unerf/errors.hpp"
#include "unerf/ops.hpp"

namespace unerf {

const char* variant_name(Variant v) noexcept {
  switch (v) {
    case Variant::Nerf: return "nerf";
    case Variant::UnerfConv: return "unerf-conv";
    case Variant::UnerfSub: return "unerf-sub";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  if (name == "nerf") return Variant::Nerf;
  if (name == "unerf-conv") return Variant::UnerfConv;
  if (name == "unerf-sub") return Variant::UnerfSub;
  throw ContractError("unknown variant '" + name + "' (expected nerf, unerf-conv, unerf-sub)");
}

void NetworkConfig::validate() const {
  if (width < 8) throw ContractError("network width must be >= 8, got " + std::to_string(width));
  if (variant == Variant::UnerfConv && kernel < 1) {
    throw ContractError("conv kernel must be >= 1, got " + std::to_string(kernel));
  }
  if (pos_freqs < 0 || dir_freqs < 0) throw ContractError("encoding frequency counts must be >= 0");
}

NetworkConfig NetworkConfig::full(Variant v) {
  NetworkConfig c;
  c.variant = v;
  c.width = 256;
  c.pos_freqs = 10;
  c.dir_freqs = 4;
  c.skip_injection = v == Variant::Nerf;
  return c;
}

NetworkConfig NetworkConfig::toy(Variant v, int width) {
  NetworkConfig c = full(v);
  c.width = width;
  c.pos_freqs = 4;
  c.dir_freqs = 2;
  return c;
}

bool operator==(const NetworkConfig& a, const NetworkConfig& b) {
  return a.variant == b.variant && a.width == b.width &&
         (a.variant != Variant::UnerfConv || a.kernel == b.kernel) && a.pos_freqs == b.pos_freqs &&
         a.dir_freqs == b.dir_freqs && a.skip_injection == b.skip_injection &&
         (a.variant == Variant::Nerf || a.interp == b.interp);
}

namespace {

struct LayerShape {
  std::string name;
  Shape weight;  // [in, out] or conv [k, in, out]
  std::size_t bias;
  std::size_t fan_in;
};

// Layer plan shared by the network constructor and the closed-form counters.
std::vector<LayerShape> layer_plan(const NetworkConfig& c) {
  const std::size_t w = static_cast<std::size_t>(c.width);
  const std::size_t pos = c.pos_width(), dir = c.dir_width();
  std::vector<LayerShape> plan;
  plan.push_back({"l1", {pos, w}, w, pos});
  for (int l = 2; l <= 8; ++l) {
    const std::string name = "l" + std::to_string(l);
    const std::size_t in = (l == 5 && c.skip_injection) ? w + pos : w;
    if (c.variant == Variant::UnerfConv && l <= 4) {
      const std::size_t k = static_cast<std::size_t>(c.kernel);
      plan.push_back({name, {k, w, w}, w, k * w});
    } else {
      plan.push_back({name, {in, w}, w, in});
    }
  }
  plan.push_back({"sigma", {w, 1}, 1, w});
  plan.push_back({"color1", {w + dir, c.color_hidden()}, c.color_hidden(), w + dir});
  plan.push_back({"color2", {c.color_hidden(), 3}, 3, c.color_hidden()});
  return plan;
}

// Row indices of the even samples of each ray.
std::vector<std::size_t> even_rows(std::size_t rays, std::size_t seq_len) {
  std::vector<std::size_t> rows;
  rows.reserve(rays * (seq_len / 2));
  for (std::size_t r = 0; r < rays; ++r)
    for (std::size_t i = 0; i < seq_len; i += 2) rows.push_back(r * seq_len + i);
  return rows;
}

std::vector<double> even_depths(const std::vector<double>& d, std::size_t rays, std::size_t seq_len) {
  std::vector<double> out;
  out.reserve(rays * (seq_len / 2));
  for (std::size_t r = 0; r < rays; ++r)
    for (std::size_t i = 0; i < seq_len; i += 2) out.push_back(d[r * seq_len + i]);
  return out;
}

}  // namespace

template <typename T>
FieldInput<T> make_field_input(const SampleSet& samples, const NetworkConfig& config) {
  FieldInput<T> in;
  in.rays = samples.rays;
  in.samples = samples.samples;
  in.pos_enc = encode_points<T>(samples.positions, config.pos_freqs);
  const Tensor<T> per_ray = encode_points<T>(samples.view_dirs, config.dir_freqs);
  const std::size_t dw = config.dir_width();
  in.dir_enc = Tensor<T>({samples.rays * samples.samples, dw});
  for (std::size_t r = 0; r < samples.rays; ++r)
    for (std::size_t i = 0; i < samples.samples; ++i)
      std::copy_n(per_ray.data() + r * dw, dw, in.dir_enc.data() + (r * samples.samples + i) * dw);
  in.depths = samples.depths;
  return in;
}

template <typename T>
RadianceField<T>::RadianceField(NetworkConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  for (const LayerShape& layer : layer_plan(config_)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.fan_in));
    Tensor<T> w(layer.weight);
    for (T& v : w.values()) v = static_cast<T>((2.0 * uniform01(rng) - 1.0) * bound);
    Tensor<T> b({layer.bias});
    for (T& v : b.values()) v = static_cast<T>((2.0 * uniform01(rng) - 1.0) * bound);
    const bool conv = layer.weight.size() == 3;
    params_.push_back({layer.name + (conv ? ".kernel" : ".w"), std::move(w)});
    params_.push_back({layer.name + ".b", std::move(b)});
  }
}

template <typename T>
Tensor<T>& RadianceField<T>::param(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p.value;
  throw ContractError("no parameter named '" + name + "'");
}

template <typename T>
const Tensor<T>& RadianceField<T>::param(const std::string& name) const {
  return const_cast<RadianceField*>(this)->param(name);
}

template <typename T>
RadianceOutput<T> RadianceField<T>::forward(const FieldInput<T>& input) const {
  std::vector<Tensor<T>> p;
  p.reserve(params_.size());
  for (const auto& param : params_) p.push_back(param.value);
  return forward_with(input, p);
}

template <typename T>
RadianceOutput<T> RadianceField<T>::forward(const FieldInput<T>& input, Graph<T>& graph,
                                            std::vector<Tensor<T>>& leaves) const {
  leaves.clear();
  for (const auto& param : params_) leaves.push_back(graph.leaf(param.value));
  return forward_with(input, leaves);
}

template <typename T>
RadianceOutput<T> RadianceField<T>::forward_with(const FieldInput<T>& in, std::span<const Tensor<T>> p) const {
  using namespace ops;
  if (p.size() != params_.size()) {
    throw DimensionError("expected " + std::to_string(params_.size()) + " parameter tensors, got " +
                         std::to_string(p.size()));
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].shape() != params_[i].value.shape()) {
      throw DimensionError("parameter " + params_[i].name + " has shape " + shape_str(p[i].shape()) + ", expected " +
                           shape_str(params_[i].value.shape()));
    }
  }
  const NetworkConfig& c = config_;
  const std::size_t rays = in.rays, n = in.samples;
  if (in.pos_enc.rank() != 2 || in.pos_enc.dim(0) != rays * n || in.pos_enc.dim(1) != c.pos_width() ||
      in.dir_enc.rank() != 2 || in.dir_enc.dim(0) != rays * n || in.dir_enc.dim(1) != c.dir_width()) {
    throw DimensionError("field input encodings do not match the network configuration");
  }
  if (is_unet(c.variant) && !valid_unet_samples(n)) {
    throw ContractError(std::string(variant_name(c.variant)) + " needs a sample count that is a multiple of " +
                        std::to_string(kUnetSampleMultiple) + " and at least " + std::to_string(kUnetMinSamples) +
                        ", got " + std::to_string(n));
  }

  // Parameters come in layer-plan order: (weight, bias) per layer.
  auto weight = [&](int layer) -> const Tensor<T>& { return p[2 * (layer - 1)]; };
  auto bias = [&](int layer) -> const Tensor<T>& { return p[2 * (layer - 1) + 1]; };
  auto dense = [&](const Tensor<T>& x, int layer) { return relu(linear(x, weight(layer), bias(layer))); };
  constexpr int kSigma = 9, kColor1 = 10, kColor2 = 11;

  Tensor<T> h;
  if (c.variant == Variant::Nerf) {
    h = dense(in.pos_enc, 1);
    for (int l = 2; l <= 8; ++l) h = dense(l == 5 && c.skip_injection ? concat(h, in.pos_enc) : h, l);
  } else {
    if (in.depths.size() != rays * n) throw DimensionError("field input depths do not match samples");
    std::vector<std::size_t> len{n, n / 2, n / 4, n / 8};
    std::vector<std::vector<double>> depths(4);
    depths[0] = in.depths;
    for (int lv = 1; lv < 4; ++lv) depths[lv] = even_depths(depths[lv - 1], rays, len[lv - 1]);

    auto down = [&](const Tensor<T>& x, int layer, std::size_t seq_len) {
      if (c.variant == Variant::UnerfConv) {
        return relu(conv1d(x, weight(layer), bias(layer), seq_len, 2, Padding::Replicate));
      }
      return dense(gather_rows(x, even_rows(rays, seq_len)), layer);
    };
    std::vector<Tensor<T>> skip(4);
    skip[0] = dense(in.pos_enc, 1);
    for (int lv = 1; lv < 4; ++lv) skip[lv] = down(skip[lv - 1], lv + 1, len[lv - 1]);

    h = skip[3];
    for (int lv = 2, layer = 5; lv >= 0; --lv, ++layer) {
      Tensor<T> x = add(upsample_rays(c.interp, h, depths[lv], rays, len[lv]), skip[lv]);
      if (layer == 5 && c.skip_injection) {
        // Encoded positions of this level's samples: every (N / len) sample.
        const std::size_t stride = n / len[lv];
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < rays; ++r)
          for (std::size_t i = 0; i < n; i += stride) rows.push_back(r * n + i);
        x = concat(x, gather_rows(in.pos_enc, rows));
      }
      h = dense(x, layer);
    }
    h = dense(h, 8);
  }

  RadianceOutput<T> out;
  out.sigma = reshape(softplus(linear(h, weight(kSigma), bias(kSigma))), Shape{rays, n});
  const Tensor<T> hidden = relu(linear(concat(h, in.dir_enc), weight(kColor1), bias(kColor1)));
  out.rgb = sigmoid(linear(hidden, weight(kColor2), bias(kColor2)));
  return out;
}

std::size_t count_parameters(const NetworkConfig& config) {
  config.validate();
  std::size_t total = 0;
  for (const LayerShape& layer : layer_plan(config)) total += shape_numel(layer.weight) + layer.bias;
  return total;
}

ActivationCount activation_accounting(const NetworkConfig& config, std::size_t samples, std::size_t rays) {
  config.validate();
  const std::size_t w = static_cast<std::size_t>(config.width);
  const std::size_t n = samples;
  ActivationCount count;
  if (config.variant == Variant::Nerf) {
    count.trunk = 8 * n * w;
  } else {
    if (!valid_unet_samples(n)) {
      throw ContractError("activation_accounting: U variants need a sample count that is a multiple of 8 and at least 16");
    }
    // full, three halvings, back up through n/4 and n/2, two full-res layers
    count.trunk = (n + n / 2 + n / 4 + n / 8 + n / 4 + n / 2 + n + n) * w;
  }
  count.heads = n * (1 + config.color_hidden() + 3);
  count.trunk *= rays;
  count.heads *= rays;
  return count;
}

GradCheckReport field_gradient_check(const NetworkConfig& config, std::size_t rays, std::size_t samples,
                                     std::uint64_t seed, const GradCheckOptions& options) {
  const RadianceField<double> field(config, seed);
  Rng rng(stream_seed(seed, 7));
  RayBatch batch;
  std::vector<double> depths;
  for (std::size_t r = 0; r < rays; ++r) {
    const Vec3 o{uniform01(rng) - 0.5, uniform01(rng) - 0.5, 4.0 + uniform01(rng)};
    const Vec3 target{0.3 * (uniform01(rng) - 0.5), 0.3 * (uniform01(rng) - 0.5), 0.0};
    batch.origins.push_back(o);
    batch.directions.push_back(normalized(target - o));
    batch.near.push_back(2.0);
    batch.far.push_back(6.0);
    const auto t = stratified_samples(2.0, 6.0, samples, true, &rng);
    depths.insert(depths.end(), t.begin(), t.end());
  }
  const SampleSet s = make_sample_set(batch, depths, samples);
  const FieldInput<double> input = make_field_input<double>(s, config);

  Tensor<double> w_sigma({rays, samples}), w_rgb({rays * samples, 3});
  for (double& v : w_sigma.values()) v = 2.0 * uniform01(rng) - 1.0;
  for (double& v : w_rgb.values()) v = 2.0 * uniform01(rng) - 1.0;

  std::vector<Tensor<double>> params;
  for (const auto& p : field.params()) params.push_back(p.value.clone());
  auto fn = [&](std::span<const Tensor<double>> p) {
    const RadianceOutput<double> out = field.forward_with(input, p);
    return ops::add(ops::sum(ops::mul(out.sigma, w_sigma)), ops::sum(ops::mul(out.rgb, w_rgb)));
  };
  return gradient_check(fn, std::move(params), options);
}

template FieldInput<float> make_field_input<float>(const SampleSet&, const NetworkConfig&);
template FieldInput<double> make_field_input<double>(const SampleSet&, const NetworkConfig&);
template class RadianceField<float>;
template class RadianceField<double>;

}  // namespace unerf

#include "unerf/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "unerf/errors.hpp"
#include "unerf/metrics.hpp"
#include "unerf/ops.hpp"

namespace unerf {

namespace fs = std::filesystem;
using json = nlohmann::json;

void TrainConfig::validate() const {
  network.validate();
  if (rays == 0 || n_coarse < 2 || iterations == 0) {
    throw ContractError("rays and iterations must be positive and n_coarse >= 2");
  }
  if (!(lr >= 0.0)) throw ContractError("learning rate must be >= 0");
  if (is_unet(network.variant)) {
    if ((!fine_only && !valid_unet_samples(n_coarse)) || !valid_unet_samples(n_coarse + n_fine)) {
      throw ContractError(std::string(variant_name(network.variant)) + " needs " +
                          (fine_only ? "n_coarse + n_fine" : "n_coarse and n_coarse + n_fine") +
                          " to be multiples of " + std::to_string(kUnetSampleMultiple) + " and at least " +
                          std::to_string(kUnetMinSamples));
    }
  }
  if (fine_only && n_fine == 0) throw ContractError("fine_only needs a fine pass (n_fine > 0)");
  if (!(grad_clip >= 0.0)) throw ContractError("grad_clip must be >= 0");
  if (!(near >= 0.0 && near < far)) throw ContractError("need 0 <= near < far");
}

AdamConfig TrainConfig::adam() const {
  AdamConfig a;
  a.lr = lr;
  a.lr_final = lr == 0.0 ? 0.0 : lr_final;
  a.decay_steps = iterations;
  return a;
}

NetworkConfig TrainConfig::coarse_network() const {
  if (!fine_only) return network;
  NetworkConfig c = network;
  c.variant = Variant::Nerf;
  c.skip_injection = true;
  return c;
}

std::string to_json(const TrainConfig& c) {
  json j;
  j["network"] = {{"variant", variant_name(c.network.variant)},
                  {"width", c.network.width},
                  {"kernel", c.network.kernel},
                  {"pos_freqs", c.network.pos_freqs},
                  {"dir_freqs", c.network.dir_freqs},
                  {"skip_injection", c.network.skip_injection},
                  {"interp", interp_name(c.network.interp)}};
  j["fine_only"] = c.fine_only;
  j["grad_clip"] = c.grad_clip;
  j["rays"] = c.rays;
  j["n_coarse"] = c.n_coarse;
  j["n_fine"] = c.n_fine;
  j["lr"] = c.lr;
  j["lr_final"] = c.lr_final;
  j["iterations"] = c.iterations;
  j["seed"] = c.seed;
  j["eval_every"] = c.eval_every;
  j["eval_views"] = c.eval_views;
  j["log_every"] = c.log_every;
  j["jitter"] = c.jitter;
  j["background"] = c.background;
  j["near"] = c.near;
  j["far"] = c.far;
  j["data_dir"] = c.data_dir;
  return j.dump();
}

TrainConfig train_config_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    TrainConfig c;
    const json& n = j.at("network");
    c.network.variant = parse_variant(n.at("variant").get<std::string>());
    c.network.width = n.at("width").get<int>();
    c.network.kernel = n.at("kernel").get<int>();
    c.network.pos_freqs = n.at("pos_freqs").get<int>();
    c.network.dir_freqs = n.at("dir_freqs").get<int>();
    c.network.skip_injection = n.at("skip_injection").get<bool>();
    c.network.interp = parse_interp(n.at("interp").get<std::string>());
    c.fine_only = j.at("fine_only").get<bool>();
    c.grad_clip = j.at("grad_clip").get<double>();
    c.rays = j.at("rays").get<std::size_t>();
    c.n_coarse = j.at("n_coarse").get<std::size_t>();
    c.n_fine = j.at("n_fine").get<std::size_t>();
    c.lr = j.at("lr").get<double>();
    c.lr_final = j.at("lr_final").get<double>();
    c.iterations = j.at("iterations").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.eval_every = j.at("eval_every").get<std::size_t>();
    c.eval_views = j.at("eval_views").get<std::size_t>();
    c.log_every = j.at("log_every").get<std::size_t>();
    c.jitter = j.at("jitter").get<bool>();
    c.background = j.at("background").get<Color>();
    c.near = j.at("near").get<double>();
    c.far = j.at("far").get<double>();
    c.data_dir = j.at("data_dir").get<std::string>();
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("training config: ") + e.what());
  }
}

template <typename T>
Tensor<T> photometric_loss(const Tensor<T>& coarse_rgb, const Tensor<T>& fine_rgb, const Tensor<T>& target) {
  if (coarse_rgb.shape() != target.shape() || fine_rgb.shape() != target.shape()) {
    throw ContractError("photometric_loss: outputs " + shape_str(coarse_rgb.shape()) + "/" +
                        shape_str(fine_rgb.shape()) + " do not match target " + shape_str(target.shape()));
  }
  const Tensor<T> dc = ops::sub(coarse_rgb, target);
  const Tensor<T> df = ops::sub(fine_rgb, target);
  return ops::add(ops::mean(ops::mul(dc, dc)), ops::mean(ops::mul(df, df)));
}

Model::Model(const TrainConfig& c)
    : config(c), coarse(c.coarse_network(), stream_seed(c.seed, 1)), fine(c.network, stream_seed(c.seed, 2)) {
  config.validate();
}

RenderOptions Model::render_options() const {
  RenderOptions o;
  o.n_coarse = config.n_coarse;
  o.n_fine = config.n_fine;
  o.deterministic = true;
  o.seed = config.seed;
  o.background = config.background;
  return o;
}

RenderedImage Model::render(const Camera& camera) const {
  Camera cam = camera;
  cam.near = config.near;
  cam.far = config.far;
  return render_image<float>(field_fn(coarse), field_fn(fine), cam, render_options());
}

namespace {

LoadOptions load_options(const TrainConfig& c) {
  LoadOptions o;
  o.background = c.background;
  o.near = c.near;
  o.far = c.far;
  return o;
}

}  // namespace

Trainer::Trainer(const TrainConfig& config, Dataset train, Dataset val)
    : model_(config), train_(std::move(train)), val_(std::move(val)), adam_(config.adam()) {
  if (train_.size() == 0) throw ContractError("training set is empty");
  for (std::size_t v = 0; v < train_.size(); ++v) {
    Camera cam = train_.cameras[v];
    cam.near = config.near;
    cam.far = config.far;
    const Image& img = train_.images[v];
    if (img.width != cam.width || img.height != cam.height || img.channels != 3) {
      throw DimensionError("training image " + std::to_string(v) + " does not match its camera");
    }
    const RayBatch rays = generate_rays(cam, all_pixels(cam));
    all_rays_.origins.insert(all_rays_.origins.end(), rays.origins.begin(), rays.origins.end());
    all_rays_.directions.insert(all_rays_.directions.end(), rays.directions.begin(), rays.directions.end());
    all_rays_.near.insert(all_rays_.near.end(), rays.near.begin(), rays.near.end());
    all_rays_.far.insert(all_rays_.far.end(), rays.far.begin(), rays.far.end());
    all_rgb_.insert(all_rgb_.end(), img.pixels.begin(), img.pixels.end());
  }
}

Trainer Trainer::from_config(const TrainConfig& config) {
  config.validate();
  if (config.data_dir.empty()) throw ContractError("training config has no data directory");
  const LoadOptions o = load_options(config);
  return Trainer(config, load_blender(config.data_dir, Split::Train, o), load_blender(config.data_dir, Split::Val, o));
}

TrainBatch Trainer::sample_batch(std::size_t it) const {
  Rng rng(stream_seed(config().seed ^ 0x62617463680aULL, it));
  const std::size_t total = all_rays_.size();
  TrainBatch b;
  b.target = Tensor<float>({config().rays, 3});
  for (std::size_t i = 0; i < config().rays; ++i) {
    const std::size_t k = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(total));
    b.ray_ids.push_back(k);
    b.rays.origins.push_back(all_rays_.origins[k]);
    b.rays.directions.push_back(all_rays_.directions[k]);
    b.rays.near.push_back(all_rays_.near[k]);
    b.rays.far.push_back(all_rays_.far[k]);
    for (int c = 0; c < 3; ++c) b.target[i * 3 + c] = all_rgb_[k * 3 + c];
  }
  return b;
}

StepResult Trainer::step(const TrainBatch& batch) {
  const TrainConfig& c = config();
  const std::size_t count = batch.rays.size();
  if (batch.ray_ids.size() != count || batch.target.shape() != Shape{count, 3}) {
    throw DimensionError("train step: batch rays, ids and targets disagree");
  }
  const std::uint64_t step_seed = stream_seed(c.seed, iteration_);
  std::vector<Rng> rngs;
  rngs.reserve(count);
  for (std::uint64_t id : batch.ray_ids) rngs.emplace_back(stream_seed(step_seed, id));

  Graph<float> g;
  std::vector<Tensor<float>> leaves_c, leaves_f;
  const std::vector<double> depths = coarse_depths(batch.rays, c.n_coarse, c.jitter, rngs);
  const SampleSet cs = make_sample_set(batch.rays, depths, c.n_coarse);
  const RenderResult<float> rc =
      composite(model_.coarse.forward(make_field_input<float>(cs, c.coarse_network()), g, leaves_c), cs, c.background);

  RenderResult<float> rf = rc;
  if (c.n_fine > 0) {
    std::vector<double> w(rc.weights.numel());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<double>(rc.weights[i]);
    const SampleSet fs = make_sample_set(batch.rays, fine_depths(batch.rays, depths, w, c.n_coarse, c.n_fine,
                                                                 !c.jitter, rngs),
                                         c.n_coarse + c.n_fine);
    rf = composite(model_.fine.forward(make_field_input<float>(fs, c.network), g, leaves_f), fs, c.background);
  }
  const Tensor<float> loss = photometric_loss(rc, rf, batch.target);

  StepResult out;
  out.loss = static_cast<double>(loss.item());
  out.activation_elems = g.stats().activation_elements;
  if (!std::isfinite(out.loss)) {
    throw NumericError("non-finite loss at iteration " + std::to_string(iteration_) + "; first non-finite tensor: " +
                       g.first_non_finite().value_or("none recorded"));
  }
  g.backward(loss);

  std::vector<Tensor<float>*> params;
  std::vector<Tensor<float>> grads;
  for (std::size_t i = 0; i < leaves_c.size(); ++i) {
    params.push_back(&model_.coarse.params()[i].value);
    grads.push_back(g.grad(leaves_c[i]));
  }
  if (c.n_fine > 0) {
    for (std::size_t i = 0; i < leaves_f.size(); ++i) {
      params.push_back(&model_.fine.params()[i].value);
      grads.push_back(g.grad(leaves_f[i]));
    }
  } else {
    // No fine pass: the fine network is kept but receives zero gradients.
    for (auto& p : model_.fine.params()) {
      params.push_back(&p.value);
      grads.emplace_back(p.value.shape());
    }
  }
  if (c.grad_clip > 0) {
    double sq = 0;
    for (const auto& gr : grads)
      for (float v : gr.values()) sq += static_cast<double>(v) * v;
    const double norm = std::sqrt(sq);
    if (norm > c.grad_clip) {
      const float scale = static_cast<float>(c.grad_clip / norm);
      for (auto& gr : grads)
        for (float& v : gr.values()) v *= scale;
    }
  }
  out.lr = adam_.step(params, grads);
  ++iteration_;
  return out;
}

EvalResult Trainer::evaluate() const {
  const std::size_t n = config().eval_views == 0 ? val_.size() : std::min(config().eval_views, val_.size());
  if (n == 0) throw ContractError("evaluate: validation set is empty");
  EvalResult r;
  for (std::size_t v = 0; v < n; ++v) {
    const RenderedImage img = model_.render(val_.cameras[v]);
    r.psnr += psnr(img.rgb, val_.images[v]);
    r.ssim += ssim(img.rgb, val_.images[v]);
  }
  r.psnr /= static_cast<double>(n);
  r.ssim /= static_cast<double>(n);
  return r;
}

void write_log_row(std::ostream& out, const LogRow& row) {
  out << row.iteration << ',' << std::setprecision(9) << row.loss << ',' << row.lr << ',';
  if (row.val) out << row.val->psnr << ',' << row.val->ssim;
  else out << ',';
  out << ',' << std::setprecision(6) << row.ms_per_iter << ',' << row.activation_elems << '\n';
}

void Trainer::train(const std::optional<fs::path>& log_csv, const std::function<void(const LogRow&)>& on_log) {
  const TrainConfig& c = config();
  std::ofstream log;
  if (log_csv) {
    const bool fresh = !fs::exists(*log_csv) || fs::file_size(*log_csv) == 0;
    log.open(*log_csv, std::ios::app);
    if (!log) throw IoError("cannot open training log " + log_csv->string());
    if (fresh) log << kTrainLogHeader << '\n';
  }
  using clock = std::chrono::steady_clock;
  double elapsed_ms = 0, loss_sum = 0;
  std::size_t since_log = 0;
  while (iteration_ < c.iterations) {
    const auto t0 = clock::now();
    const StepResult s = step();
    elapsed_ms += std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    loss_sum += s.loss;
    ++since_log;

    const bool last = iteration_ == c.iterations;
    const bool log_now = last || (c.log_every > 0 && iteration_ % c.log_every == 0);
    const bool eval_now = val_.size() > 0 && (last || (c.eval_every > 0 && iteration_ % c.eval_every == 0));
    if (!log_now && !eval_now) continue;
    LogRow row;
    row.iteration = iteration_;
    row.loss = loss_sum / static_cast<double>(since_log);
    row.lr = s.lr;
    row.ms_per_iter = elapsed_ms / static_cast<double>(since_log);
    row.activation_elems = s.activation_elems;
    if (eval_now) row.val = evaluate();
    history_.push_back(row);
    if (log) {
      write_log_row(log, row);
      log.flush();
    }
    if (on_log) on_log(row);
    elapsed_ms = loss_sum = 0;
    since_log = 0;
  }
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ck;
  ck.config = to_json(config());
  ck.counter = iteration_;
  for (const auto& p : model_.coarse.params()) ck.put("coarse/" + p.name, p.value);
  for (const auto& p : model_.fine.params()) ck.put("fine/" + p.name, p.value);
  ck.put("adam/step", std::vector<double>{static_cast<double>(adam_.state().step)});
  for (std::size_t i = 0; i < adam_.state().m.size(); ++i) {
    ck.put("adam/m/" + std::to_string(i), adam_.state().m[i]);
    ck.put("adam/v/" + std::to_string(i), adam_.state().v[i]);
  }
  return ck;
}

void Trainer::save(const fs::path& path) const { save_checkpoint(path, checkpoint()); }

TrainConfig checkpoint_config(const Checkpoint& ckpt, std::optional<Variant> expected) {
  TrainConfig c = train_config_from_json(ckpt.config);
  if (expected && *expected != c.network.variant) {
    throw ContractError(std::string("checkpoint holds variant '") + variant_name(c.network.variant) + "' but '" +
                        variant_name(*expected) + "' was requested");
  }
  return c;
}

namespace {

void restore_params(const Checkpoint& ck, Model& m) {
  for (auto& p : m.coarse.params()) ck.get("coarse/" + p.name, p.value);
  for (auto& p : m.fine.params()) ck.get("fine/" + p.name, p.value);
}

}  // namespace

void Trainer::restore(const Checkpoint& ckpt) {
  const TrainConfig stored = checkpoint_config(ckpt);
  if (!(stored.network == config().network) || stored.fine_only != config().fine_only) {
    throw ContractError(std::string("checkpoint network (") + variant_name(stored.network.variant) + ", width " +
                        std::to_string(stored.network.width) + ") does not match the trainer's (" +
                        variant_name(config().network.variant) + ", width " +
                        std::to_string(config().network.width) + ")");
  }
  restore_params(ckpt, model_);
  auto& st = adam_.state();
  st.m.clear();
  st.v.clear();
  const auto step = ckpt.get_vector("adam/step");
  st.step = step.empty() ? 0 : static_cast<std::size_t>(step[0]);
  for (std::size_t i = 0; ckpt.contains("adam/m/" + std::to_string(i)); ++i) {
    st.m.push_back(ckpt.get_vector("adam/m/" + std::to_string(i)));
    st.v.push_back(ckpt.get_vector("adam/v/" + std::to_string(i)));
  }
  iteration_ = static_cast<std::size_t>(ckpt.counter);
  history_.clear();
}

Model load_model(const fs::path& path, std::optional<Variant> expected) {
  const Checkpoint ck = load_checkpoint(path);
  Model m(checkpoint_config(ck, expected));
  restore_params(ck, m);
  return m;
}

Trainer resume_trainer(const fs::path& path, std::optional<Variant> expected) {
  const Checkpoint ck = load_checkpoint(path);
  Trainer t = Trainer::from_config(checkpoint_config(ck, expected));
  t.restore(ck);
  return t;
}

template Tensor<float> photometric_loss(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&);
template Tensor<double> photometric_loss(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&);

}  // namespace unerf

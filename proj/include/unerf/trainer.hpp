#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "unerf/checkpoint.hpp"
#include "unerf/fields.hpp"
#include "unerf/optimizer.hpp"
#include "unerf/render.hpp"
#include "unerf/scenes.hpp"

namespace unerf {

struct TrainConfig {
  NetworkConfig network = NetworkConfig::toy(Variant::Nerf);
  // U variant on the fine network only; the coarse network is then a NeRF
  // trunk of the same width and encodings.
  bool fine_only = false;
  std::size_t rays = 128;
  std::size_t n_coarse = 32;
  std::size_t n_fine = 32;
  double lr = 5e-4;
  double lr_final = 5e-5;  // reached at the last iteration
  std::size_t iterations = 5000;
  std::uint64_t seed = 0;
  std::size_t eval_every = 500;  // 0: evaluate only at the end
  std::size_t eval_views = 4;    // validation views used, 0 for all
  std::size_t log_every = 100;
  bool jitter = true;  // stratified jitter and random importance draws
  double grad_clip = 0;  // global gradient-norm bound, 0 disables
  Color background = kWhite;
  double near = 2.0;
  double far = 6.0;
  std::string data_dir;

  // Throws ContractError on non-positive counts, lr < 0, or sample counts
  // the U variants cannot split.
  void validate() const;
  AdamConfig adam() const;
  NetworkConfig coarse_network() const;
};

std::string to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& text);

// Mean squared error of each output against the target, summed (1:1).
template <typename T>
Tensor<T> photometric_loss(const Tensor<T>& coarse_rgb, const Tensor<T>& fine_rgb, const Tensor<T>& target);

template <typename T>
Tensor<T> photometric_loss(const RenderResult<T>& coarse, const RenderResult<T>& fine, const Tensor<T>& target) {
  return photometric_loss(coarse.rgb, fine.rgb, target);
}

// Coarse and fine networks of one variant.
struct Model {
  TrainConfig config;
  RadianceField<float> coarse;
  RadianceField<float> fine;

  explicit Model(const TrainConfig& config);

  RenderOptions render_options() const;
  RenderedImage render(const Camera& camera) const;
};

struct TrainBatch {
  RayBatch rays;
  std::vector<std::uint64_t> ray_ids;  // global pixel ids into the training set
  Tensor<float> target;                // [rays, 3]
};

struct StepResult {
  double loss = 0;
  double lr = 0;
  std::size_t activation_elems = 0;  // measured on the tape
};

struct EvalResult {
  double psnr = 0;
  double ssim = 0;
};

struct LogRow {
  std::size_t iteration = 0;
  double loss = 0;
  double lr = 0;
  std::optional<EvalResult> val;
  double ms_per_iter = 0;
  std::size_t activation_elems = 0;
};

inline constexpr const char* kTrainLogHeader = "iteration,loss,lr,val_psnr,val_ssim,ms_per_iter,activation_elems";

class Trainer {
 public:
  Trainer(const TrainConfig& config, Dataset train, Dataset val);

  // Loads the datasets named by the config's data_dir.
  static Trainer from_config(const TrainConfig& config);

  const TrainConfig& config() const noexcept { return model_.config; }
  Model& model() noexcept { return model_; }
  const Model& model() const noexcept { return model_; }
  std::size_t iteration() const noexcept { return iteration_; }
  const Adam<float>& optimizer() const noexcept { return adam_; }
  const std::vector<LogRow>& history() const noexcept { return history_; }
  const Dataset& train_set() const noexcept { return train_; }
  const Dataset& val_set() const noexcept { return val_; }

  // Batch for iteration `it`: depends only on (seed, it).
  TrainBatch sample_batch(std::size_t it) const;

  // One optimizer step on `batch`. Throws NumericError naming the first
  // non-finite tensor when the loss is not finite.
  StepResult step(const TrainBatch& batch);
  StepResult step() { return step(sample_batch(iteration_)); }

  // Mean PSNR/SSIM over the configured validation views.
  EvalResult evaluate() const;

  // Runs until `config().iterations`, appending rows to `log_csv` if given.
  void train(const std::optional<std::filesystem::path>& log_csv = std::nullopt,
             const std::function<void(const LogRow&)>& on_log = {});

  Checkpoint checkpoint() const;
  void save(const std::filesystem::path& path) const;
  // Restores parameters, optimizer state and iteration from `ckpt`.
  void restore(const Checkpoint& ckpt);

 private:
  Model model_;
  Dataset train_;
  Dataset val_;
  RayBatch all_rays_;
  std::vector<float> all_rgb_;
  Adam<float> adam_;
  std::size_t iteration_ = 0;
  std::vector<LogRow> history_;
};

// Reads the config stored in a checkpoint. With `expected`, throws
// ContractError unless the stored variant matches.
TrainConfig checkpoint_config(const Checkpoint& ckpt, std::optional<Variant> expected = std::nullopt);

// Model parameters from a checkpoint written by Trainer::save.
Model load_model(const std::filesystem::path& path, std::optional<Variant> expected = std::nullopt);

// Same config, loaded datasets, restored state.
Trainer resume_trainer(const std::filesystem::path& path, std::optional<Variant> expected = std::nullopt);

void write_log_row(std::ostream& out, const LogRow& row);

}  // namespace unerf

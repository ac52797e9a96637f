#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "unerf/fields.hpp"
#include "unerf/trainer.hpp"

namespace unerf {

struct ExperimentSpec {
  std::string id;
  Variant variant = Variant::Nerf;
  int kernel = 3;
  Interp interp = Interp::PositionAware;
  bool fine_only = false;  // U variant on the fine network only
  std::size_t n_coarse = 32;
  std::size_t n_fine = 32;
  std::size_t rays = 128;
  std::string scene;  // dataset directory
  std::size_t iterations = 250;
  std::uint64_t seed = 0;
  int width = 32;

  // Throws ContractError on an invalid variant/kernel/sample combination and
  // IoError when the scene has no training manifest.
  void validate() const;
  TrainConfig train_config(std::size_t eval_views) const;
};

struct BenchOptions {
  std::size_t warmup = 50;
  std::size_t timed = 200;  // iterations in the median, at least 200
  std::size_t eval_views = 1;
  // Specs on separate workers; timing and peak columns are then reported as 0.
  bool parallel = false;
};

struct BenchRow {
  ExperimentSpec spec;
  std::size_t params = 0;  // coarse + fine
  std::size_t activation_elems = 0;
  std::size_t peak_bytes = 0;
  double ms_per_iter_median = 0;
  double val_psnr = 0;
  double val_ssim = 0;
  std::optional<double> probe_mse;  // interpolation ablation only
};

struct BenchFailure {
  std::string spec_id;
  std::string message;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::vector<BenchFailure> failures;
};

inline constexpr const char* kBenchHeader =
    "spec_id,variant,kernel,interp,n_coarse,n_fine,rays,params,activation_elems,peak_bytes,ms_per_iter_median,"
    "val_psnr,val_ssim";

// Trains and evaluates each spec; a failing spec is reported in `failures`
// and the rest still run.
BenchReport run_benchmark(const std::vector<ExperimentSpec>& specs, const BenchOptions& options = {},
                          const std::function<void(const std::string&)>& progress = {});

// unerf-conv k = 1, 2, 3, unerf-sub and nerf, all from `base`.
std::vector<ExperimentSpec> variant_matrix(const ExperimentSpec& base);

// `base` under position-aware, nearest and average interpolation.
std::vector<ExperimentSpec> interp_matrix(const ExperimentSpec& base);

// Runs interp_matrix of every spec and attaches probe_mse to each row.
// Throws ContractError for NeRF specs.
BenchReport interp_ablation(const std::vector<ExperimentSpec>& specs, const BenchOptions& options = {},
                            const std::function<void(const std::string&)>& progress = {});

// Mean squared interpolation error on affine features sampled at random
// irregular depths: even samples are anchors, odd samples are held out.
double interp_probe_mse(Interp interp, std::uint64_t seed, std::size_t probes = 1000);

// Predicted stored activations of one training step (coarse + fine pass).
std::size_t predicted_step_activations(const TrainConfig& config);

// Columns of kBenchHeader, plus probe_mse when `with_probe`.
void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows, bool with_probe = false);
void write_bench_failures(std::ostream& out, const std::vector<BenchFailure>& failures);

}  // namespace unerf

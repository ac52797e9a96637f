#include "unerf/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <iomanip>
#include <mutex>
#include <thread>

#include "unerf/errors.hpp"
#include "unerf/memory.hpp"
#include "unerf/resample.hpp"

namespace unerf {

namespace fs = std::filesystem;

void ExperimentSpec::validate() const {
  if (id.empty()) throw ContractError("experiment spec needs an id");
  if (variant == Variant::UnerfConv && kernel < 1) {
    throw ContractError(id + ": unerf-conv needs kernel >= 1, got " + std::to_string(kernel));
  }
  train_config(1).validate();
  if (!fs::exists(fs::path(scene) / "transforms_train.json")) {
    throw IoError(id + ": scene '" + scene + "' has no transforms_train.json");
  }
}

TrainConfig ExperimentSpec::train_config(std::size_t eval_views) const {
  TrainConfig c;
  c.network = NetworkConfig::toy(variant, width);
  c.network.kernel = kernel;
  c.network.interp = interp;
  c.fine_only = fine_only;
  c.rays = rays;
  c.n_coarse = n_coarse;
  c.n_fine = n_fine;
  c.iterations = iterations;
  c.seed = seed;
  c.eval_every = 0;
  c.eval_views = eval_views;
  c.log_every = 0;
  c.data_dir = scene;
  return c;
}

std::size_t predicted_step_activations(const TrainConfig& c) {
  std::size_t n = activation_accounting(c.coarse_network(), c.n_coarse, c.rays).total();
  if (c.n_fine > 0) n += activation_accounting(c.network, c.n_coarse + c.n_fine, c.rays).total();
  return n;
}

namespace {

BenchRow run_one(const ExperimentSpec& spec, const BenchOptions& o) {
  spec.validate();
  if (spec.iterations < o.warmup + o.timed) {
    throw ContractError(spec.id + ": " + std::to_string(spec.iterations) + " iterations leave no room for " +
                        std::to_string(o.warmup) + " warmup + " + std::to_string(o.timed) + " timed");
  }
  const TrainConfig cfg = spec.train_config(o.eval_views);
  Trainer trainer = Trainer::from_config(cfg);
  BenchRow row;
  row.spec = spec;
  row.params = count_parameters(cfg.coarse_network()) + count_parameters(cfg.network);

  using clock = std::chrono::steady_clock;
  std::vector<double> times;
  std::size_t base = 0;
  while (trainer.iteration() < cfg.iterations) {
    const std::size_t it = trainer.iteration();
    if (it == o.warmup && !o.parallel) {
      base = MemoryStats::current_bytes();
      MemoryStats::reset_peak();
    }
    const auto t0 = clock::now();
    const StepResult s = trainer.step();
    const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    if (it >= o.warmup && it < o.warmup + o.timed) {
      times.push_back(ms);
      row.activation_elems = s.activation_elems;
    }
    if (it + 1 == o.warmup + o.timed && !o.parallel) row.peak_bytes = MemoryStats::peak_bytes() - base;
  }
  if (!o.parallel && !times.empty()) {
    std::sort(times.begin(), times.end());
    const std::size_t m = times.size();
    row.ms_per_iter_median = m % 2 ? times[m / 2] : 0.5 * (times[m / 2 - 1] + times[m / 2]);
  }
  const EvalResult ev = trainer.evaluate();
  row.val_psnr = ev.psnr;
  row.val_ssim = ev.ssim;
  return row;
}

}  // namespace

BenchReport run_benchmark(const std::vector<ExperimentSpec>& specs, const BenchOptions& o,
                          const std::function<void(const std::string&)>& progress) {
  if (o.timed < 200) throw ContractError("benchmark needs at least 200 timed iterations");
  std::vector<std::optional<BenchRow>> rows(specs.size());
  std::vector<std::optional<std::string>> errors(specs.size());
  std::mutex progress_mutex;
  auto run = [&](std::size_t i) {
    try {
      rows[i] = run_one(specs[i], o);
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(specs[i].id + ": val PSNR " + std::to_string(rows[i]->val_psnr));
      }
    } catch (const std::exception& e) {
      errors[i] = e.what();
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(specs[i].id + " failed: " + e.what());
      }
    }
  };
  if (o.parallel) {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(default_threads(), specs.size()); ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < specs.size();) run(i);
      });
  } else {
    for (std::size_t i = 0; i < specs.size(); ++i) run(i);
  }
  BenchReport report;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (rows[i]) report.rows.push_back(*rows[i]);
    if (errors[i]) report.failures.push_back({specs[i].id.empty() ? "#" + std::to_string(i) : specs[i].id, *errors[i]});
  }
  return report;
}

std::vector<ExperimentSpec> variant_matrix(const ExperimentSpec& base) {
  std::vector<ExperimentSpec> out;
  for (int k = 1; k <= 3; ++k) {
    ExperimentSpec s = base;
    s.id = "unerf-conv-k" + std::to_string(k);
    s.variant = Variant::UnerfConv;
    s.kernel = k;
    out.push_back(s);
  }
  ExperimentSpec sub = base;
  sub.id = "unerf-sub";
  sub.variant = Variant::UnerfSub;
  out.push_back(sub);
  ExperimentSpec nerf = base;
  nerf.id = "nerf";
  nerf.variant = Variant::Nerf;
  out.push_back(nerf);
  return out;
}

std::vector<ExperimentSpec> interp_matrix(const ExperimentSpec& base) {
  std::vector<ExperimentSpec> out;
  for (Interp in : {Interp::PositionAware, Interp::Nearest, Interp::Average}) {
    ExperimentSpec s = base;
    s.interp = in;
    s.id = base.id + "-" + interp_name(in);
    out.push_back(s);
  }
  return out;
}

double interp_probe_mse(Interp interp, std::uint64_t seed, std::size_t probes) {
  Rng rng(seed);
  double total = 0;
  std::size_t count = 0;
  constexpr std::size_t kSamples = 16, kChannels = 4;
  for (std::size_t p = 0; p < probes; ++p) {
    std::vector<double> depths(kSamples);
    for (double& t : depths) t = 2.0 + 4.0 * uniform01(rng);
    std::sort(depths.begin(), depths.end());
    depths.erase(std::unique(depths.begin(), depths.end()), depths.end());
    if (depths.size() < 4) continue;
    double a[kChannels], b[kChannels];
    for (std::size_t c = 0; c < kChannels; ++c) {
      a[c] = 2.0 * uniform01(rng) - 1.0;
      b[c] = 2.0 * uniform01(rng) - 1.0;
    }
    DepthedFeatures<double> all;
    all.depths = depths;
    all.features = Tensor<double>({depths.size(), kChannels});
    for (std::size_t i = 0; i < depths.size(); ++i)
      for (std::size_t c = 0; c < kChannels; ++c) all.features[i * kChannels + c] = a[c] + b[c] * depths[i];
    const auto [anchors, held_out] = split_anchors(all);
    const Tensor<double> got = interpolate(interp, anchors, held_out.depths);
    for (std::size_t i = 0; i < got.numel(); ++i) {
      const double d = got[i] - held_out.features[i];
      total += d * d;
      ++count;
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

BenchReport interp_ablation(const std::vector<ExperimentSpec>& specs, const BenchOptions& o,
                            const std::function<void(const std::string&)>& progress) {
  std::vector<ExperimentSpec> all;
  for (const ExperimentSpec& s : specs) {
    if (!is_unet(s.variant)) throw ContractError("interpolation ablation needs U-variant specs, got '" + s.id + "'");
    for (const ExperimentSpec& v : interp_matrix(s)) all.push_back(v);
  }
  BenchReport report = run_benchmark(all, o, progress);
  for (BenchRow& row : report.rows) row.probe_mse = interp_probe_mse(row.spec.interp, row.spec.seed);
  return report;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows, bool with_probe) {
  out << kBenchHeader << (with_probe ? ",probe_mse" : "") << '\n';
  for (const BenchRow& r : rows) {
    const ExperimentSpec& s = r.spec;
    out << s.id << ',' << variant_name(s.variant) << ',' << (s.variant == Variant::UnerfConv ? s.kernel : 0) << ','
        << (is_unet(s.variant) ? interp_name(s.interp) : "none") << ',' << s.n_coarse << ',' << s.n_fine << ','
        << s.rays << ',' << r.params << ',' << r.activation_elems << ',' << r.peak_bytes << ',' << std::fixed
        << std::setprecision(3) << r.ms_per_iter_median << ',' << std::setprecision(6) << r.val_psnr << ','
        << r.val_ssim;
    if (with_probe) out << ',' << std::scientific << std::setprecision(6) << r.probe_mse.value_or(0.0);
    out << std::defaultfloat << '\n';
  }
}

void write_bench_failures(std::ostream& out, const std::vector<BenchFailure>& failures) {
  out << "spec_id,error\n";
  for (const BenchFailure& f : failures) {
    std::string msg = f.message;
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::string quoted;
    for (char ch : msg) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    out << f.spec_id << ",\"" << quoted << "\"\n";
  }
}

}  // namespace unerf

#include "unerf/cli.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "unerf/bench.hpp"
#include "unerf/errors.hpp"
#include "unerf/metrics.hpp"
#include "unerf/trainer.hpp"

namespace unerf {

namespace fs = std::filesystem;

namespace {

const std::map<std::string, Variant> kVariants{
    {"nerf", Variant::Nerf}, {"unerf-conv", Variant::UnerfConv}, {"unerf-sub", Variant::UnerfSub}};
const std::map<std::string, Interp> kInterps{
    {"position-aware", Interp::PositionAware}, {"nearest", Interp::Nearest}, {"average", Interp::Average}};
const std::map<std::string, Split> kSplits{{"train", Split::Train}, {"val", Split::Val}, {"test", Split::Test}};

struct GenArgs {
  std::string out;
  DatasetSpec spec;
  std::string placement = "fibonacci";
};

struct NetArgs {
  std::string variant = "nerf";
  int width = 32;
  int kernel = 3;
  std::string interp = "position-aware";
  std::optional<bool> skip_injection;
  bool full = false;

  NetworkConfig config() const {
    const Variant v = kVariants.at(variant);
    NetworkConfig c = full ? NetworkConfig::full(v) : NetworkConfig::toy(v, width);
    if (full) c.width = width;
    c.kernel = kernel;
    c.interp = kInterps.at(interp);
    if (skip_injection) c.skip_injection = *skip_injection;
    return c;
  }
};

void add_net_options(CLI::App* cmd, NetArgs& a) {
  cmd->add_option("--variant", a.variant, "Network variant")
      ->transform(CLI::IsMember(kVariants))
      ->capture_default_str();
  cmd->add_option("--width", a.width, "Trunk width")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--kernel", a.kernel, "Convolution kernel size (unerf-conv)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--interp", a.interp, "Upsampling interpolation (U variants)")
      ->transform(CLI::IsMember(kInterps))
      ->capture_default_str();
  cmd->add_option("--skip-injection", a.skip_injection, "Re-inject encoded positions at trunk layer 5");
  cmd->add_flag("--full", a.full, "Full-scale encodings (10/4 frequencies) instead of desk-scale ones");
}

std::optional<Variant> expected_variant(const std::string& name) {
  if (name.empty()) return std::nullopt;
  return kVariants.at(name);
}

int run_gen(const GenArgs& a, std::ostream& out) {
  DatasetSpec spec = a.spec;
  spec.placement = a.placement == "uniform" ? Placement::Uniform : Placement::Fibonacci;
  gen_dataset(AnalyticScene::default_scene(), spec, a.out);
  out << "wrote " << spec.n_train << "/" << spec.n_val << "/" << spec.n_test << " views at " << spec.resolution
      << "x" << spec.resolution << " to " << a.out << '\n';
  return 0;
}

struct TrainArgs {
  NetArgs net;
  TrainConfig cfg;
  std::string data;
  std::string checkpoint;
  std::string log;
  std::string resume;
  bool no_jitter = false;
};

int run_train(TrainArgs& a, std::ostream& out) {
  std::optional<Trainer> trainer;
  if (!a.resume.empty()) {
    trainer.emplace(resume_trainer(a.resume));
    out << "resumed " << a.resume << " at iteration " << trainer->iteration() << '\n';
  } else {
    TrainConfig c = a.cfg;
    c.network = a.net.config();
    c.jitter = !a.no_jitter;
    c.data_dir = fs::absolute(a.data).string();
    trainer.emplace(Trainer::from_config(c));
  }
  const auto log = a.log.empty() ? std::nullopt : std::optional<fs::path>(a.log);
  trainer->train(log, [&](const LogRow& row) {
    out << "iter " << row.iteration << " loss " << row.loss << " lr " << row.lr;
    if (row.val) out << " val_psnr " << row.val->psnr << " val_ssim " << row.val->ssim;
    out << " ms/iter " << row.ms_per_iter << std::endl;
  });
  trainer->save(a.checkpoint);
  out << "saved " << a.checkpoint << '\n';
  return 0;
}

struct RenderArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::size_t camera_index = 0;
  std::string out;
  std::string depth;
  std::string variant;
};

Dataset model_dataset(const Model& m, const std::string& data, Split split) {
  const std::string dir = data.empty() ? m.config.data_dir : data;
  LoadOptions o;
  o.background = m.config.background;
  o.near = m.config.near;
  o.far = m.config.far;
  return load_blender(dir, split, o);
}

int run_render(const RenderArgs& a, std::ostream& out) {
  const Model model = load_model(a.checkpoint, expected_variant(a.variant));
  const Dataset ds = model_dataset(model, a.data, kSplits.at(a.split));
  if (a.camera_index >= ds.size()) {
    throw RangeError("camera index " + std::to_string(a.camera_index) + " is out of range for the " + a.split +
                     " split (" + std::to_string(ds.size()) + " cameras)");
  }
  const RenderedImage img = model.render(ds.cameras[a.camera_index]);
  write_png(a.out, img.rgb);
  out << "wrote " << a.out << '\n';
  if (!a.depth.empty()) {
    Image d(img.rgb.width, img.rgb.height, 3);
    for (std::size_t p = 0; p < img.depth.size(); ++p)
      for (int c = 0; c < 3; ++c) d.pixels[p * 3 + c] = static_cast<float>(img.depth[p]);
    write_pfm(a.depth, d);
    out << "wrote " << a.depth << '\n';
  }
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::size_t views = 0;
  std::string csv;
  std::string variant;
};

int run_eval(const EvalArgs& a, std::ostream& out) {
  const Model model = load_model(a.checkpoint, expected_variant(a.variant));
  const Dataset ds = model_dataset(model, a.data, kSplits.at(a.split));
  const std::size_t n = a.views == 0 ? ds.size() : std::min(a.views, ds.size());
  if (n == 0) throw ContractError("the " + a.split + " split has no views");
  std::ofstream csv;
  if (!a.csv.empty()) {
    csv.open(a.csv);
    if (!csv) throw IoError("cannot write " + a.csv);
    csv << "view,psnr,ssim,masked_psnr\n";
  }
  double sp = 0, ss = 0, sm = 0;
  for (std::size_t v = 0; v < n; ++v) {
    const RenderedImage img = model.render(ds.cameras[v]);
    std::vector<double> mask(ds.alpha[v].begin(), ds.alpha[v].end());
    const double p = psnr(img.rgb, ds.images[v]);
    const double s = ssim(img.rgb, ds.images[v]);
    const double m = masked_psnr(img.rgb, ds.images[v], mask);
    sp += p;
    ss += s;
    sm += m;
    out << "view " << v << " psnr " << p << " ssim " << s << " masked_psnr " << m << '\n';
    if (csv) csv << v << ',' << p << ',' << s << ',' << m << '\n';
  }
  out << "mean psnr " << sp / n << " ssim " << ss / n << " masked_psnr " << sm / n << '\n';
  return 0;
}

struct BenchArgs {
  NetArgs net;
  ExperimentSpec base;
  BenchOptions options;
  std::string matrix = "variants";
  std::string out;
};

fs::path failures_path(const fs::path& csv) {
  fs::path p = csv;
  p.replace_extension();
  p += ".errors.csv";
  return p;
}

int run_bench(BenchArgs& a, std::ostream& out) {
  ExperimentSpec base = a.base;
  const NetworkConfig net = a.net.config();
  base.variant = net.variant;
  base.width = net.width;
  base.kernel = net.kernel;
  base.interp = net.interp;
  base.scene = fs::absolute(base.scene).string();
  if (base.iterations < a.options.warmup + a.options.timed) base.iterations = a.options.warmup + a.options.timed;

  BenchReport report;
  auto progress = [&](const std::string& msg) { out << msg << std::endl; };
  const bool with_probe = a.matrix == "interp";
  if (a.matrix == "variants") {
    report = run_benchmark(variant_matrix(base), a.options, progress);
  } else if (a.matrix == "interp") {
    if (!is_unet(base.variant)) base.variant = Variant::UnerfConv;
    base.id = variant_name(base.variant);
    report = interp_ablation({base}, a.options, progress);
  } else {
    base.id = variant_name(base.variant);
    report = run_benchmark({base}, a.options, progress);
  }

  std::ofstream csv(a.out);
  if (!csv) throw IoError("cannot write " + a.out);
  write_bench_csv(csv, report.rows, with_probe);
  out << "wrote " << a.out << " (" << report.rows.size() << " rows)\n";
  const fs::path fail = failures_path(a.out);
  if (!report.failures.empty()) {
    std::ofstream f(fail);
    write_bench_failures(f, report.failures);
    out << report.failures.size() << " spec(s) failed, see " << fail.string() << '\n';
    return 1;
  }
  std::error_code ec;
  fs::remove(fail, ec);
  return 0;
}

struct GradArgs {
  NetArgs net;
  std::size_t rays = 2;
  std::size_t samples = 16;
  std::uint64_t seed = 0;
  GradCheckOptions options;
};

int run_gradcheck(const GradArgs& a, std::ostream& out) {
  const NetworkConfig c = a.net.config();
  const GradCheckReport r = field_gradient_check(c, a.rays, a.samples, a.seed, a.options);
  out << "variant " << variant_name(c.variant);
  if (c.variant == Variant::UnerfConv) out << " kernel " << c.kernel;
  out << " samples " << a.samples << '\n';
  out << "max relative error " << r.max_rel_error << " (checked " << r.checked << ", excluded " << r.excluded
      << ", tolerance " << a.options.tolerance << ")\n";
  out << (r.passed() ? "PASS" : "FAIL") << '\n';
  return r.passed() ? 0 : 1;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Desk-scale radiance-field lab: NeRF and U-shaped variants", "unerf"};
  app.set_config("--config", "", "TOML/INI file; [section] per subcommand");
  app.require_subcommand(1, 1);
  app.fallthrough(false);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-scene", "Render the analytic scene into a Blender-style dataset");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--train", gen.spec.n_train, "Training views")->capture_default_str();
  gen_cmd->add_option("--val", gen.spec.n_val, "Validation views")->capture_default_str();
  gen_cmd->add_option("--test", gen.spec.n_test, "Test views")->capture_default_str();
  gen_cmd->add_option("--resolution", gen.spec.resolution, "Image width and height")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen_cmd->add_option("--n-dense", gen.spec.n_dense, "Oracle samples per ray (>= 256)")->capture_default_str();
  gen_cmd->add_option("--radius", gen.spec.radius, "Camera distance from the origin")->capture_default_str();
  gen_cmd->add_option("--camera-angle-x", gen.spec.camera_angle_x, "Horizontal field of view")->capture_default_str();
  gen_cmd->add_option("--placement", gen.placement, "Camera placement")
      ->check(CLI::IsMember({"fibonacci", "uniform"}))
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.spec.seed, "Placement seed")->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train coarse and fine networks");
  add_net_options(train_cmd, tr.net);
  auto* data_opt = train_cmd->add_option("--data", tr.data, "Dataset directory");
  train_cmd->add_option("--checkpoint", tr.checkpoint, "Checkpoint to write")->required();
  train_cmd->add_option("--log", tr.log, "Append the training log to this CSV");
  train_cmd->add_option("--resume", tr.resume, "Continue from a checkpoint")->excludes(data_opt);
  train_cmd->add_option("--rays", tr.cfg.rays, "Rays per batch")->capture_default_str();
  train_cmd->add_option("--n-coarse", tr.cfg.n_coarse, "Coarse samples per ray")->capture_default_str();
  train_cmd->add_option("--n-fine", tr.cfg.n_fine, "Importance samples per ray")->capture_default_str();
  auto* iter_opt =
      train_cmd->add_option("--iterations", tr.cfg.iterations, "Training iterations")->capture_default_str();
  train_cmd->add_option("--lr", tr.cfg.lr, "Initial learning rate")->capture_default_str();
  train_cmd->add_option("--lr-final", tr.cfg.lr_final, "Learning rate at the last iteration")->capture_default_str();
  train_cmd->add_option("--seed", tr.cfg.seed, "Seed")->capture_default_str();
  train_cmd->add_option("--eval-every", tr.cfg.eval_every, "Validation cadence (0: end only)")->capture_default_str();
  train_cmd->add_option("--eval-views", tr.cfg.eval_views, "Validation views (0: all)")->capture_default_str();
  train_cmd->add_option("--log-every", tr.cfg.log_every, "Log cadence")->capture_default_str();
  train_cmd->add_flag("--no-jitter", tr.no_jitter, "Deterministic sample placement");
  train_cmd->add_flag("--fine-only", tr.cfg.fine_only, "U variant on the fine network only");
  train_cmd->add_option("--grad-clip", tr.cfg.grad_clip, "Global gradient-norm bound (0: off)")->capture_default_str();

  RenderArgs rd;
  auto* render_cmd = app.add_subcommand("render", "Render one dataset camera from a checkpoint");
  render_cmd->add_option("--checkpoint", rd.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--data", rd.data, "Dataset directory (default: the one trained on)");
  render_cmd->add_option("--split", rd.split, "Camera split")->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  render_cmd->add_option("--camera-index", rd.camera_index, "Camera index in the split")->capture_default_str();
  render_cmd->add_option("--out", rd.out, "Output PNG")->required();
  render_cmd->add_option("--depth", rd.depth, "Also write expected depth as PFM");
  render_cmd->add_option("--variant", rd.variant, "Reject checkpoints of another variant")
      ->check(CLI::IsMember({"nerf", "unerf-conv", "unerf-sub"}));

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "PSNR, SSIM and foreground PSNR on a split");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", ev.data, "Dataset directory (default: the one trained on)");
  eval_cmd->add_option("--split", ev.split, "Split")->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  eval_cmd->add_option("--views", ev.views, "Views to evaluate (0: all)")->capture_default_str();
  eval_cmd->add_option("--csv", ev.csv, "Per-view metrics CSV");
  eval_cmd->add_option("--variant", ev.variant, "Reject checkpoints of another variant")
      ->check(CLI::IsMember({"nerf", "unerf-conv", "unerf-sub"}));

  BenchArgs bn;
  auto* bench_cmd = app.add_subcommand("bench", "Memory/time/quality benchmark matrix");
  add_net_options(bench_cmd, bn.net);
  bench_cmd->add_option("--data", bn.base.scene, "Dataset directory")->required();
  bench_cmd->add_option("--out", bn.out, "Output CSV")->required();
  bench_cmd->add_option("--matrix", bn.matrix, "variants: conv k=1..3, sub, nerf; interp: interpolation ablation; "
                                               "single: the configured variant")
      ->check(CLI::IsMember({"variants", "interp", "single"}))
      ->capture_default_str();
  bench_cmd->add_option("--rays", bn.base.rays, "Rays per batch")->capture_default_str();
  bench_cmd->add_option("--n-coarse", bn.base.n_coarse, "Coarse samples per ray")->capture_default_str();
  bench_cmd->add_option("--n-fine", bn.base.n_fine, "Importance samples per ray")->capture_default_str();
  bench_cmd->add_option("--iterations", bn.base.iterations, "Training iterations per spec")->capture_default_str();
  bench_cmd->add_option("--seed", bn.base.seed, "Seed shared by every spec")->capture_default_str();
  bench_cmd->add_option("--warmup", bn.options.warmup, "Untimed iterations")->capture_default_str();
  bench_cmd->add_option("--timed", bn.options.timed, "Timed iterations (>= 200)")->capture_default_str();
  bench_cmd->add_option("--eval-views", bn.options.eval_views, "Validation views")->capture_default_str();
  bench_cmd->add_flag("--fine-only", bn.base.fine_only, "U variant on the fine network only");
  bench_cmd->add_flag("--parallel", bn.options.parallel, "Run specs concurrently (timing columns become 0)");

  GradArgs gc;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of network gradients");
  add_net_options(grad_cmd, gc.net);
  grad_cmd->add_option("--rays", gc.rays, "Rays")->check(CLI::PositiveNumber)->capture_default_str();
  grad_cmd->add_option("--samples", gc.samples, "Samples per ray")->capture_default_str();
  grad_cmd->add_option("--seed", gc.seed, "Seed")->capture_default_str();
  grad_cmd->add_option("--tolerance", gc.options.tolerance, "Max relative error")->capture_default_str();
  grad_cmd->add_option("--step", gc.options.step, "Central-difference step")->capture_default_str();
  grad_cmd->add_option("--max-elements", gc.options.max_elements_per_input,
                       "Elements checked per tensor (0: all)")
      ->capture_default_str();

  // A resumed run finishes the stored schedule; its length is part of the lr decay.
  train_cmd->get_option("--resume")->excludes(iter_opt);
  app.failure_message(CLI::FailureMessage::help);
  for (CLI::App* sub : app.get_subcommands({})) sub->failure_message(CLI::FailureMessage::help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (gen_cmd->parsed()) return run_gen(gen, out);
    if (train_cmd->parsed()) {
      if (tr.resume.empty() && tr.data.empty()) throw ContractError("train needs --data or --resume");
      return run_train(tr, out);
    }
    if (render_cmd->parsed()) return run_render(rd, out);
    if (eval_cmd->parsed()) return run_eval(ev, out);
    if (bench_cmd->parsed()) return run_bench(bn, out);
    if (grad_cmd->parsed()) return run_gradcheck(gc, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace unerf

#include "unerf/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "unerf/graph.hpp"

namespace unerf {
namespace {
thread_local KinkMonitor* t_monitor = nullptr;
}

KinkMonitor* KinkMonitor::active() noexcept { return t_monitor; }

KinkMonitor::Scope::Scope(KinkMonitor& m) noexcept : prev_(t_monitor) { t_monitor = &m; }

KinkMonitor::Scope::~Scope() { t_monitor = prev_; }

GradCheckReport gradient_check(const ScalarFn& fn, std::vector<Tensor<double>> inputs,
                               const GradCheckOptions& options) {
  GradCheckReport report;
  report.max_rel_error_per_input.assign(inputs.size(), 0.0);

  std::vector<Tensor<double>> analytic;
  {
    Graph<double> graph;
    std::vector<Tensor<double>> leaves;
    for (const auto& in : inputs) leaves.push_back(graph.leaf(in.detach()));
    Tensor<double> loss = fn(leaves);
    if (!loss.attached()) {
      // Output does not depend on any input: every gradient is zero.
      for (const auto& in : inputs) analytic.emplace_back(in.shape());
    } else {
      graph.backward(loss);
      for (const auto& leaf : leaves) analytic.push_back(graph.grad(leaf));
    }
  }

  // Perturb private copies so the caller's tensors are untouched.
  std::vector<Tensor<double>> probe;
  for (const auto& in : inputs) probe.push_back(in.clone());

  auto evaluate = [&](KinkMonitor& monitor) {
    KinkMonitor::Scope scope(monitor);
    return fn(probe).item();
  };

  const double h = options.step;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const std::size_t n = probe[i].numel();
    std::size_t stride = 1;
    if (options.max_elements_per_input && n > options.max_elements_per_input) {
      stride = (n + options.max_elements_per_input - 1) / options.max_elements_per_input;
    }
    for (std::size_t j = 0; j < n; j += stride) {
      double& x = probe[i][j];
      const double saved = x;
      KinkMonitor plus_monitor, minus_monitor;
      x = saved + h;
      const double f_plus = evaluate(plus_monitor);
      x = saved - h;
      const double f_minus = evaluate(minus_monitor);
      x = saved;
      // A zero the perturbation does not move shows up in both signatures.
      if (plus_monitor.signature() != minus_monitor.signature()) {
        ++report.excluded;
        continue;
      }
      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double a = analytic[i][j];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      report.max_rel_error = std::max(report.max_rel_error, rel);
      report.max_rel_error_per_input[i] = std::max(report.max_rel_error_per_input[i], rel);
      if (!(rel < options.tolerance)) report.failures.push_back({i, j, a, numeric, rel});
    }
  }
  return report;
}

}  // namespace unerf

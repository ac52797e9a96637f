#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "unerf/tensor.hpp"

namespace unerf {

// Collects the sign pattern of every relu input evaluated on this thread
// while a Scope is alive. Two evaluations with different signatures crossed
// a kink between them.
class KinkMonitor {
 public:
  void observe(bool positive, bool at_kink) noexcept {
    hash_ = (hash_ ^ (at_kink ? 0x51u : positive ? 0x9eu : 0x3bu)) * 0x100000001b3ull;
    kinks_ += at_kink ? 1 : 0;
  }
  std::uint64_t signature() const noexcept { return hash_; }
  std::size_t kinks() const noexcept { return kinks_; }

  static KinkMonitor* active() noexcept;

  class Scope {
   public:
    explicit Scope(KinkMonitor& m) noexcept;
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    KinkMonitor* prev_;
  };

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ull;
  std::size_t kinks_ = 0;
};

struct GradCheckOptions {
  double tolerance = 1e-5;
  double step = 1e-6;
  // Denominator floor of the relative error, so gradients near zero are
  // compared in absolute terms at this scale.
  double floor = 1e-3;
  // Check at most this many elements per input, evenly strided (0 = all).
  std::size_t max_elements_per_input = 0;
};

struct GradCheckEntry {
  std::size_t input = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<double> max_rel_error_per_input;
  std::size_t checked = 0;
  // Elements whose central difference straddles a relu kink.
  std::size_t excluded = 0;
  std::vector<GradCheckEntry> failures;

  bool passed() const noexcept { return failures.empty(); }
};

// fn must build its result only from ops on the given tensors, so that it
// can run both attached (analytic pass) and detached (perturbed passes).
using ScalarFn = std::function<Tensor<double>(std::span<const Tensor<double>>)>;

GradCheckReport gradient_check(const ScalarFn& fn, std::vector<Tensor<double>> inputs,
                               const GradCheckOptions& options = {});

}  // namespace unerf

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "unerf/tensor.hpp"

namespace unerf {

struct AdamConfig {
  double lr = 5e-4;
  double lr_final = 5e-5;  // reached at decay_steps
  std::size_t decay_steps = 5000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
  // lr * (lr_final / lr)^(step / decay_steps); 0 when lr is 0.
  double rate(std::size_t step) const;
};

// Moments mirror the parameter shapes, flattened.
template <typename T>
struct AdamState {
  std::size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) { config_.validate(); }

  const AdamConfig& config() const noexcept { return config_; }
  AdamState<T>& state() noexcept { return state_; }
  const AdamState<T>& state() const noexcept { return state_; }

  // One bias-corrected step; params[i] and grads[i] must agree in shape.
  // Returns the learning rate used.
  double step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>> grads);

 private:
  AdamConfig config_;
  AdamState<T> state_;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace unerf

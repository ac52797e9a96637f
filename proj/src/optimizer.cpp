#include "unerf/optimizer.hpp"

#include <cmath>
#include <string>

#include "unerf/errors.hpp"

namespace unerf {

void AdamConfig::validate() const {
  if (!(lr >= 0.0) || !(lr_final >= 0.0)) throw ContractError("learning rates must be >= 0");
  if (lr > 0.0 && lr_final == 0.0) throw ContractError("lr_final must be > 0 when lr > 0");
  if (decay_steps == 0) throw ContractError("decay_steps must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ContractError("Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ContractError("Adam epsilon must be positive");
}

double AdamConfig::rate(std::size_t step) const {
  if (lr == 0.0) return 0.0;
  return lr * std::pow(lr_final / lr, static_cast<double>(step) / static_cast<double>(decay_steps));
}

template <typename T>
double Adam<T>::step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>> grads) {
  if (params.size() != grads.size()) throw DimensionError("Adam: one gradient per parameter required");
  if (state_.m.empty()) {
    for (const Tensor<T>* p : params) {
      state_.m.emplace_back(p->numel(), 0.0);
      state_.v.emplace_back(p->numel(), 0.0);
    }
  }
  if (state_.m.size() != params.size()) throw DimensionError("Adam: parameter count changed");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape() || state_.m[i].size() != params[i]->numel()) {
      throw DimensionError("Adam: gradient " + std::to_string(i) + " shape " + shape_str(grads[i].shape()) +
                           " does not match parameter " + shape_str(params[i]->shape()));
    }
  }

  const double lr = config_.rate(state_.step);
  ++state_.step;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state_.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state_.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* p = params[i]->data();
    const T* g = grads[i].data();
    double* m = state_.m[i].data();
    double* v = state_.v[i].data();
    for (std::size_t k = 0; k < params[i]->numel(); ++k) {
      const double gk = static_cast<double>(g[k]);
      m[k] = b1 * m[k] + (1.0 - b1) * gk;
      v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
      if (lr == 0.0) continue;
      p[k] = static_cast<T>(static_cast<double>(p[k]) - lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + config_.eps));
    }
  }
  return lr;
}

template class Adam<float>;
template class Adam<double>;

}  // namespace unerf

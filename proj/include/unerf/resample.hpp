#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "unerf/tensor.hpp"

namespace unerf {

// Features over samples of one ray, each row paired with its depth.
template <typename T>
struct DepthedFeatures {
  std::vector<double> depths;  // strictly increasing
  Tensor<T> features;          // [depths.size(), C]

  std::size_t size() const noexcept { return depths.size(); }
  // Throws ContractError if rows and depths disagree or depths are not
  // strictly increasing.
  void validate() const;
};

enum class Interp { PositionAware, Nearest, Average };

const char* interp_name(Interp interp) noexcept;
// Accepts "position-aware", "nearest", "average".
Interp parse_interp(const std::string& name);

// Each query q reads x[lo[q]] + (x[hi[q]] - x[lo[q]]) * w[q]. Weights depend
// only on depths.
struct InterpPlan {
  std::vector<std::size_t> lo, hi;
  std::vector<double> w;
};

// Position-aware: linear in depth between the bracketing anchors, linear
// extrapolation from the two nearest anchors outside the span, exact copy at
// an anchor depth, f(x0) when the bracketing anchors coincide.
// Nearest: copy the depth-nearest anchor, ties toward the smaller depth.
// Average: unweighted mean of the bracketing (or two nearest) anchors.
InterpPlan plan_interpolation(Interp interp, std::span<const double> anchor_depths,
                              std::span<const double> queries);

// Anchors at even indices, intermediates at odd indices.
std::pair<std::vector<double>, std::vector<double>> split_anchor_depths(std::span<const double> depths);

template <typename T>
std::pair<DepthedFeatures<T>, DepthedFeatures<T>> split_anchors(const DepthedFeatures<T>& src);

// Differentiable w.r.t. anchor features when they are attached to a graph.
template <typename T>
Tensor<T> interpolate(Interp interp, const DepthedFeatures<T>& anchors, std::span<const double> queries);

template <typename T>
Tensor<T> interp_position_aware(const DepthedFeatures<T>& anchors, std::span<const double> queries) {
  return interpolate(Interp::PositionAware, anchors, queries);
}
template <typename T>
Tensor<T> interp_nearest(const DepthedFeatures<T>& anchors, std::span<const double> queries) {
  return interpolate(Interp::Nearest, anchors, queries);
}
template <typename T>
Tensor<T> interp_average(const DepthedFeatures<T>& anchors, std::span<const double> queries) {
  return interpolate(Interp::Average, anchors, queries);
}

// Rows merged in depth order. Throws ContractError on duplicate depths.
template <typename T>
DepthedFeatures<T> interleave(const DepthedFeatures<T>& anchors, const DepthedFeatures<T>& interpolated);

// Doubles the resolution of `coarse` ([rays * m, C], the even-indexed samples
// of each ray) back to the `2m` depths per ray in `fine_depths`: anchors pass
// through and odd samples are interpolated.
template <typename T>
Tensor<T> upsample_rays(Interp interp, const Tensor<T>& coarse, std::span<const double> fine_depths,
                        std::size_t rays, std::size_t fine_len);

}  // namespace unerf

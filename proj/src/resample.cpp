#include "unerf/resample.hpp"

#include <algorithm>
#include <numeric>

#include "unerf/errors.hpp"
#include "unerf/ops.hpp"

namespace unerf {

template <typename T>
void DepthedFeatures<T>::validate() const {
  if (features.rank() == 0 || features.dim(0) != depths.size()) {
    throw ContractError("depthed features: " + std::to_string(depths.size()) + " depths for features " +
                        shape_str(features.shape()));
  }
  for (std::size_t i = 1; i < depths.size(); ++i) {
    if (!(depths[i] > depths[i - 1])) throw ContractError("depthed features: depths must be strictly increasing");
  }
}

const char* interp_name(Interp interp) noexcept {
  switch (interp) {
    case Interp::PositionAware: return "position-aware";
    case Interp::Nearest: return "nearest";
    case Interp::Average: return "average";
  }
  return "?";
}

Interp parse_interp(const std::string& name) {
  if (name == "position-aware") return Interp::PositionAware;
  if (name == "nearest") return Interp::Nearest;
  if (name == "average") return Interp::Average;
  throw ContractError("unknown interpolation '" + name + "' (expected position-aware, nearest, average)");
}

InterpPlan plan_interpolation(Interp interp, std::span<const double> anchor_depths,
                              std::span<const double> queries) {
  const std::size_t m = anchor_depths.size();
  const std::size_t min_anchors = interp == Interp::Nearest ? 1 : 2;
  if (m < min_anchors) {
    throw ContractError(std::string(interp_name(interp)) + " interpolation needs at least " +
                        std::to_string(min_anchors) + " anchors, got " + std::to_string(m));
  }
  InterpPlan plan;
  plan.lo.resize(queries.size());
  plan.hi.resize(queries.size());
  plan.w.resize(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const double x = queries[q];
    // First anchor strictly beyond x.
    const std::size_t above = static_cast<std::size_t>(
        std::upper_bound(anchor_depths.begin(), anchor_depths.end(), x) - anchor_depths.begin());

    if (interp == Interp::Nearest) {
      std::size_t pick;
      if (above == 0) {
        pick = 0;
      } else if (above == m) {
        pick = m - 1;
      } else {
        const double left = x - anchor_depths[above - 1];
        const double right = anchor_depths[above] - x;
        pick = right < left ? above : above - 1;
      }
      plan.lo[q] = plan.hi[q] = pick;
      plan.w[q] = 0.0;
      continue;
    }

    std::size_t lo = above == 0 ? 0 : (above == m ? m - 2 : above - 1);
    std::size_t hi = lo + 1;
    if (interp == Interp::Average) {
      plan.lo[q] = lo;
      plan.hi[q] = hi;
      plan.w[q] = 0.5;
      continue;
    }
    const double x0 = anchor_depths[lo];
    const double x2 = anchor_depths[hi];
    double w = x2 == x0 ? 0.0 : (x - x0) / (x2 - x0);
    if (x == x0) {
      w = 0.0;
    } else if (x == x2) {
      lo = hi;
      w = 0.0;
    }
    plan.lo[q] = lo;
    plan.hi[q] = hi;
    plan.w[q] = w;
  }
  return plan;
}

std::pair<std::vector<double>, std::vector<double>> split_anchor_depths(std::span<const double> depths) {
  if (depths.size() < 2) throw ContractError("split_anchors: need at least 2 samples");
  std::pair<std::vector<double>, std::vector<double>> out;
  for (std::size_t i = 0; i < depths.size(); ++i) (i % 2 == 0 ? out.first : out.second).push_back(depths[i]);
  return out;
}

template <typename T>
std::pair<DepthedFeatures<T>, DepthedFeatures<T>> split_anchors(const DepthedFeatures<T>& src) {
  src.validate();
  auto [anchor_depths, inter_depths] = split_anchor_depths(src.depths);
  std::vector<std::size_t> even, odd;
  for (std::size_t i = 0; i < src.size(); ++i) (i % 2 == 0 ? even : odd).push_back(i);
  return {DepthedFeatures<T>{std::move(anchor_depths), ops::gather_rows(src.features, even)},
          DepthedFeatures<T>{std::move(inter_depths), ops::gather_rows(src.features, odd)}};
}

template <typename T>
Tensor<T> interpolate(Interp interp, const DepthedFeatures<T>& anchors, std::span<const double> queries) {
  anchors.validate();
  const InterpPlan plan = plan_interpolation(interp, anchors.depths, queries);
  if (interp == Interp::Nearest) return ops::gather_rows(anchors.features, plan.lo);
  return ops::lerp_rows(anchors.features, plan.lo, plan.hi, plan.w);
}

template <typename T>
DepthedFeatures<T> interleave(const DepthedFeatures<T>& anchors, const DepthedFeatures<T>& interpolated) {
  if (interpolated.size() == 0) return anchors;
  const std::size_t na = anchors.size(), nb = interpolated.size();
  std::vector<std::size_t> order(na + nb);
  std::iota(order.begin(), order.end(), 0);
  auto depth_of = [&](std::size_t i) { return i < na ? anchors.depths[i] : interpolated.depths[i - na]; };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return depth_of(a) < depth_of(b); });
  DepthedFeatures<T> out;
  out.depths.reserve(na + nb);
  for (std::size_t i : order) out.depths.push_back(depth_of(i));
  for (std::size_t i = 1; i < out.depths.size(); ++i) {
    if (!(out.depths[i] > out.depths[i - 1])) {
      throw ContractError("interleave: duplicate depth " + std::to_string(out.depths[i]));
    }
  }
  out.features = ops::gather_rows(ops::concat_rows(anchors.features, interpolated.features), order);
  return out;
}

template <typename T>
Tensor<T> upsample_rays(Interp interp, const Tensor<T>& coarse, std::span<const double> fine_depths,
                        std::size_t rays, std::size_t fine_len) {
  if (fine_len < 2 || fine_len % 2 != 0) {
    throw ContractError("upsample_rays: fine length must be even, got " + std::to_string(fine_len));
  }
  const std::size_t m = fine_len / 2;
  if (coarse.rank() != 2 || coarse.dim(0) != rays * m || fine_depths.size() != rays * fine_len) {
    throw DimensionError("upsample_rays: coarse " + shape_str(coarse.shape()) + " does not match " +
                         std::to_string(rays) + " rays of " + std::to_string(fine_len) + " samples");
  }
  std::vector<std::size_t> lo(rays * fine_len), hi(rays * fine_len);
  std::vector<double> w(rays * fine_len, 0.0);
  std::vector<double> anchor_depths(m), queries(m);
  for (std::size_t r = 0; r < rays; ++r) {
    const double* d = fine_depths.data() + r * fine_len;
    for (std::size_t j = 0; j < m; ++j) {
      anchor_depths[j] = d[2 * j];
      queries[j] = d[2 * j + 1];
    }
    const InterpPlan plan = plan_interpolation(interp, anchor_depths, queries);
    const std::size_t base = r * m;
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t even = r * fine_len + 2 * j;
      lo[even] = hi[even] = base + j;
      lo[even + 1] = base + plan.lo[j];
      hi[even + 1] = base + plan.hi[j];
      w[even + 1] = plan.w[j];
    }
  }
  // Nearest is a pure row copy.
  if (interp == Interp::Nearest) return ops::gather_rows(coarse, lo);
  return ops::lerp_rows(coarse, lo, hi, w);
}

#define UNERF_INSTANTIATE_RESAMPLE(T)                                                               \
  template struct DepthedFeatures<T>;                                                               \
  template std::pair<DepthedFeatures<T>, DepthedFeatures<T>> split_anchors(const DepthedFeatures<T>&); \
  template Tensor<T> interpolate(Interp, const DepthedFeatures<T>&, std::span<const double>);       \
  template DepthedFeatures<T> interleave(const DepthedFeatures<T>&, const DepthedFeatures<T>&);     \
  template Tensor<T> upsample_rays(Interp, const Tensor<T>&, std::span<const double>, std::size_t,  \
                                   std::size_t);

UNERF_INSTANTIATE_RESAMPLE(float)
UNERF_INSTANTIATE_RESAMPLE(double)

}  // namespace unerf

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "unerf/gradcheck.hpp"
#include "unerf/rays.hpp"
#include "unerf/tensor.hpp"

namespace unerf::testing {

// Random shapes and seeds for every primitive.
struct PrimitiveCase {
  std::string name;
  // Builds inputs from rng and returns the forward function.
  std::function<std::pair<std::vector<Tensor<double>>, ScalarFn>(Rng&, std::uint64_t)> make;
};

std::vector<PrimitiveCase> primitive_cases();

struct PrimitiveSweep {
  bool passed = true;
  double worst = 0;
  std::uint64_t worst_seed = 0;
};

// Gradient check of one primitive over `seeds` random shapes.
PrimitiveSweep primitive_sweep(const PrimitiveCase& pc, std::uint64_t seeds);

}  // namespace unerf::testing

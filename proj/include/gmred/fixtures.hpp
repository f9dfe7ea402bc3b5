#pragma once

#include <cstdint>
#include <vector>

#include "gmred/gaussmix.hpp"

namespace gmred::fixtures {

/// 16-component 1D benchmark mixture. Weights as printed (they sum to 0.9999).
GaussianMixture table1();

/// 10-component 2D benchmark mixture.
GaussianMixture table3();

/// Piecewise-constant level (0, then 3 from index 130, then -1 from 270)
/// plus unit Gaussian noise, 400 samples.
std::vector<Vector> levelshift_series(std::uint64_t seed);

inline constexpr std::uint64_t kDefaultSeed = 20240601;

}  // namespace gmred::fixtures

#include "gmred/fixtures.hpp"

#include <array>
#include <random>

namespace gmred::fixtures {

GaussianMixture table1() {
  // weight, mean, variance
  static constexpr std::array<std::array<double, 3>, 16> rows{{
      {0.30, 0.0, 0.5},
      {0.15, 5.0, 1.0},
      {0.15, -4.0, 1.0},
      {0.05, 0.2, 9.0},
      {0.05, -1.5, 2.0},
      {0.0686, 1.03982, 4.39842},
      {0.03472, -1.55209, 3.78821},
      {0.07578, -1.35090, 2.78963},
      {0.00101, -0.25711, 1.18460},
      {0.00011, 2.00426, 1.14186},
      {0.01699, 1.44357, 1.0},
      {0.00003, -2.15010, 1.02979},
      {0.05787, -0.58808, 1.21395},
      {0.00039, 1.57966, 1.35196},
      {0.02193, 1.87170, 1.12458},
      {0.02257, 0.55285, 1.05299},
  }};
  std::vector<GaussianComponent> comps;
  for (const auto& [w, mu, var] : rows) {
    comps.emplace_back(w, Vector::Constant(1, mu), Matrix::Constant(1, 1, var));
  }
  return GaussianMixture(std::move(comps));
}

GaussianMixture table3() {
  // weight, mu1, mu2, s11, s22, s21
  static constexpr std::array<std::array<double, 6>, 10> rows{{
      {0.30, 0.0, 0.0, 1.0, 1.0, 0.0},
      {0.20, 2.0, 0.0, 4.0, 2.0, 0.0},
      {0.16, 3.0, 3.0, 2.0, 2.0, -0.5},
      {0.11, -4.0, -4.0, 4.0, 4.0, 2.0},
      {0.08, -1.0, 1.0, 9.0, 9.0, 4.0},
      {0.06, 2.0, -4.0, 4.0, 9.0, 2.0},
      {0.04, 0.0, 2.0, 4.0, 1.0, -0.5},
      {0.03, -2.0, 4.0, 9.0, 9.0, 0.0},
      {0.01, -2.0, 0.0, 2.0, 1.0, 0.0},
      {0.01, 1.0, -2.0, 1.0, 1.0, 0.0},
  }};
  std::vector<GaussianComponent> comps;
  for (const auto& [w, m1, m2, s11, s22, s21] : rows) {
    Vector mu(2);
    mu << m1, m2;
    Matrix cov(2, 2);
    cov << s11, s21, s21, s22;
    comps.emplace_back(w, std::move(mu), std::move(cov));
  }
  return GaussianMixture(std::move(comps));
}

std::vector<Vector> levelshift_series(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<Vector> ys;
  ys.reserve(400);
  for (int n = 0; n < 400; ++n) {
    const double level = n < 130 ? 0.0 : (n < 270 ? 3.0 : -1.0);
    ys.push_back(Vector::Constant(1, level + noise(rng)));
  }
  return ys;
}

}  // namespace gmred::fixtures

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "gmred/criteria.hpp"
#include "gmred/gaussmix.hpp"

namespace gmred {

/// x_n = F x_{n-1} + G v_n,  y_n = H x_n + w_n, with mixture noises v and w.
/// Time-invariant. Each noise component carries its own mean.
struct LinearStateSpaceModel {
  Matrix F;
  Matrix G;
  Matrix H;
  GaussianMixture sys_noise;
  GaussianMixture obs_noise;

  int state_dim() const noexcept { return static_cast<int>(F.rows()); }
  int obs_dim() const noexcept { return static_cast<int>(H.rows()); }
  /// Throws ArgumentError on inconsistent dimensions.
  void validate() const;
};

struct FilterOptions {
  std::size_t cap = 8;
  CriterionKind criterion = CriterionKind::PearsonChi2;
  /// Criterion used when `criterion` excludes every pair at some step.
  std::optional<CriterionKind> fallback;
  bool cap_after_predict = false;
  QuadOptions quad;
};

struct FilterRun {
  std::vector<Vector> observations;
  std::vector<GaussianMixture> predicted;  // p(x_n | y_1..y_{n-1})
  std::vector<GaussianMixture> filtered;   // p(x_n | y_1..y_n)
  std::optional<std::vector<GaussianMixture>> smoothed;
  double log_likelihood = 0.0;
  FilterOptions options;
};

/// Order q * l: outer loop over noise components, inner over posterior ones.
GaussianMixture predict_step(const GaussianMixture& posterior, const LinearStateSpaceModel& model);

struct UpdateResult {
  GaussianMixture posterior;
  double log_lik;
};

/// Kalman bank update (Joseph form), outer loop over observation noise
/// components. Components whose normalized weight underflows to zero are
/// dropped.
UpdateResult filter_step(const GaussianMixture& predicted, const Vector& y, const LinearStateSpaceModel& model);

/// Zero mean, covariance 1e4 I.
GaussianMixture default_prior(int state_dim);

FilterRun run_filter(const LinearStateSpaceModel& model, const std::vector<Vector>& ys, const GaussianMixture& prior,
                     const FilterOptions& opts);

/// Two-filter smoother: a backward information-form Gaussian-sum pass,
/// combined with the forward predictions and reduced with the run's options.
FilterRun run_smoother(const FilterRun& run, const LinearStateSpaceModel& model);

/// Random-walk trend: F = G = H = [1],
/// v ~ alpha N(0, tau2) + (1 - alpha) N(0, xi2), w ~ N(0, sigma2).
LinearStateSpaceModel trend_model(double tau2, double xi2, double alpha, double sigma2);

}  // namespace gmred

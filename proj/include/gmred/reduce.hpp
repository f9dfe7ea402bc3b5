#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gmred/criteria.hpp"
#include "gmred/gaussmix.hpp"
#include "gmred/quad.hpp"

namespace gmred {

struct ReductionStep {
  std::size_t order_before = 0;
  std::pair<std::size_t, std::size_t> chosen_pair;
  double score = 0.0;
  /// Criterion that actually selected the pair (differs from the requested
  /// one only when a fallback was used).
  CriterionKind criterion = CriterionKind::PearsonChi2;
  std::optional<double> kl_to_true;
};

struct ReductionTrace {
  std::vector<ReductionStep> steps;
  GaussianMixture final_mixture;
};

/// Every candidate pair was excluded by the criterion. Carries the trace up
/// to the point of failure.
class ReductionStuck : public std::runtime_error {
public:
  ReductionStuck(const std::string& what, CriterionKind kind, std::optional<ReductionTrace> partial = {})
      : std::runtime_error(what), kind_(kind), partial_(std::move(partial)) {}

  CriterionKind criterion() const noexcept { return kind_; }
  const std::optional<ReductionTrace>& partial() const noexcept { return partial_; }

private:
  CriterionKind kind_;
  std::optional<ReductionTrace> partial_;
};

struct StepResult {
  GaussianMixture mixture;
  std::pair<std::size_t, std::size_t> chosen;
  double score;
};

/// One greedy merge: score every pair, merge the minimizer (lexicographic
/// tie-break), keep the other components in order, renormalize.
StepResult reduce_step(const GaussianMixture& m, CriterionKind kind, const ScoringContext& ctx = {});

struct ReduceOptions {
  bool track_kl = false;
  QuadOptions quad;
  /// Used only for steps where `kind` excludes every pair.
  std::optional<CriterionKind> fallback;
};

ReductionTrace reduce_to(const GaussianMixture& m, std::size_t target_order, CriterionKind kind,
                         const ReduceOptions& opts = {});

struct GlobalFitConfig {
  int max_iter = 500;
  double grad_tol = 1e-7;
  int restarts = 3;
  QuadOptions quad;
  std::uint64_t seed = 20240601;
  /// Nodes of the fixed composite Gauss-Legendre rule (per axis) that drives
  /// the optimizer's objective; the reported KL always uses kl_numeric.
  int objective_nodes_1d = 2000;
  int objective_nodes_2d = 160;
};

struct GlobalFitResult {
  GaussianMixture mixture;
  double kl = 0.0;
  double init_kl = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Locally minimizes KL(g || f) over all parameters of an order-`target_order`
/// mixture f, starting from `init` (default: the closest of the Pearson,
/// Kitagawa and Runnalls greedy reductions) with seeded perturbed restarts.
/// Never returns a worse KL than the start. d <= 2.
GlobalFitResult global_kl_fit(const GaussianMixture& g, std::size_t target_order, const GlobalFitConfig& cfg = {},
                              const std::optional<GaussianMixture>& init = std::nullopt);

}  // namespace gmred

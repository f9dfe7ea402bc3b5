#pragma once

// Discretized KL(g || f) as a smooth function of f's unconstrained parameters.
//
// Layout for order m, dimension d: m softmax logits, then per component the
// mean (d values) followed by the lower triangle of its Cholesky factor in
// row-major order, with diagonal entries stored as logs.

#include <vector>

#include "gmred/gaussmix.hpp"
#include "gmred/quad.hpp"

namespace gmred::detail {

int mixture_param_count(int order, int dim);
std::vector<double> pack_mixture(const GaussianMixture& m);
GaussianMixture unpack_mixture(const double* params, int order, int dim);

class KlObjective {
public:
  /// Composite 16-point Gauss-Legendre rule with about `nodes_per_axis` nodes
  /// per axis over the box of `spec`.
  KlObjective(const GaussianMixture& g, const QuadSpec& spec, int nodes_per_axis, int order);

  int num_parameters() const noexcept { return mixture_param_count(order_, dim_); }
  std::size_t num_nodes() const noexcept { return weights_.size(); }

  /// Discretized int g log(g/f) - g + f; gradient written when non-null.
  double evaluate(const double* params, double* gradient) const;

private:
  int dim_;
  int order_;
  std::vector<double> points_;  // num_nodes * dim
  std::vector<double> weights_;
  std::vector<double> log_g_;
};

}  // namespace gmred::detail

#pragma once

// Fast repeated evaluation of a mixture's log density at raw points. Used by
// the quadrature loops, where constructing Eigen vectors per point dominates.

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "gmred/gaussmix.hpp"

namespace gmred::detail {

class MixtureEvaluator {
public:
  explicit MixtureEvaluator(const GaussianMixture& m) : dim_(m.dim()) {
    const double d = static_cast<double>(dim_);
    for (const auto& c : m) {
      Term t;
      t.log_coef = std::log(c.weight()) - 0.5 * (d * std::log(2.0 * std::numbers::pi) + c.log_det_cov());
      t.mean = c.mean();
      t.chol_inv = c.chol_lower().triangularView<Eigen::Lower>().solve(Matrix::Identity(dim_, dim_));
      terms_.push_back(std::move(t));
    }
  }

  int dim() const noexcept { return dim_; }

  double log_density(const double* x) const {
    // streaming log-sum-exp
    double peak = -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (const auto& t : terms_) {
      const double v = t.log_coef - 0.5 * mahalanobis2(t, x);
      if (v > peak) {
        acc = acc * std::exp(peak - v) + 1.0;
        peak = v;
      } else {
        acc += std::exp(v - peak);
      }
    }
    if (!std::isfinite(peak)) return peak;
    return peak + std::log(acc);
  }

private:
  struct Term {
    double log_coef = 0.0;
    Vector mean;
    Matrix chol_inv;
  };

  double mahalanobis2(const Term& t, const double* x) const {
    if (dim_ == 1) {
      const double z = t.chol_inv(0, 0) * (x[0] - t.mean(0));
      return z * z;
    }
    if (dim_ == 2) {
      const double d0 = x[0] - t.mean(0);
      const double d1 = x[1] - t.mean(1);
      const double z0 = t.chol_inv(0, 0) * d0;
      const double z1 = t.chol_inv(1, 0) * d0 + t.chol_inv(1, 1) * d1;
      return z0 * z0 + z1 * z1;
    }
    double acc = 0.0;
    for (int r = 0; r < dim_; ++r) {
      double z = 0.0;
      for (int c = 0; c <= r; ++c) z += t.chol_inv(r, c) * (x[c] - t.mean(c));
      acc += z * z;
    }
    return acc;
  }

  int dim_;
  std::vector<Term> terms_;
};

}  // namespace gmred::detail

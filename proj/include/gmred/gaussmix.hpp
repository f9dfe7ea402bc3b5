#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "gmred/errors.hpp"

namespace gmred {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Cholesky factor of a symmetric matrix, or nullopt when the matrix is not
/// positive definite. This is the only PD test used by the library.
std::optional<Eigen::LLT<Matrix>> try_cholesky(const Matrix& a);

/// log|A| from a successful factorization.
double log_det(const Eigen::LLT<Matrix>& llt);

/// (A + A^T) / 2
Matrix symmetrized(const Matrix& a);

/// One weighted Gaussian term alpha * phi(x | mean, cov).
///
/// The covariance is validated on construction (symmetric to 1e-12 relative,
/// Cholesky succeeds) and its factor is cached, so density evaluation never
/// forms an explicit inverse.
class GaussianComponent {
public:
  GaussianComponent(double weight, Vector mean, Matrix cov);

  double weight() const noexcept { return weight_; }
  const Vector& mean() const noexcept { return mean_; }
  const Matrix& cov() const noexcept { return cov_; }
  int dim() const noexcept { return static_cast<int>(mean_.size()); }

  /// Lower-triangular L with cov = L L^T.
  const Matrix& chol_lower() const noexcept { return chol_; }
  double log_det_cov() const noexcept { return log_det_; }

  /// log phi(x | mean, cov), weight not included.
  double log_pdf(const Eigen::Ref<const Vector>& x) const;
  /// Squared Mahalanobis distance (x - mean)^T cov^{-1} (x - mean).
  double mahalanobis2(const Eigen::Ref<const Vector>& x) const;
  /// cov^{-1} b via the cached factor.
  Vector solve(const Vector& b) const;
  Vector solve(const Matrix& b) const = delete;
  Matrix solve_matrix(const Matrix& b) const;

  GaussianComponent with_weight(double weight) const;

private:
  double weight_;
  Vector mean_;
  Matrix cov_;
  Matrix chol_;
  double log_det_ = 0.0;
};

/// Ordered, nonempty list of components over one dimension.
class GaussianMixture {
public:
  explicit GaussianMixture(std::vector<GaussianComponent> components);
  explicit GaussianMixture(GaussianComponent single);

  int dim() const noexcept { return components_.front().dim(); }
  std::size_t order() const noexcept { return components_.size(); }
  std::span<const GaussianComponent> components() const noexcept { return components_; }
  const GaussianComponent& operator[](std::size_t i) const { return components_[i]; }
  const GaussianComponent& at(std::size_t i) const;

  double total_weight() const;

  auto begin() const noexcept { return components_.begin(); }
  auto end() const noexcept { return components_.end(); }

private:
  std::vector<GaussianComponent> components_;
};

struct Moments {
  Vector mean;
  Matrix cov;
};

/// Derived quantities of a candidate pair merge.
///
/// xi is the moment-preserving merged mean and V the merged covariance;
/// zeta = SigmaJK (S_j^{-1} mu_j + S_k^{-1} mu_k) is the precision-weighted
/// mean with SigmaJK = (S_j^{-1} + S_k^{-1})^{-1}. W = SigmaJK^{-1} - V^{-1}
/// is the precision of the Gaussian factor in f_j f_k / p_jk, and eta its
/// center. When W is not positive definite, eta is left as NaN.
struct MergeGeometry {
  Vector xi;
  Matrix V;
  Vector zeta;
  Matrix SigmaJK;
  Matrix W;
  Vector eta;
  bool wPD = false;
};

/// Mixture density sum_i alpha_i phi(x | mu_i, Sigma_i); returns 0 on underflow.
double density(const GaussianMixture& m, const Eigen::Ref<const Vector>& x);
/// log density, evaluated with a log-sum-exp over components.
double log_density(const GaussianMixture& m, const Eigen::Ref<const Vector>& x);

/// Pooled mean and covariance of the whole mixture (weights taken as given).
Moments mixture_moments(const GaussianMixture& m);

/// Replace two components by the single Gaussian that preserves their
/// combined weight, mean and covariance.
GaussianComponent moment_preserving_merge(const GaussianComponent& cj, const GaussianComponent& ck);

MergeGeometry merge_geometry(const GaussianComponent& cj, const GaussianComponent& ck);

/// Rescale weights to sum to one (compensated sum), preserving order.
GaussianMixture normalize(const GaussianMixture& m);

/// Replace components (j, k), j < k, by their merge at position j.
GaussianMixture merge_pair(const GaussianMixture& m, std::size_t j, std::size_t k);

}  // namespace gmred

#include "gmred/gaussmix.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "gmred/numeric.hpp"

namespace gmred {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kMaxWeight = 1.0 + 1e-9;  // rounding slack on sums of weights

bool is_symmetric(const Matrix& a, double rel_tol) {
  const double scale = std::max(a.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

Eigen::LLT<Matrix> require_cholesky(const Matrix& a, const char* what) {
  auto llt = try_cholesky(a);
  if (!llt) {
    throw NumericError(std::string(what) + " is not positive definite");
  }
  return *std::move(llt);
}

}  // namespace

std::optional<Eigen::LLT<Matrix>> try_cholesky(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0 || !a.allFinite()) return std::nullopt;
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const auto diag = llt.matrixLLT().diagonal();
  if (!(diag.array() > 0.0).all() || !diag.allFinite()) return std::nullopt;
  return llt;
}

double log_det(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

GaussianComponent::GaussianComponent(double weight, Vector mean, Matrix cov)
    : weight_(weight), mean_(std::move(mean)), cov_(std::move(cov)) {
  if (!(weight_ > 0.0 && weight_ <= kMaxWeight)) {
    throw ArgumentError("component weight must lie in (0, 1]");
  }
  if (mean_.size() == 0) throw ArgumentError("component dimension must be positive");
  if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size()) {
    std::ostringstream msg;
    msg << "covariance is " << cov_.rows() << "x" << cov_.cols() << " but mean has length "
        << mean_.size();
    throw ArgumentError(msg.str());
  }
  if (!mean_.allFinite() || !cov_.allFinite()) throw ArgumentError("non-finite component parameters");
  if (!is_symmetric(cov_, kSymmetryTol)) throw ArgumentError("covariance is not symmetric");
  cov_ = symmetrized(cov_);
  auto llt = try_cholesky(cov_);
  if (!llt) throw NumericError("covariance is not positive definite");
  chol_ = llt->matrixL();
  log_det_ = log_det(*llt);
}

double GaussianComponent::mahalanobis2(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != mean_.size()) throw ArgumentError("point dimension does not match component");
  const Vector z = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
  return z.squaredNorm();
}

double GaussianComponent::log_pdf(const Eigen::Ref<const Vector>& x) const {
  const double d = static_cast<double>(mean_.size());
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) + log_det_ + mahalanobis2(x));
}

Vector GaussianComponent::solve(const Vector& b) const {
  const Vector z = chol_.triangularView<Eigen::Lower>().solve(b);
  return chol_.transpose().triangularView<Eigen::Upper>().solve(z);
}

Matrix GaussianComponent::solve_matrix(const Matrix& b) const {
  const Matrix z = chol_.triangularView<Eigen::Lower>().solve(b);
  return chol_.transpose().triangularView<Eigen::Upper>().solve(z);
}

GaussianComponent GaussianComponent::with_weight(double weight) const {
  GaussianComponent out = *this;
  if (!(weight > 0.0 && weight <= kMaxWeight)) {
    throw ArgumentError("component weight must lie in (0, 1]");
  }
  out.weight_ = weight;
  return out;
}

GaussianMixture::GaussianMixture(std::vector<GaussianComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw ArgumentError("mixture needs at least one component");
  const int d = components_.front().dim();
  for (const auto& c : components_) {
    if (c.dim() != d) throw ArgumentError("mixture components have different dimensions");
  }
}

GaussianMixture::GaussianMixture(GaussianComponent single)
    : GaussianMixture(std::vector<GaussianComponent>{std::move(single)}) {}

const GaussianComponent& GaussianMixture::at(std::size_t i) const {
  if (i >= components_.size()) throw ArgumentError("component index out of range");
  return components_[i];
}

double GaussianMixture::total_weight() const {
  CompensatedSum s;
  for (const auto& c : components_) s.add(c.weight());
  return s.value();
}

double log_density(const GaussianMixture& m, const Eigen::Ref<const Vector>& x) {
  if (x.size() != m.dim()) throw ArgumentError("point dimension does not match mixture");
  double peak = -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  terms.reserve(m.order());
  for (const auto& c : m) {
    const double t = std::log(c.weight()) + c.log_pdf(x);
    terms.push_back(t);
    peak = std::max(peak, t);
  }
  if (!std::isfinite(peak)) return peak;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - peak);
  return peak + std::log(acc);
}

double density(const GaussianMixture& m, const Eigen::Ref<const Vector>& x) {
  if (x.size() != m.dim()) throw ArgumentError("point dimension does not match mixture");
  double acc = 0.0;
  for (const auto& c : m) acc += c.weight() * std::exp(c.log_pdf(x));
  return acc;
}

Moments mixture_moments(const GaussianMixture& m) {
  const double total = m.total_weight();
  Vector mean = Vector::Zero(m.dim());
  for (const auto& c : m) mean += c.weight() * c.mean();
  mean /= total;
  Matrix cov = Matrix::Zero(m.dim(), m.dim());
  for (const auto& c : m) {
    const Vector dm = c.mean() - mean;
    cov += c.weight() * (c.cov() + dm * dm.transpose());
  }
  cov /= total;
  return {std::move(mean), symmetrized(cov)};
}

namespace {

// Merged mean and covariance of a weighted pair; the pooled spread uses each
// component's own deviation from the merged mean.
std::pair<Vector, Matrix> merged_moments(const GaussianComponent& cj, const GaussianComponent& ck) {
  const double aj = cj.weight();
  const double ak = ck.weight();
  const double a = aj + ak;
  const Vector xi = (aj * cj.mean() + ak * ck.mean()) / a;
  const Vector dj = cj.mean() - xi;
  const Vector dk = ck.mean() - xi;
  const Matrix v = (aj * (cj.cov() + dj * dj.transpose()) + ak * (ck.cov() + dk * dk.transpose())) / a;
  return {xi, symmetrized(v)};
}

}  // namespace

GaussianComponent moment_preserving_merge(const GaussianComponent& cj, const GaussianComponent& ck) {
  if (cj.dim() != ck.dim()) throw ArgumentError("cannot merge components of different dimension");
  auto [xi, v] = merged_moments(cj, ck);
  return GaussianComponent(cj.weight() + ck.weight(), std::move(xi), std::move(v));
}

MergeGeometry merge_geometry(const GaussianComponent& cj, const GaussianComponent& ck) {
  if (cj.dim() != ck.dim()) throw ArgumentError("cannot pair components of different dimension");
  const int d = cj.dim();
  const Matrix eye = Matrix::Identity(d, d);

  MergeGeometry g;
  std::tie(g.xi, g.V) = merged_moments(cj, ck);

  const Matrix prec_j = symmetrized(cj.solve_matrix(eye));
  const Matrix prec_k = symmetrized(ck.solve_matrix(eye));
  const Matrix prec_jk = prec_j + prec_k;
  const auto llt_jk = require_cholesky(prec_jk, "sum of component precisions");
  g.SigmaJK = symmetrized(llt_jk.solve(eye));
  g.zeta = llt_jk.solve(cj.solve(cj.mean()) + ck.solve(ck.mean()));

  const auto llt_v = require_cholesky(g.V, "merged covariance");
  const Matrix v_inv = symmetrized(llt_v.solve(eye));
  g.W = symmetrized(prec_jk - v_inv);

  const auto llt_w = try_cholesky(g.W);
  g.wPD = llt_w.has_value();
  if (g.wPD) {
    g.eta = llt_w->solve(prec_jk * g.zeta - v_inv * g.xi);
  } else {
    g.eta = Vector::Constant(d, std::numeric_limits<double>::quiet_NaN());
  }
  return g;
}

GaussianMixture normalize(const GaussianMixture& m) {
  const double total = m.total_weight();
  if (!(total > 0.0) || !std::isfinite(total)) throw ArgumentError("total weight must be positive");
  std::vector<GaussianComponent> out;
  out.reserve(m.order());
  for (const auto& c : m) out.push_back(c.with_weight(c.weight() / total));
  return GaussianMixture(std::move(out));
}

GaussianMixture merge_pair(const GaussianMixture& m, std::size_t j, std::size_t k) {
  if (!(j < k && k < m.order())) throw ArgumentError("merge_pair requires j < k < order");
  std::vector<GaussianComponent> out;
  out.reserve(m.order() - 1);
  for (std::size_t i = 0; i < m.order(); ++i) {
    if (i == j) {
      out.push_back(moment_preserving_merge(m[j], m[k]));
    } else if (i != k) {
      out.push_back(m[i]);
    }
  }
  return GaussianMixture(std::move(out));
}

}  // namespace gmred

#include "gmred/criteria.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "gmred/numeric.hpp"

namespace gmred {

namespace {

constexpr double kPearsonClampTol = 1e-10;

Eigen::LLT<Matrix> cholesky_or(const Matrix& a, const char* what) {
  auto llt = try_cholesky(a);
  if (!llt) throw NumericError(std::string(what) + " is not positive definite");
  return *std::move(llt);
}

// d^T A^{-1} d via a Cholesky factor of A.
double quad_form_inv(const Eigen::LLT<Matrix>& llt, const Vector& d) {
  const Vector z = llt.matrixL().solve(d);
  return z.squaredNorm();
}

// int phi(x|a) phi(x|b) dx = phi(mu_a | mu_b, Sigma_a + Sigma_b), in log form.
double log_gaussian_overlap(const GaussianComponent& a, const GaussianComponent& b) {
  const auto llt = cholesky_or(a.cov() + b.cov(), "covariance sum");
  const Vector d = a.mean() - b.mean();
  const double dim = static_cast<double>(a.dim());
  return -0.5 * (dim * std::log(2.0 * std::numbers::pi) + log_det(llt) + quad_form_inv(llt, d));
}

double weighted_overlap_sum(std::span<const GaussianComponent> a, std::span<const GaussianComponent> b) {
  CompensatedSum s;
  for (const auto& ca : a) {
    for (const auto& cb : b) {
      s.add(ca.weight() * cb.weight() * std::exp(log_gaussian_overlap(ca, cb)));
    }
  }
  return s.value();
}

double isd_components(std::span<const GaussianComponent> g, std::span<const GaussianComponent> f) {
  const double gg = weighted_overlap_sum(g, g);
  const double ff = weighted_overlap_sum(f, f);
  const double gf = weighted_overlap_sum(g, f);
  return std::max(0.0, gg + ff - 2.0 * gf);
}

}  // namespace

std::string_view to_string(CriterionKind kind) {
  switch (kind) {
    case CriterionKind::PearsonChi2: return "pearson";
    case CriterionKind::KitagawaWKL: return "kitagawa";
    case CriterionKind::RunnallsBound: return "runnalls";
    case CriterionKind::SalmondTrace: return "salmond";
    case CriterionKind::WilliamsISD: return "isd";
    case CriterionKind::NumericKL: return "numkl";
  }
  return "unknown";
}

CriterionKind parse_criterion(std::string_view name) {
  for (auto kind : {CriterionKind::PearsonChi2, CriterionKind::KitagawaWKL, CriterionKind::RunnallsBound,
                    CriterionKind::SalmondTrace, CriterionKind::WilliamsISD, CriterionKind::NumericKL}) {
    if (to_string(kind) == name) return kind;
  }
  throw ArgumentError("unknown criterion '" + std::string(name) + "'");
}

namespace {

// The ratio integrals and Pearson value, with nullopt standing for an
// unbounded ratio. Greedy scoring hits that case often, so it is not an
// exception on this path.
std::optional<double> try_cross(const GaussianComponent& fj, const GaussianComponent& fk, const MergeGeometry& geom) {
  if (!geom.wPD) return std::nullopt;
  auto llt_gap = try_cholesky(geom.V - geom.SigmaJK);
  if (!llt_gap) return std::nullopt;
  const auto llt_w = cholesky_or(geom.W, "W");
  const auto llt_v = cholesky_or(geom.V, "merged covariance");
  const auto llt_sum = cholesky_or(fj.cov() + fk.cov(), "covariance sum");

  const double log_dets =
      -0.5 * fj.log_det_cov() - 0.5 * fk.log_det_cov() + 0.5 * log_det(llt_v) - 0.5 * log_det(llt_w);
  const double spread = 0.5 * quad_form_inv(*llt_gap, geom.zeta - geom.xi);
  const double separation = -0.5 * quad_form_inv(llt_sum, fj.mean() - fk.mean());
  return std::exp(log_dets + spread + separation);
}

std::optional<double> try_self(const GaussianComponent& fj, const MergeGeometry& geom) {
  const int d = fj.dim();
  const Matrix eye = Matrix::Identity(d, d);
  const auto llt_v = cholesky_or(geom.V, "merged covariance");
  const Matrix w_self = symmetrized(2.0 * fj.solve_matrix(eye) - llt_v.solve(eye));
  auto llt_w = try_cholesky(w_self);
  if (!llt_w) return std::nullopt;
  auto llt_gap = try_cholesky(geom.V - 0.5 * fj.cov());
  if (!llt_gap) return std::nullopt;

  const double log_dets = -fj.log_det_cov() + 0.5 * log_det(llt_v) - 0.5 * log_det(*llt_w);
  const double spread = 0.5 * quad_form_inv(*llt_gap, fj.mean() - geom.xi);
  return std::exp(log_dets + spread);
}

double clamp_pearson(double value) {
  if (value < 0.0) {
    if (value >= -kPearsonClampTol) return 0.0;
    throw NumericError("Pearson chi-square evaluated to a negative value; merge geometry is inconsistent");
  }
  return value;
}

// Scalar form of the same integrals for d = 1.
std::optional<double> try_pearson_1d(const GaussianComponent& cj, const GaussianComponent& ck) {
  const double wj = cj.weight();
  const double wk = ck.weight();
  const double mj = cj.mean()(0);
  const double mk = ck.mean()(0);
  const double sj = cj.cov()(0, 0);
  const double sk = ck.cov()(0, 0);
  const double w = wj + wk;
  const double xi = (wj * mj + wk * mk) / w;
  const double v = (wj * (sj + (mj - xi) * (mj - xi)) + wk * (sk + (mk - xi) * (mk - xi))) / w;

  const double prec_jk = 1.0 / sj + 1.0 / sk;
  const double s_jk = 1.0 / prec_jk;
  const double zeta = s_jk * (mj / sj + mk / sk);
  const double w_cross = prec_jk - 1.0 / v;
  const double gap = v - s_jk;
  if (!(w_cross > 0.0) || !(gap > 0.0)) return std::nullopt;
  const double cross = std::exp(-0.5 * std::log(sj * sk) + 0.5 * std::log(v) - 0.5 * std::log(w_cross) +
                                0.5 * (zeta - xi) * (zeta - xi) / gap - 0.5 * (mj - mk) * (mj - mk) / (sj + sk));

  auto self = [&](double m, double s) -> std::optional<double> {
    const double w_self = 2.0 / s - 1.0 / v;
    const double gap_self = v - 0.5 * s;
    if (!(w_self > 0.0) || !(gap_self > 0.0)) return std::nullopt;
    return std::exp(-std::log(s) + 0.5 * std::log(v) - 0.5 * std::log(w_self) +
                    0.5 * (m - xi) * (m - xi) / gap_self);
  };
  const auto self_j = self(mj, sj);
  if (!self_j) return std::nullopt;
  const auto self_k = self(mk, sk);
  if (!self_k) return std::nullopt;
  const double aj = wj / w;
  const double ak = wk / w;
  return clamp_pearson(aj * aj * *self_j + ak * ak * *self_k + 2.0 * aj * ak * cross - 1.0);
}

std::optional<double> try_pearson(const GaussianComponent& cj, const GaussianComponent& ck) {
  if (cj.dim() != ck.dim()) throw ArgumentError("components have different dimensions");
  if (cj.dim() == 1) return try_pearson_1d(cj, ck);
  const MergeGeometry geom = merge_geometry(cj, ck);
  const auto cross = try_cross(cj, ck, geom);
  if (!cross) return std::nullopt;
  const auto self_j = try_self(cj, geom);
  if (!self_j) return std::nullopt;
  const auto self_k = try_self(ck, geom);
  if (!self_k) return std::nullopt;
  const double total = cj.weight() + ck.weight();
  const double aj = cj.weight() / total;
  const double ak = ck.weight() / total;
  return clamp_pearson(aj * aj * *self_j + ak * ak * *self_k + 2.0 * aj * ak * *cross - 1.0);
}

}  // namespace

double ratio_integral_cross(const GaussianComponent& fj, const GaussianComponent& fk,
                            const MergeGeometry& geom) {
  const auto v = try_cross(fj, fk, geom);
  if (!v) throw UnboundedRatio("W is not positive definite: f_j f_k / p_jk is not integrable");
  return *v;
}

double ratio_integral_self(const GaussianComponent& fj, const MergeGeometry& geom) {
  const auto v = try_self(fj, geom);
  if (!v) throw UnboundedRatio("2 Sigma_j^-1 - V^-1 is not positive definite: f_j^2 / p_jk is not integrable");
  return *v;
}

double pearson_chi2(const GaussianComponent& cj, const GaussianComponent& ck) {
  const auto v = try_pearson(cj, ck);
  if (!v) throw UnboundedRatio("the density ratio of the pair to its merge is unbounded");
  return *v;
}

double kitagawa_wkl(const GaussianComponent& cj, const GaussianComponent& ck) {
  if (cj.dim() != ck.dim()) throw ArgumentError("components have different dimensions");
  const Vector d = ck.mean() - cj.mean();
  const double traces = ck.solve_matrix(cj.cov()).trace() + cj.solve_matrix(ck.cov()).trace();
  const double separation = d.dot(ck.solve(d)) + d.dot(cj.solve(d));
  return cj.weight() * ck.weight() * (traces + separation);
}

double runnalls_bound(const GaussianComponent& cj, const GaussianComponent& ck) {
  const GaussianComponent merged = moment_preserving_merge(cj, ck);
  const double b = 0.5 * ((cj.weight() + ck.weight()) * merged.log_det_cov() - cj.weight() * cj.log_det_cov() -
                          ck.weight() * ck.log_det_cov());
  // Concavity of log det makes b >= 0; round-off can leave a tiny negative.
  return std::max(0.0, b);
}

double salmond_trace(const GaussianComponent& cj, const GaussianComponent& ck, const Matrix& mix_cov) {
  if (cj.dim() != ck.dim() || mix_cov.rows() != cj.dim() || mix_cov.cols() != cj.dim()) {
    throw ArgumentError("dimension mismatch in salmond_trace");
  }
  const auto llt = cholesky_or(mix_cov, "mixture covariance");
  const Vector d = cj.mean() - ck.mean();
  const double scale = cj.weight() * ck.weight() / (cj.weight() + ck.weight());
  // tr(C^{-1} s d d^T) = s d^T C^{-1} d
  return scale * quad_form_inv(llt, d);
}

double williams_isd(const GaussianMixture& g, const GaussianMixture& f) {
  if (g.dim() != f.dim()) throw ArgumentError("mixtures have different dimensions");
  return isd_components(g.components(), f.components());
}

double isd_pair_cost(const GaussianComponent& cj, const GaussianComponent& ck) {
  const GaussianComponent pair[] = {cj, ck};
  const GaussianComponent merged[] = {moment_preserving_merge(cj, ck)};
  return isd_components(pair, merged);
}

std::optional<double> score_components(CriterionKind kind, const GaussianComponent& cj, const GaussianComponent& ck) {
  switch (kind) {
    case CriterionKind::PearsonChi2: return try_pearson(cj, ck);
    case CriterionKind::KitagawaWKL: return kitagawa_wkl(cj, ck);
    case CriterionKind::RunnallsBound: return runnalls_bound(cj, ck);
    case CriterionKind::WilliamsISD: return isd_pair_cost(cj, ck);
    case CriterionKind::SalmondTrace:
    case CriterionKind::NumericKL: break;
  }
  throw ArgumentError("criterion '" + std::string(to_string(kind)) + "' needs the whole mixture");
}

std::optional<double> score_pair(CriterionKind kind, const GaussianMixture& m, std::size_t j, std::size_t k,
                                 const ScoringContext& ctx) {
  if (!(j < k && k < m.order())) throw ArgumentError("score_pair requires 0 <= j < k < order");
  const auto& cj = m[j];
  const auto& ck = m[k];
  switch (kind) {
    case CriterionKind::SalmondTrace: return salmond_trace(cj, ck, mixture_moments(m).cov);
    case CriterionKind::NumericKL: {
      const GaussianMixture& g = ctx.reference ? *ctx.reference : m;
      if (g.dim() != m.dim()) throw ArgumentError("reference mixture has a different dimension");
      return kl_numeric(g, merge_pair(m, j, k), make_quad_spec(g, ctx.quad));
    }
    default: return score_components(kind, cj, ck);
  }
}

}  // namespace gmred

#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "gmred/gaussmix.hpp"
#include "gmred/quad.hpp"

namespace gmred {

enum class CriterionKind {
  PearsonChi2,
  KitagawaWKL,
  RunnallsBound,
  SalmondTrace,
  WilliamsISD,
  NumericKL,
};

/// CLI spelling: pearson, kitagawa, runnalls, salmond, isd, numkl.
std::string_view to_string(CriterionKind kind);
CriterionKind parse_criterion(std::string_view name);

/// int f_j f_k / p_jk dx for the merge density p_jk = N(xi, V), weights excluded.
/// Throws UnboundedRatio when geom.wPD is false.
double ratio_integral_cross(const GaussianComponent& fj, const GaussianComponent& fk,
                            const MergeGeometry& geom);

/// int f_j^2 / p_jk dx. Requires 2 Sigma_j^{-1} - V^{-1} to be positive definite,
/// otherwise throws UnboundedRatio.
double ratio_integral_self(const GaussianComponent& fj, const MergeGeometry& geom);

/// Pearson chi-square divergence of the renormalized pair q = a_j f_j + a_k f_k
/// from its moment-preserving merge. Throws UnboundedRatio when any of the
/// three ratio integrals diverges.
double pearson_chi2(const GaussianComponent& cj, const GaussianComponent& ck);

/// Weighted symmetric KL of two components (trace form in d > 1).
double kitagawa_wkl(const GaussianComponent& cj, const GaussianComponent& ck);

/// Upper bound on the KL increase caused by merging the pair.
double runnalls_bound(const GaussianComponent& cj, const GaussianComponent& ck);

/// tr(mix_cov^{-1} dW): between-component variance lost by the merge, measured
/// against the covariance of the whole current mixture.
double salmond_trace(const GaussianComponent& cj, const GaussianComponent& ck, const Matrix& mix_cov);

/// Closed-form integrated squared difference int (g - f)^2 dx. Weights are
/// used as given, so unnormalized partial sums are accepted.
double williams_isd(const GaussianMixture& g, const GaussianMixture& f);

/// ISD between the weighted pair and its merge; the pairwise form of the above.
double isd_pair_cost(const GaussianComponent& cj, const GaussianComponent& ck);

/// True for criteria that depend only on the two components being merged.
constexpr bool is_pair_local(CriterionKind kind) {
  return kind != CriterionKind::SalmondTrace && kind != CriterionKind::NumericKL;
}

/// Score of a pair-local criterion, nullopt when the pair is excluded.
/// Throws ArgumentError for criteria that need the whole mixture.
std::optional<double> score_components(CriterionKind kind, const GaussianComponent& cj, const GaussianComponent& ck);

struct ScoringContext {
  /// Reference density g for NumericKL. When null, the mixture being scored is used.
  const GaussianMixture* reference = nullptr;
  QuadOptions quad;
};

/// Score of merging components (j, k) of `m`, or nullopt when the pair is
/// excluded (unbounded Pearson ratio). Requires j < k < order.
std::optional<double> score_pair(CriterionKind kind, const GaussianMixture& m, std::size_t j,
                                 std::size_t k, const ScoringContext& ctx = {});

}  // namespace gmred

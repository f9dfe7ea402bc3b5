#pragma once

#include <functional>
#include <utility>

#include "gmred/gaussmix.hpp"

namespace gmred {

/// Integration box and accuracy controls. Only d = 1 (adaptive Simpson) and
/// d = 2 (Gauss-Legendre tensor rule) are supported.
struct QuadSpec {
  Vector lo;
  Vector hi;
  double rel_tol = 1e-9;
  double abs_tol = 1e-20;
  int max_depth = 40;
  int nodes_per_axis = 400;
  long max_evals = 20'000'000;
};

/// Settings that do not depend on the integrand: used to build a QuadSpec from
/// a mixture's default box.
struct QuadOptions {
  double rel_tol = 1e-9;
  int nodes_per_axis = 400;
  double box_k = 10.0;
};

using Integrand = std::function<double(const Vector&)>;

double integrate(const Integrand& f, const QuadSpec& spec);

/// 1D adaptive Simpson with `initial_panels` uniform starting panels.
double integrate_1d(const std::function<double(double)>& f, double lo, double hi, double rel_tol,
                    double abs_tol, int max_depth, long max_evals, int initial_panels = 64);

/// Gauss-Legendre nodes and weights on [-1, 1].
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n);

/// Componentwise min/max of mu_i -+ k sqrt(diag Sigma_i).
std::pair<Vector, Vector> default_box(const GaussianMixture& m, double k = 10.0);

QuadSpec make_quad_spec(const GaussianMixture& m, const QuadOptions& opts = {});

/// KL divergence I(g; f) = int g log(g / f).
double kl_numeric(const GaussianMixture& g, const GaussianMixture& f, const QuadSpec& spec);
/// int (g - f)^2
double isd_numeric(const GaussianMixture& g, const GaussianMixture& f, const QuadSpec& spec);
/// Pearson chi-square int q^2 / p - 1, integrated as int (q - p)^2 / p.
double pearson_numeric(const GaussianMixture& q, const GaussianMixture& p, const QuadSpec& spec);

}  // namespace gmred

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <ceres/ceres.h>

#include "evaluator.hpp"
#include "global_fit_objective.hpp"
#include "gmred/reduce.hpp"

namespace gmred {

namespace detail {

namespace {

constexpr int kPanelNodes = 16;
constexpr double kLogFloor = -690.7755278982137;  // log(1e-300)

std::vector<double> composite_axis(double lo, double hi, int nodes, std::vector<double>& weights) {
  const int panels = std::max(1, nodes / kPanelNodes);
  const auto& [gl_x, gl_w] = gauss_legendre(kPanelNodes);
  const double width = (hi - lo) / panels;
  std::vector<double> xs;
  weights.clear();
  for (int p = 0; p < panels; ++p) {
    const double a = lo + p * width;
    for (int i = 0; i < kPanelNodes; ++i) {
      xs.push_back(a + 0.5 * width * (gl_x[i] + 1.0));
      weights.push_back(0.5 * width * gl_w[i]);
    }
  }
  return xs;
}

struct Unpacked {
  std::vector<double> alpha;
  std::vector<Vector> mean;
  std::vector<Matrix> chol;
  std::vector<Matrix> chol_inv;
  std::vector<double> log_coef;  // log alpha - d/2 log 2pi - log|L|
};

Unpacked unpack(const double* p, int order, int dim) {
  Unpacked u;
  double peak = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < order; ++i) peak = std::max(peak, p[i]);
  double total = 0.0;
  for (int i = 0; i < order; ++i) total += std::exp(p[i] - peak);
  const double log_total = peak + std::log(total);
  const double half_log_2pi = 0.5 * dim * std::log(2.0 * std::numbers::pi);
  const double* q = p + order;
  for (int i = 0; i < order; ++i) {
    const double log_alpha = p[i] - log_total;
    u.alpha.push_back(std::exp(log_alpha));
    Vector mu(dim);
    for (int r = 0; r < dim; ++r) mu(r) = *q++;
    Matrix l = Matrix::Zero(dim, dim);
    double log_det_l = 0.0;
    for (int r = 0; r < dim; ++r) {
      for (int c = 0; c <= r; ++c) {
        if (r == c) {
          log_det_l += *q;
          l(r, c) = std::exp(*q++);
        } else {
          l(r, c) = *q++;
        }
      }
    }
    u.chol_inv.push_back(l.triangularView<Eigen::Lower>().solve(Matrix::Identity(dim, dim)));
    u.mean.push_back(std::move(mu));
    u.chol.push_back(std::move(l));
    u.log_coef.push_back(log_alpha - half_log_2pi - log_det_l);
  }
  return u;
}

}  // namespace

int mixture_param_count(int order, int dim) { return order * (1 + dim + dim * (dim + 1) / 2); }

std::vector<double> pack_mixture(const GaussianMixture& m) {
  std::vector<double> out;
  for (const auto& c : m) out.push_back(std::log(c.weight()));
  for (const auto& c : m) {
    for (int r = 0; r < c.dim(); ++r) out.push_back(c.mean()(r));
    const Matrix& l = c.chol_lower();
    for (int r = 0; r < c.dim(); ++r) {
      for (int col = 0; col <= r; ++col) out.push_back(r == col ? std::log(l(r, col)) : l(r, col));
    }
  }
  return out;
}

GaussianMixture unpack_mixture(const double* params, int order, int dim) {
  const Unpacked u = unpack(params, order, dim);
  std::vector<GaussianComponent> comps;
  for (int i = 0; i < order; ++i) {
    comps.emplace_back(u.alpha[i], u.mean[i], symmetrized(u.chol[i] * u.chol[i].transpose()));
  }
  return normalize(GaussianMixture(std::move(comps)));
}

KlObjective::KlObjective(const GaussianMixture& g, const QuadSpec& spec, int nodes_per_axis, int order)
    : dim_(g.dim()), order_(order) {
  if (dim_ > 2) throw ArgumentError("global KL fit supports d <= 2");
  const MixtureEvaluator eg(g);
  std::vector<double> wx, wy;
  const auto xs = composite_axis(spec.lo(0), spec.hi(0), nodes_per_axis, wx);
  std::vector<double> ys{0.0};
  if (dim_ == 2) {
    ys = composite_axis(spec.lo(1), spec.hi(1), nodes_per_axis, wy);
  } else {
    wy = {1.0};
  }
  double pt[2];
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < ys.size(); ++j) {
      pt[0] = xs[i];
      pt[1] = ys[j];
      const double lg = eg.log_density(pt);
      if (lg < kLogFloor) continue;
      points_.insert(points_.end(), pt, pt + dim_);
      weights_.push_back(wx[i] * wy[j]);
      log_g_.push_back(lg);
    }
  }
}

double KlObjective::evaluate(const double* params, double* gradient) const {
  const Unpacked u = unpack(params, order_, dim_);
  const int n_params = num_parameters();
  if (gradient) std::fill(gradient, gradient + n_params, 0.0);

  std::vector<double> lphi(order_);
  std::vector<Vector> z(order_, Vector(dim_));
  Vector diff(dim_);
  double cost = 0.0;

  for (std::size_t n = 0; n < weights_.size(); ++n) {
    const double* x = &points_[n * dim_];
    double peak = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < order_; ++i) {
      for (int r = 0; r < dim_; ++r) diff(r) = x[r] - u.mean[i](r);
      z[i].noalias() = u.chol_inv[i] * diff;
      lphi[i] = u.log_coef[i] - 0.5 * z[i].squaredNorm();
      peak = std::max(peak, lphi[i]);
    }
    double acc = 0.0;
    for (int i = 0; i < order_; ++i) acc += std::exp(lphi[i] - peak);
    const double lf = std::max(peak + std::log(acc), kLogFloor);
    const double f = std::exp(lf);
    const double d = log_g_[n] - lf;
    const double ratio = std::exp(d);
    // g log(g/f) - g + f = f (d e^d - e^d + 1)
    const double h = std::abs(d) < 1e-2 ? d * d * (0.5 + d * (1.0 / 3.0 + d * (1.0 / 8.0 + d / 30.0)))
                                         : std::expm1(d) * (d - 1.0) + d;
    cost += weights_[n] * f * h;
    if (!gradient) continue;

    const double c = weights_[n] * (1.0 - ratio);
    double* gp = gradient + order_;
    for (int i = 0; i < order_; ++i) {
      const double r = std::exp(lphi[i]);
      gradient[i] += c * (r - u.alpha[i] * f);
      const Vector lt_z = u.chol_inv[i].transpose() * z[i];
      for (int k = 0; k < dim_; ++k) gp[k] += c * r * lt_z(k);
      gp += dim_;
      // d log phi / dL = L^{-T} (z z^T - I)
      const Matrix dl = u.chol_inv[i].transpose() * (z[i] * z[i].transpose() - Matrix::Identity(dim_, dim_));
      for (int row = 0; row < dim_; ++row) {
        for (int col = 0; col <= row; ++col) {
          const double scale = row == col ? u.chol[i](row, col) : 1.0;
          *gp++ += c * r * dl(row, col) * scale;
        }
      }
    }
  }
  return cost;
}

}  // namespace detail

namespace {

class CeresKl final : public ceres::FirstOrderFunction {
public:
  explicit CeresKl(const detail::KlObjective& obj) : obj_(obj) {}
  bool Evaluate(const double* parameters, double* cost, double* gradient) const override {
    *cost = obj_.evaluate(parameters, gradient);
    return std::isfinite(*cost);
  }
  int NumParameters() const override { return obj_.num_parameters(); }

private:
  const detail::KlObjective& obj_;
};

struct Candidate {
  std::vector<double> params;
  double kl = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
};

}  // namespace

GlobalFitResult global_kl_fit(const GaussianMixture& g_in, std::size_t target_order, const GlobalFitConfig& cfg,
                              const std::optional<GaussianMixture>& init) {
  if (g_in.dim() > 2) throw ArgumentError("global KL fit supports d <= 2");
  if (target_order < 1 || target_order > g_in.order()) {
    throw ArgumentError("target order must satisfy 1 <= target <= order");
  }
  if (cfg.max_iter < 1 || !(cfg.grad_tol > 0.0) || cfg.restarts < 1) {
    throw ArgumentError("global fit configuration values must be positive");
  }
  const GaussianMixture g = normalize(g_in);
  const int dim = g.dim();
  const int order = static_cast<int>(target_order);

  const QuadSpec spec = make_quad_spec(g, cfg.quad);

  // Default start: the closest of a few greedy reductions.
  GaussianMixture start = init ? normalize(*init) : g;
  if (!init && target_order < g.order()) {
    ReduceOptions ro;
    ro.quad = cfg.quad;
    ro.fallback = CriterionKind::RunnallsBound;
    double start_kl = std::numeric_limits<double>::infinity();
    for (auto kind : {CriterionKind::PearsonChi2, CriterionKind::KitagawaWKL, CriterionKind::RunnallsBound}) {
      GaussianMixture cand = reduce_to(g, target_order, kind, ro).final_mixture;
      const double kl = kl_numeric(g, cand, spec);
      if (kl < start_kl) {
        start_kl = kl;
        start = std::move(cand);
      }
    }
  }
  if (start.order() != target_order || start.dim() != dim) {
    throw ArgumentError("initial mixture must have the target order and dimension");
  }

  const detail::KlObjective objective(g, spec, dim == 1 ? cfg.objective_nodes_1d : cfg.objective_nodes_2d, order);

  Candidate best;
  best.params = detail::pack_mixture(start);
  best.kl = kl_numeric(g, start, spec);
  const double init_kl = best.kl;

  ceres::GradientProblemSolver::Options options;
  options.line_search_direction_type = ceres::BFGS;
  options.max_num_iterations = cfg.max_iter;
  options.gradient_tolerance = cfg.grad_tol * 1e-3;
  options.function_tolerance = 1e-14;
  options.parameter_tolerance = 1e-12;
  options.logging_type = ceres::SILENT;
  options.minimizer_progress_to_stdout = false;

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto base = detail::pack_mixture(start);
  const Vector spread = mixture_moments(g).cov.diagonal().cwiseSqrt();

  for (int r = 0; r < cfg.restarts; ++r) {
    std::vector<double> params = base;
    if (r > 0) {
      // perturb logits, means and log-diagonals; off-diagonals untouched
      for (int i = 0; i < order; ++i) params[i] += 0.5 * normal(rng);
      double* q = params.data() + order;
      for (int i = 0; i < order; ++i) {
        for (int k = 0; k < dim; ++k) *q++ += 0.1 * r * spread(k) * normal(rng);
        for (int row = 0; row < dim; ++row) {
          for (int col = 0; col <= row; ++col) {
            if (row == col) *q += 0.2 * normal(rng);
            ++q;
          }
        }
      }
    }
    ceres::GradientProblem problem(new CeresKl(objective));
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(options, problem, params.data(), &summary);

    Candidate cand;
    try {
      const GaussianMixture fitted = detail::unpack_mixture(params.data(), order, dim);
      cand.kl = kl_numeric(g, fitted, spec);
    } catch (const NumericError&) {
      continue;
    }
    cand.params = std::move(params);
    cand.converged = summary.termination_type == ceres::CONVERGENCE;
    cand.iterations = static_cast<int>(summary.iterations.size());
    if (cand.kl < best.kl) best = std::move(cand);
    else if (r == 0 && best.iterations == 0) {
      best.converged = cand.converged;
      best.iterations = cand.iterations;
    }
  }

  GlobalFitResult result{detail::unpack_mixture(best.params.data(), order, dim), best.kl, init_kl, best.converged,
                         best.iterations};
  if (best.iterations == 0) result.mixture = start;
  return result;
}

}  // namespace gmred

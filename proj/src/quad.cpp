#include "gmred/quad.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

#include "evaluator.hpp"
#include "gmred/numeric.hpp"
#include "gmred/parallel.hpp"

namespace gmred {

namespace {

constexpr double kDensityFloor = 1e-300;
const double kLogDensityFloor = std::log(kDensityFloor);

struct SimpsonState {
  const std::function<double(double)>* f;
  int max_depth;
  long max_evals;
  long evals = 0;
  bool depth_exhausted = false;
  bool budget_exhausted = false;
};

double eval(SimpsonState& st, double x) {
  ++st.evals;
  return (*st.f)(x);
}

double simpson_refine(SimpsonState& st, double a, double b, double fa, double fm, double fb, double whole,
                      double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = eval(st, lm);
  const double frm = eval(st, rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
  if (depth >= st.max_depth) {
    st.depth_exhausted = true;
    return left + right + delta / 15.0;
  }
  if (st.evals >= st.max_evals) {
    st.budget_exhausted = true;
    return left + right + delta / 15.0;
  }
  return simpson_refine(st, a, m, fa, flm, fm, left, 0.5 * eps, depth + 1) +
         simpson_refine(st, m, b, fm, frm, fb, right, 0.5 * eps, depth + 1);
}

// h(d) = d e^d - e^d + 1, so that g log(g/f) - g + f = f h(log g - log f).
double kl_kernel(double d) {
  if (std::abs(d) < 1e-2) {
    const double d2 = d * d;
    return d2 * (0.5 + d * (1.0 / 3.0 + d * (1.0 / 8.0 + d * (1.0 / 30.0 + d * (1.0 / 144.0 + d / 840.0)))));
  }
  const double r = std::expm1(d);
  return (1.0 + r) * d - r;
}

void check_spec(const QuadSpec& spec) {
  if (spec.lo.size() != spec.hi.size() || spec.lo.size() == 0) {
    throw ArgumentError("quadrature box bounds have inconsistent dimensions");
  }
  if (spec.lo.size() > 2) throw ArgumentError("numerical integration supports d = 1 or d = 2 only");
  if (!(spec.lo.array() < spec.hi.array()).all()) throw ArgumentError("quadrature box requires lo < hi");
  if (!(spec.rel_tol > 0.0) || spec.max_depth < 1 || spec.nodes_per_axis < 2) {
    throw ArgumentError("invalid quadrature settings");
  }
}

void check_pair(const GaussianMixture& g, const GaussianMixture& f, const QuadSpec& spec) {
  if (g.dim() != f.dim()) throw ArgumentError("mixtures have different dimensions");
  if (g.dim() != spec.lo.size()) throw ArgumentError("quadrature box dimension does not match mixtures");
}

// Integrand built from the two log densities at a point.
template <class Kernel>
double integrate_log_pair(const GaussianMixture& a, const GaussianMixture& b, const QuadSpec& spec,
                          Kernel kernel) {
  check_spec(spec);
  check_pair(a, b, spec);
  const detail::MixtureEvaluator ea(a);
  const detail::MixtureEvaluator eb(b);
  return integrate(
      [&](const Vector& x) { return kernel(ea.log_density(x.data()), eb.log_density(x.data())); }, spec);
}

}  // namespace

std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  if (n < 1) throw ArgumentError("Gauss-Legendre rule needs at least one node");
  static std::mutex cache_mutex;
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  {
    std::lock_guard lock(cache_mutex);
    if (auto it = cache.find(n); it != cache.end()) return it->second;
  }
  std::vector<double> nodes(n), weights(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged root
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  std::lock_guard lock(cache_mutex);
  return cache.emplace(n, std::make_pair(std::move(nodes), std::move(weights))).first->second;
}

double integrate_1d(const std::function<double(double)>& f, double lo, double hi, double rel_tol, double abs_tol,
                    int max_depth, long max_evals, int initial_panels) {
  if (!(lo < hi)) throw ArgumentError("integration bounds require lo < hi");
  if (initial_panels < 1) throw ArgumentError("need at least one initial panel");
  SimpsonState st{&f, max_depth, max_evals};

  const int n = initial_panels;
  const double h = (hi - lo) / n;
  std::vector<double> xs(2 * n + 1), fs(2 * n + 1);
  for (int i = 0; i <= 2 * n; ++i) {
    xs[i] = (i == 2 * n) ? hi : lo + 0.5 * h * i;
    fs[i] = eval(st, xs[i]);
  }
  std::vector<double> wholes(n);
  CompensatedSum coarse;
  for (int p = 0; p < n; ++p) {
    wholes[p] = (xs[2 * p + 2] - xs[2 * p]) / 6.0 * (fs[2 * p] + 4.0 * fs[2 * p + 1] + fs[2 * p + 2]);
    coarse.add(wholes[p]);
  }
  const double tol = std::max(rel_tol * std::abs(coarse.value()), abs_tol);

  CompensatedSum total;
  for (int p = 0; p < n; ++p) {
    total.add(simpson_refine(st, xs[2 * p], xs[2 * p + 2], fs[2 * p], fs[2 * p + 1], fs[2 * p + 2], wholes[p],
                             tol / n, 0));
  }
  const double result = total.value();
  if (!std::isfinite(result)) throw NumericError("integrand produced a non-finite value");
  if (st.depth_exhausted || st.budget_exhausted) {
    std::ostringstream msg;
    msg << "adaptive Simpson did not converge (" << (st.depth_exhausted ? "max depth reached" : "evaluation budget")
        << ", " << st.evals << " evaluations); best estimate " << result;
    throw ConvergenceError(msg.str(), result);
  }
  return result;
}

double integrate(const Integrand& f, const QuadSpec& spec) {
  check_spec(spec);
  if (spec.lo.size() == 1) {
    Vector x(1);
    const std::function<double(double)> f1 = [&](double t) {
      x(0) = t;
      return f(x);
    };
    return integrate_1d(f1, spec.lo(0), spec.hi(0), spec.rel_tol, spec.abs_tol, spec.max_depth, spec.max_evals);
  }

  const auto& [nodes, weights] = gauss_legendre(spec.nodes_per_axis);
  const int n = spec.nodes_per_axis;
  const double cx = 0.5 * (spec.hi(0) + spec.lo(0));
  const double hx = 0.5 * (spec.hi(0) - spec.lo(0));
  const double cy = 0.5 * (spec.hi(1) + spec.lo(1));
  const double hy = 0.5 * (spec.hi(1) - spec.lo(1));

  // Per-row compensated sums, combined in row order: bit-stable for any
  // thread count.
  std::vector<double> rows(n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    Vector x(2);
    x(0) = cx + hx * nodes[i];
    CompensatedSum row;
    for (int j = 0; j < n; ++j) {
      x(1) = cy + hy * nodes[j];
      row.add(weights[j] * f(x));
    }
    rows[i] = row.value();
  });
  CompensatedSum total;
  for (int i = 0; i < n; ++i) total.add(weights[i] * rows[i]);
  const double result = total.value() * hx * hy;
  if (!std::isfinite(result)) throw NumericError("integrand produced a non-finite value");
  return result;
}

std::pair<Vector, Vector> default_box(const GaussianMixture& m, double k) {
  if (!(k > 0.0)) throw ArgumentError("box multiplier must be positive");
  Vector lo = Vector::Constant(m.dim(), std::numeric_limits<double>::infinity());
  Vector hi = Vector::Constant(m.dim(), -std::numeric_limits<double>::infinity());
  for (const auto& c : m) {
    const Vector half = k * c.cov().diagonal().cwiseSqrt();
    lo = lo.cwiseMin(c.mean() - half);
    hi = hi.cwiseMax(c.mean() + half);
  }
  return {lo, hi};
}

QuadSpec make_quad_spec(const GaussianMixture& m, const QuadOptions& opts) {
  QuadSpec spec;
  std::tie(spec.lo, spec.hi) = default_box(m, opts.box_k);
  spec.rel_tol = opts.rel_tol;
  spec.nodes_per_axis = opts.nodes_per_axis;
  return spec;
}

double kl_numeric(const GaussianMixture& g, const GaussianMixture& f, const QuadSpec& spec) {
  return integrate_log_pair(g, f, spec, [](double lg, double lf) {
    if (lg < kLogDensityFloor) return 0.0;
    lf = std::max(lf, kLogDensityFloor);
    return std::exp(lf) * kl_kernel(lg - lf);
  });
}

double isd_numeric(const GaussianMixture& g, const GaussianMixture& f, const QuadSpec& spec) {
  return integrate_log_pair(g, f, spec, [](double lg, double lf) {
    const double diff = std::exp(lg) - std::exp(lf);
    return diff * diff;
  });
}

double pearson_numeric(const GaussianMixture& q, const GaussianMixture& p, const QuadSpec& spec) {
  return integrate_log_pair(q, p, spec, [](double lq, double lp) {
    // No floor shortcut: q^2/p can be huge where both densities underflow.
    if (std::isinf(lq) && std::isinf(lp)) return 0.0;
    // (q - p)^2 / p = p expm1(lq - lp)^2
    const double d = lq - lp;
    if (d == 0.0) return 0.0;
    // log|expm1(d)| without overflow for large d
    const double la = d > 30.0 ? d + std::log1p(-std::exp(-d)) : std::log(std::abs(std::expm1(d)));
    return std::exp(lp + 2.0 * la);
  });
}

}  // namespace gmred

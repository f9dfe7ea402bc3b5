// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gmred/criteria.hpp"
#include "gmred/fixtures.hpp"
#include "gmred/quad.hpp"
#include "gmred/reduce.hpp"
#include "gmred/ssm.hpp"
#include "oracles.hpp"

using namespace gmred;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

double kl_of(const GaussianMixture& g, std::size_t order, CriterionKind kind) {
  ReduceOptions o;
  o.fallback = CriterionKind::RunnallsBound;
  return kl_numeric(g, reduce_to(g, order, kind, o).final_mixture, make_quad_spec(g));
}

// 1. and 2.
Outcome full_collapse(const GaussianMixture& g, double expected, double tol) {
  Outcome out{true, ""};
  for (auto kind : {CriterionKind::PearsonChi2, CriterionKind::KitagawaWKL, CriterionKind::RunnallsBound,
                    CriterionKind::SalmondTrace, CriterionKind::WilliamsISD}) {
    const double kl = kl_of(g, 1, kind);
    out.pass = out.pass && std::abs(kl - expected) <= tol;
    out.detail += std::string(to_string(kind)) + "=" + fmt(kl) + " ";
  }
  out.detail += "target " + fmt(expected) + " +/- " + fmt(tol);
  return out;
}

// 3. and 4.
Outcome pearson_column(const GaussianMixture& g, const std::vector<std::pair<std::size_t, double>>& table) {
  Outcome out{true, ""};
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& [m, ref] : table) {
    const double kl = kl_of(g, m, CriterionKind::PearsonChi2);
    const double ratio = kl / ref;
    const bool ok = ratio <= 2.0 && ratio >= 0.5;
    if (!ok) out.pass = false;
    if (!(kl < prev)) {
      out.pass = false;
      out.detail += "[not monotone at m=" + std::to_string(m) + "] ";
    }
    prev = kl;
    out.detail += "m=" + std::to_string(m) + ":" + fmt(kl) + "/" + fmt(ref) + (ok ? "" : "(x" + fmt(ratio) + ")") + " ";
  }
  return out;
}

struct RandomPair {
  GaussianComponent a, b;
};

// 100 1D and 100 2D pairs whose Pearson closed form is defined.
std::vector<RandomPair> random_pairs() {
  std::vector<RandomPair> pairs;
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> uw(0.05, 0.95);
  for (int d : {1, 2}) {
    int found = 0;
    while (found < 100) {
      const double w = uw(rng);
      auto a = oracle::random_component(rng, d, w, 1.0);
      auto b = oracle::random_component(rng, d, 1.0 - w, 1.0);
      if (!merge_geometry(a, b).wPD || !score_components(CriterionKind::PearsonChi2, a, b)) continue;
      pairs.push_back({std::move(a), std::move(b)});
      ++found;
    }
  }
  return pairs;
}

// Box covering the pair, the merged Gaussian, and the Gaussian factors of the
// three terms of q^2/p.
QuadSpec pearson_box(const RandomPair& pr) {
  const auto geo = merge_geometry(pr.a, pr.b);
  const Matrix vi = geo.V.inverse();
  std::vector<GaussianComponent> parts{pr.a, pr.b, GaussianComponent(1.0, geo.xi, geo.V)};
  for (const auto* c : {&pr.a, &pr.b}) {
    const Matrix prec = 2.0 * c->cov().inverse() - vi;
    const Matrix cov = prec.inverse();
    const Vector centre = cov * (2.0 * c->cov().inverse() * c->mean() - vi * geo.xi);
    parts.emplace_back(1.0, centre, 0.5 * (cov + cov.transpose()));
  }
  const Matrix wi = geo.W.inverse();
  parts.emplace_back(1.0, geo.eta, 0.5 * (wi + wi.transpose()));
  QuadSpec spec;
  std::tie(spec.lo, spec.hi) = default_box(GaussianMixture(parts), 12.0);
  spec.rel_tol = 1e-12;
  spec.nodes_per_axis = 800;
  return spec;
}

Outcome pearson_oracle(const std::vector<RandomPair>& pairs) {
  double worst = 0.0;
  for (const auto& pr : pairs) {
    const double closed = pearson_chi2(pr.a, pr.b);
    const GaussianMixture q({pr.a, pr.b});
    const GaussianMixture p(moment_preserving_merge(pr.a, pr.b));
    const double numeric = pearson_numeric(q, p, pearson_box(pr));
    worst = std::max(worst, std::abs(closed - numeric) / std::abs(numeric));
  }
  return {worst <= 1e-6, std::to_string(pairs.size()) + " pairs, worst relative error " + fmt(worst)};
}

Outcome runnalls_property(const std::vector<RandomPair>& pairs) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& pr : pairs) {
    const GaussianMixture q({pr.a, pr.b});
    const GaussianMixture p(moment_preserving_merge(pr.a, pr.b));
    auto spec = make_quad_spec(q);
    spec.nodes_per_axis = 600;
    const double kl = kl_numeric(q, p, spec);
    worst = std::min(worst, runnalls_bound(pr.a, pr.b) - kl);
  }
  return {worst >= -1e-8, std::to_string(pairs.size()) + " pairs, min(bound - KL) = " + fmt(worst)};
}

Outcome moment_drift() {
  double worst = 0.0;
  int traces = 0;
  for (const auto& g : {normalize(fixtures::table1()), normalize(fixtures::table3())}) {
    const auto m0 = mixture_moments(g);
    const double mean_scale = std::max(m0.mean.cwiseAbs().maxCoeff(), std::sqrt(m0.cov.cwiseAbs().maxCoeff()));
    const double cov_scale = m0.cov.cwiseAbs().maxCoeff();
    std::vector<CriterionKind> kinds{CriterionKind::PearsonChi2, CriterionKind::KitagawaWKL,
                                     CriterionKind::RunnallsBound, CriterionKind::SalmondTrace,
                                     CriterionKind::WilliamsISD};
    if (g.dim() == 1) kinds.push_back(CriterionKind::NumericKL);
    for (auto kind : kinds) {
      ReduceOptions o;
      o.fallback = CriterionKind::RunnallsBound;
      const auto trace = reduce_to(g, 1, kind, o);
      GaussianMixture cur = g;
      for (const auto& s : trace.steps) {
        cur = merge_pair(cur, s.chosen_pair.first, s.chosen_pair.second);
        const auto mm = mixture_moments(cur);
        worst = std::max(worst, (mm.mean - m0.mean).cwiseAbs().maxCoeff() / mean_scale);
        worst = std::max(worst, (mm.cov - m0.cov).cwiseAbs().maxCoeff() / cov_scale);
      }
      ++traces;
    }
  }
  return {worst <= 1e-10, std::to_string(traces) + " traces, worst relative drift " + fmt(worst)};
}

Outcome kalman_equivalence() {
  double worst = 0.0;
  double worst_ll = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = oracle::random_linear_model(1000 + seed, 200);
    const auto k = oracle::kalman_rts(r.model, r.ys, r.m0, r.P0);
    FilterOptions o;
    o.cap = 1;
    const auto run = run_smoother(run_filter(r.model, r.ys, GaussianMixture(GaussianComponent(1.0, r.m0, r.P0)), o),
                                  r.model);
    for (std::size_t n = 0; n < r.ys.size(); ++n) {
      const auto& f = run.filtered[n][0];
      const auto& p = run.predicted[n][0];
      const auto& s = (*run.smoothed)[n][0];
      for (double e : {oracle::max_abs(f.mean() - k.filt_mean[n]), oracle::max_abs(f.cov() - k.filt_cov[n]),
                       oracle::max_abs(p.mean() - k.pred_mean[n]), oracle::max_abs(p.cov() - k.pred_cov[n]),
                       oracle::max_abs(s.mean() - k.smooth_mean[n]), oracle::max_abs(s.cov() - k.smooth_cov[n])}) {
        worst = std::max(worst, e);
      }
    }
    worst_ll = std::max(worst_ll, std::abs(run.log_likelihood - k.log_lik) / std::max(1.0, std::abs(k.log_lik)));
  }
  return {worst <= 1e-8 && worst_ll <= 1e-8,
          "20 models x 200 steps, max |diff| " + fmt(worst) + ", log-lik rel diff " + fmt(worst_ll)};
}

Outcome cap_convergence() {
  const auto ys = fixtures::levelshift_series(fixtures::kDefaultSeed);
  const auto model = trend_model(0.000254, 1.189, 0.989, 1.027);
  std::vector<double> ll;
  std::string detail;
  for (std::size_t cap : {1, 2, 4, 8, 16, 32}) {
    FilterOptions o;
    o.cap = cap;
    o.fallback = CriterionKind::RunnallsBound;
    ll.push_back(run_filter(model, ys, default_prior(1), o).log_likelihood);
    detail += "M=" + std::to_string(cap) + ":" + fmt(ll.back()) + " ";
  }
  bool monotone = true;
  for (std::size_t i = 1; i < 5; ++i) monotone = monotone && ll[i] >= ll[i - 1] - 1e-6;
  const double gap = std::abs(ll[4] - ll[5]);
  detail += "|16-32|=" + fmt(gap) + (monotone ? "" : " [not monotone]");
  return {monotone && gap <= 1e-2, detail};
}

Outcome global_fit_dominance() {
  const auto g = normalize(fixtures::table1());
  Outcome out{true, ""};
  for (std::size_t m : {2, 3, 4, 5}) {
    const double greedy = kl_of(g, m, CriterionKind::PearsonChi2);
    const auto fit = global_kl_fit(g, m);
    const bool ok = fit.kl <= greedy && (m != 4 || fit.kl <= 5e-4);
    out.pass = out.pass && ok;
    out.detail += "m=" + std::to_string(m) + ":" + fmt(fit.kl) + "<=" + fmt(greedy) + (ok ? " " : "[x] ");
  }
  return out;
}

}  // namespace

int main() {
  const auto t1 = normalize(fixtures::table1());
  const auto t3 = normalize(fixtures::table3());
  std::vector<RandomPair> pairs;

  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "full-collapse KL, 1D", 5, [&] { return full_collapse(t1, 0.1304686, 1e-3); }},
      {2, "full-collapse KL, 2D", 30, [&] { return full_collapse(t3, 0.180119, 2e-3); }},
      {3, "Pearson column, 1D", 60,
       [&] {
         return pearson_column(
             t1, {{2, 0.07938004}, {3, 0.01810894}, {4, 0.00076506}, {5, 0.00035793}, {8, 1.23e-5}});
       }},
      {4, "Pearson column, 2D", 300,
       [&] {
         return pearson_column(t3, {{2, 0.122572}, {4, 0.014775}, {5, 0.005754}, {6, 0.002010}, {7, 0.001051},
                                    {8, 0.000300}});
       }},
      {5, "Pearson closed form vs quadrature", 0,
       [&] {
         pairs = random_pairs();
         return pearson_oracle(pairs);
       }},
      {6, "Runnalls bound property", 0, [&] { return runnalls_property(pairs); }},
      {7, "moment preservation", 0, [&] { return moment_drift(); }},
      {8, "Kalman/RTS equivalence", 0, [&] { return kalman_equivalence(); }},
      {9, "Gaussian-sum convergence in M", 0, [&] { return cap_convergence(); }},
      {10, "global fit dominance", 600, [&] { return global_fit_dominance(); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_s > 0 && secs > c.limit_s) {
      out.pass = false;
      out.detail += " [over time limit " + fmt(c.limit_s) + " s]";
    }
    if (!out.pass) ++failed;
    std::printf("criterion %2d %-36s %s  %.2fs  %s\n", c.id, c.name, out.pass ? "PASS" : "FAIL", secs,
                out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

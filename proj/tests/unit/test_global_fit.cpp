#include <doctest.h>

#include <cmath>
#include <random>

#include "global_fit_objective.hpp"
#include "gmred/fixtures.hpp"
#include "gmred/reduce.hpp"
#include "oracles.hpp"

using namespace gmred;

TEST_SUITE("global_fit") {

TEST_CASE("parameter packing round-trips") {
  const auto g = normalize(fixtures::table3());
  const auto p = detail::pack_mixture(g);
  CHECK(p.size() == static_cast<std::size_t>(detail::mixture_param_count(10, 2)));
  const auto back = detail::unpack_mixture(p.data(), 10, 2);
  for (std::size_t i = 0; i < g.order(); ++i) {
    CHECK(back[i].weight() == doctest::Approx(g[i].weight()).epsilon(1e-13));
    CHECK(oracle::max_abs(back[i].mean() - g[i].mean()) < 1e-14);
    CHECK(oracle::max_abs(back[i].cov() - g[i].cov()) < 1e-13);
  }
}

TEST_CASE("objective gradient matches central differences") {
  for (int dim : {1, 2}) {
    CAPTURE(dim);
    const auto g = normalize(dim == 1 ? fixtures::table1() : fixtures::table3());
    const int order = 3;
    ReduceOptions o;
    o.fallback = CriterionKind::RunnallsBound;
    const auto f = reduce_to(g, order, CriterionKind::RunnallsBound, o).final_mixture;
    const detail::KlObjective obj(g, make_quad_spec(g), dim == 1 ? 800 : 64, order);
    auto p = detail::pack_mixture(f);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01;
    for (auto& x : p) x += 0.05 * n01(rng);
    std::vector<double> grad(p.size());
    obj.evaluate(p.data(), grad.data());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double h = 1e-6;
      auto q = p;
      q[i] += h;
      const double up = obj.evaluate(q.data(), nullptr);
      q[i] -= 2 * h;
      const double dn = obj.evaluate(q.data(), nullptr);
      const double fd = (up - dn) / (2 * h);
      CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5).scale(1e-3));
    }
  }
}

TEST_CASE("self fit keeps the exact mixture") {
  std::mt19937_64 rng(19);
  const GaussianMixture g({oracle::random_component(rng, 1, 0.4, 2.0), oracle::random_component(rng, 1, 0.6, 2.0)});
  const auto r = global_kl_fit(g, 2);
  CHECK(r.kl <= r.init_kl);
  CHECK(r.kl <= 1e-8);
}

TEST_CASE("fit improves on the greedy start on table1") {
  const auto g = normalize(fixtures::table1());
  ReduceOptions o;
  const auto greedy = reduce_to(g, 4, CriterionKind::PearsonChi2, o).final_mixture;
  const double greedy_kl = kl_numeric(g, greedy, make_quad_spec(g));
  const auto r = global_kl_fit(g, 4);
  CHECK(r.kl <= greedy_kl);
  CHECK(r.kl <= 5e-4);
  CHECK(r.mixture.order() == 4);
  CHECK(r.mixture.total_weight() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(kl_numeric(g, r.mixture, make_quad_spec(g)) == doctest::Approx(r.kl).epsilon(1e-12));
}

TEST_CASE("explicit init is respected and never worsened") {
  const auto g = normalize(fixtures::table1());
  const auto init = reduce_to(g, 2, CriterionKind::SalmondTrace).final_mixture;
  GlobalFitConfig cfg;
  cfg.restarts = 1;
  const auto r = global_kl_fit(g, 2, cfg, init);
  CHECK(r.init_kl == doctest::Approx(kl_numeric(g, init, make_quad_spec(g))).epsilon(1e-12));
  CHECK(r.kl <= r.init_kl);
}

TEST_CASE("argument checks") {
  const auto g = normalize(fixtures::table1());
  CHECK_THROWS_AS(global_kl_fit(g, 0), ArgumentError);
  CHECK_THROWS_AS(global_kl_fit(g, 17), ArgumentError);
  GlobalFitConfig bad;
  bad.restarts = 0;
  CHECK_THROWS_AS(global_kl_fit(g, 2, bad), ArgumentError);
  CHECK_THROWS_AS(global_kl_fit(g, 3, {}, reduce_to(g, 2, CriterionKind::KitagawaWKL).final_mixture), ArgumentError);
  std::mt19937_64 rng(1);
  const GaussianMixture g3(oracle::random_component(rng, 3, 1.0));
  CHECK_THROWS_AS(global_kl_fit(g3, 1), ArgumentError);
}

}  // TEST_SUITE

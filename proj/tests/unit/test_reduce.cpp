#include <doctest.h>

#include <cmath>
#include <random>

#include "gmred/fixtures.hpp"
#include "gmred/parallel.hpp"
#include "gmred/reduce.hpp"
#include "oracles.hpp"

using namespace gmred;

namespace {

Vector v1(double x) { return Vector::Constant(1, x); }
GaussianComponent c1(double w, double mu, double s2) {
  return GaussianComponent(w, v1(mu), Matrix::Constant(1, 1, s2));
}

double kl_at(const GaussianMixture& g, std::size_t order, CriterionKind kind,
             std::optional<CriterionKind> fallback = std::nullopt) {
  ReduceOptions o;
  o.fallback = fallback;
  const auto f = reduce_to(g, order, kind, o).final_mixture;
  return kl_numeric(g, f, make_quad_spec(g));
}

bool same_mixture(const GaussianMixture& a, const GaussianMixture& b) {
  if (a.order() != b.order()) return false;
  for (std::size_t i = 0; i < a.order(); ++i) {
    if (a[i].weight() != b[i].weight() || a[i].mean() != b[i].mean() || a[i].cov() != b[i].cov()) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("reduce") {

TEST_CASE("order two collapses to the moment-matched Gaussian") {
  const GaussianMixture m({c1(0.3, -1, 1), c1(0.7, 2, 0.5)});
  for (auto kind : {CriterionKind::PearsonChi2, CriterionKind::KitagawaWKL, CriterionKind::RunnallsBound,
                    CriterionKind::SalmondTrace, CriterionKind::WilliamsISD, CriterionKind::NumericKL}) {
    const auto r = reduce_step(m, kind);
    REQUIRE(r.mixture.order() == 1);
    CHECK(r.chosen == std::pair<std::size_t, std::size_t>{0, 1});
    const auto mm = mixture_moments(m);
    CHECK(r.mixture[0].mean()(0) == doctest::Approx(mm.mean(0)).epsilon(1e-14));
    CHECK(r.mixture[0].cov()(0, 0) == doctest::Approx(mm.cov(0, 0)).epsilon(1e-14));
  }
}

TEST_CASE("duplicated component is merged first") {
  const GaussianMixture m({c1(0.2, 0, 1), c1(0.3, 3, 2), c1(0.2, -4, 1), c1(0.3, 3, 2)});
  const auto r = reduce_step(m, CriterionKind::PearsonChi2);
  CHECK(r.chosen == std::pair<std::size_t, std::size_t>{1, 3});
  CHECK(r.score == 0.0);
}

TEST_CASE("ties break toward the lexicographically smallest pair") {
  // Four equally spaced identical-shape components: pairs (0,1), (1,2), (2,3)
  // all score the same.
  const GaussianMixture m({c1(0.25, 0, 1), c1(0.25, 1, 1), c1(0.25, 2, 1), c1(0.25, 3, 1)});
  for (auto kind : {CriterionKind::PearsonChi2, CriterionKind::KitagawaWKL, CriterionKind::RunnallsBound}) {
    CHECK(reduce_step(m, kind).chosen == std::pair<std::size_t, std::size_t>{0, 1});
  }
}

TEST_CASE("target equal to order is the identity") {
  const auto g = fixtures::table1();
  const auto t = reduce_to(g, g.order(), CriterionKind::PearsonChi2);
  CHECK(t.steps.empty());
  CHECK(same_mixture(t.final_mixture, normalize(g)));
  CHECK_THROWS_AS(reduce_to(g, 0, CriterionKind::PearsonChi2), ArgumentError);
  CHECK_THROWS_AS(reduce_to(g, 17, CriterionKind::PearsonChi2), ArgumentError);
  CHECK_THROWS_AS(reduce_step(GaussianMixture(c1(1, 0, 1)), CriterionKind::PearsonChi2), ArgumentError);
}

TEST_CASE("stuck reduction reports a partial trace and a fallback resolves it") {
  const GaussianMixture m({c1(0.99, 0, 0.01), c1(0.01, 0, 100.0)});
  try {
    reduce_to(m, 1, CriterionKind::PearsonChi2);
    FAIL("expected ReductionStuck");
  } catch (const ReductionStuck& e) {
    CHECK(e.criterion() == CriterionKind::PearsonChi2);
    REQUIRE(e.partial().has_value());
    CHECK(e.partial()->steps.empty());
    CHECK(e.partial()->final_mixture.order() == 2);
  }
  ReduceOptions o;
  o.fallback = CriterionKind::RunnallsBound;
  const auto t = reduce_to(m, 1, CriterionKind::PearsonChi2, o);
  REQUIRE(t.steps.size() == 1);
  CHECK(t.steps[0].criterion == CriterionKind::RunnallsBound);
}

TEST_CASE("table3 Pearson trace needs the fallback only for the last merge") {
  const auto g = normalize(fixtures::table3());
  CHECK_THROWS_AS(reduce_to(g, 1, CriterionKind::PearsonChi2), ReductionStuck);
  ReduceOptions o;
  o.fallback = CriterionKind::RunnallsBound;
  const auto t = reduce_to(g, 1, CriterionKind::PearsonChi2, o);
  REQUIRE(t.steps.size() == 9);
  for (std::size_t i = 0; i + 1 < t.steps.size(); ++i) CHECK(t.steps[i].criterion == CriterionKind::PearsonChi2);
  CHECK(t.steps.back().criterion == CriterionKind::RunnallsBound);
}

TEST_CASE("trace bookkeeping") {
  const auto g = fixtures::table1();
  ReduceOptions o;
  o.track_kl = true;
  const auto t = reduce_to(g, 3, CriterionKind::KitagawaWKL, o);
  REQUIRE(t.steps.size() == 13);
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    CHECK(t.steps[i].order_before == 16 - i);
    CHECK(t.steps[i].chosen_pair.first < t.steps[i].chosen_pair.second);
    CHECK(t.steps[i].chosen_pair.second < t.steps[i].order_before);
    REQUIRE(t.steps[i].kl_to_true.has_value());
    CHECK(*t.steps[i].kl_to_true >= -1e-8);
  }
  CHECK(t.final_mixture.total_weight() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*t.steps.back().kl_to_true == doctest::Approx(kl_at(normalize(g), 3, CriterionKind::KitagawaWKL)));
}

TEST_CASE("cached rescoring agrees with step-by-step rescoring") {
  const auto g = normalize(fixtures::table1());
  for (auto kind : {CriterionKind::PearsonChi2, CriterionKind::KitagawaWKL, CriterionKind::RunnallsBound,
                    CriterionKind::SalmondTrace, CriterionKind::WilliamsISD}) {
    CAPTURE(to_string(kind));
    const auto t = reduce_to(g, 1, kind);
    GaussianMixture m = g;
    for (const auto& s : t.steps) {
      const auto r = reduce_step(m, kind);
      CHECK(r.chosen == s.chosen_pair);
      m = r.mixture;
    }
  }
}

TEST_CASE("table1 Pearson column") {
  const auto g = normalize(fixtures::table1());
  const std::pair<std::size_t, double> pinned[] = {
      {1, 0.130468598}, {2, 0.0700729544}, {3, 0.0181089393}, {4, 0.000765064048}, {5, 0.00011035076},
      {8, 1.22655669e-05}, {12, 6.53280123e-10}};
  for (const auto& [m, kl] : pinned) {
    CAPTURE(m);
    CHECK(kl_at(g, m, CriterionKind::PearsonChi2) == doctest::Approx(kl).epsilon(1e-6));
  }
}

TEST_CASE("one Pearson step on table1") {
  const auto g = normalize(fixtures::table1());
  const double kl = kl_at(g, 15, CriterionKind::PearsonChi2);
  CHECK(kl == doctest::Approx(9.80e-14).epsilon(0.5));
}

TEST_CASE("table3 Pearson column") {
  const auto g = normalize(fixtures::table3());
  const std::pair<std::size_t, double> pinned[] = {{2, 0.122571795}, {4, 0.0147745072}, {5, 0.0110667718},
                                                   {6, 0.0020100991}, {8, 0.000300382548}, {9, 0.000163134093}};
  for (const auto& [m, kl] : pinned) {
    CAPTURE(m);
    CHECK(kl_at(g, m, CriterionKind::PearsonChi2) == doctest::Approx(kl).epsilon(1e-5));
  }
}

TEST_CASE("numeric-KL greedy on table1") {
  const auto g = normalize(fixtures::table1());
  ReduceOptions o;
  o.track_kl = true;
  const auto t = reduce_to(g, 8, CriterionKind::NumericKL, o);
  REQUIRE(t.steps.size() == 8);
  for (const auto& s : t.steps) CHECK(s.score == doctest::Approx(*s.kl_to_true).epsilon(1e-9));
  // Each step takes the exact best moment-preserving merge.
  CHECK(*t.steps.back().kl_to_true == doctest::Approx(1.22655669e-05).epsilon(1e-6));
  CHECK(*t.steps.back().kl_to_true <= kl_at(g, 8, CriterionKind::KitagawaWKL));
  CHECK(*t.steps.back().kl_to_true <= kl_at(g, 8, CriterionKind::RunnallsBound));
}

TEST_CASE("traces are identical for any thread count") {
  const auto g = normalize(fixtures::table3());
  ReduceOptions o;
  o.fallback = CriterionKind::RunnallsBound;
  set_num_threads(1);
  const auto a = reduce_to(g, 1, CriterionKind::PearsonChi2, o);
  set_num_threads(4);
  const auto b = reduce_to(g, 1, CriterionKind::PearsonChi2, o);
  set_num_threads(1);
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    CHECK(a.steps[i].chosen_pair == b.steps[i].chosen_pair);
    CHECK(a.steps[i].score == b.steps[i].score);
  }
  CHECK(same_mixture(a.final_mixture, b.final_mixture));
}

}  // TEST_SUITE

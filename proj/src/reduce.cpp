#include "gmred/reduce.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "gmred/parallel.hpp"

namespace gmred {

namespace {

constexpr double kExcluded = std::numeric_limits<double>::quiet_NaN();

std::string pair_label(std::size_t j, std::size_t k) {
  std::ostringstream os;
  os << "(" << j << ", " << k << ")";
  return os.str();
}

std::string stuck_message(CriterionKind kind, std::size_t order) {
  std::ostringstream os;
  os << "reduction stuck at order " << order << ": criterion '" << to_string(kind)
     << "' excludes every candidate pair";
  return os.str();
}

struct Best {
  std::size_t j = 0;
  std::size_t k = 0;
  double score = std::numeric_limits<double>::infinity();
  bool found = false;
};

// Lexicographic tie-break: strictly smaller score, or equal score at a
// smaller (j, k).
bool better(double s, std::size_t j, std::size_t k, const Best& b) {
  if (std::isnan(s)) return false;
  if (!b.found || s < b.score) return true;
  return s == b.score && (j < b.j || (j == b.j && k < b.k));
}

// Pair scores over component slots. A merge keeps the survivor in the lower
// slot and retires the upper one, so live slots stay in current index order
// and slot order decides ties exactly as current indices would.
class ScoreTable {
public:
  explicit ScoreTable(std::size_t n) : n_(n), cells_(n * n, kExcluded), alive_(n, true), row_best_(n) {}

  std::size_t slots() const noexcept { return n_; }
  bool alive(std::size_t s) const { return alive_[s]; }
  double& cell(std::size_t j, std::size_t k) { return cells_[j * n_ + k]; }
  double cell(std::size_t j, std::size_t k) const { return cells_[j * n_ + k]; }

  void retire(std::size_t s) { alive_[s] = false; }

  void refresh_row(std::size_t j) {
    Best b;
    for (std::size_t k = j + 1; k < n_; ++k) {
      if (alive_[k] && better(cell(j, k), j, k, b)) b = {j, k, cell(j, k), true};
    }
    row_best_[j] = b;
  }

  void refresh_all() {
    for (std::size_t j = 0; j < n_; ++j) {
      if (alive_[j]) refresh_row(j);
    }
  }

  // Row bookkeeping after slot `j` absorbed slot `k` and pairs with `j` were rescored.
  void after_merge(std::size_t j, std::size_t k) {
    refresh_row(j);
    for (std::size_t i = 0; i < n_; ++i) {
      if (!alive_[i] || i == j) continue;
      Best& rb = row_best_[i];
      if (rb.found && (rb.k == k || rb.k == j)) {
        refresh_row(i);
      } else if (i < j && better(cell(i, j), i, j, rb)) {
        rb = {i, j, cell(i, j), true};
      }
    }
  }

  Best best() const {
    Best b;
    for (std::size_t j = 0; j < n_; ++j) {
      const Best& rb = row_best_[j];
      if (alive_[j] && rb.found && better(rb.score, rb.j, rb.k, b)) b = rb;
    }
    return b;
  }

  // Current index of a live slot.
  std::size_t index_of(std::size_t s) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < s; ++i) idx += alive_[i] ? 1 : 0;
    return idx;
  }

private:
  std::size_t n_;
  std::vector<double> cells_;
  std::vector<bool> alive_;
  std::vector<Best> row_best_;
};

double checked(const std::optional<double>& s, std::size_t j, std::size_t k) {
  if (!s) return kExcluded;
  if (std::isnan(*s)) throw NumericError("pair " + pair_label(j, k) + ": score is NaN");
  return *s;
}

// Fills `table` for the given slot pairs with a pair-local criterion.
void score_pairs(CriterionKind kind, const std::vector<GaussianComponent>& slots,
                 const std::vector<std::pair<std::size_t, std::size_t>>& pairs, ScoreTable& table) {
  std::vector<double> out(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    const auto [j, k] = pairs[i];
    try {
      out[i] = checked(score_components(kind, slots[j], slots[k]), j, k);
    } catch (const ConvergenceError&) {
      throw;
    } catch (const NumericError& e) {
      throw NumericError("pair " + pair_label(j, k) + ": " + e.what());
    }
  });
  for (std::size_t i = 0; i < pairs.size(); ++i) table.cell(pairs[i].first, pairs[i].second) = out[i];
}

// Scores every pair of a mixture from scratch, for any criterion.
ScoreTable score_mixture(CriterionKind kind, const GaussianMixture& m, const ScoringContext& ctx) {
  const std::size_t n = m.order();
  ScoreTable table(n);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = j + 1; k < n; ++k) pairs.emplace_back(j, k);
  }
  if (is_pair_local(kind)) {
    const std::vector<GaussianComponent> comps(m.begin(), m.end());
    score_pairs(kind, comps, pairs, table);
  } else {
    std::optional<Matrix> mix_cov;
    if (kind == CriterionKind::SalmondTrace) mix_cov = mixture_moments(m).cov;
    std::vector<double> out(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t i) {
      const auto [j, k] = pairs[i];
      try {
        out[i] = checked(mix_cov ? std::optional<double>(salmond_trace(m[j], m[k], *mix_cov))
                                 : score_pair(kind, m, j, k, ctx),
                         j, k);
      } catch (const ConvergenceError&) {
        throw;
      } catch (const NumericError& e) {
        throw NumericError("pair " + pair_label(j, k) + ": " + e.what());
      }
    });
    for (std::size_t i = 0; i < pairs.size(); ++i) table.cell(pairs[i].first, pairs[i].second) = out[i];
  }
  table.refresh_all();
  return table;
}

// Pair-local table over the live slots of `mask`.
ScoreTable score_slots(CriterionKind kind, const std::vector<GaussianComponent>& slots, const ScoreTable& mask) {
  ScoreTable table(slots.size());
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t j = 0; j < slots.size(); ++j) {
    if (!mask.alive(j)) {
      table.retire(j);
      continue;
    }
    for (std::size_t k = j + 1; k < slots.size(); ++k) {
      if (mask.alive(k)) pairs.emplace_back(j, k);
    }
  }
  score_pairs(kind, slots, pairs, table);
  table.refresh_all();
  return table;
}

void rescore_merged(CriterionKind kind, const std::vector<GaussianComponent>& slots, std::size_t j, std::size_t k,
                    ScoreTable& table) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (table.alive(i) && i != j) pairs.emplace_back(std::min(i, j), std::max(i, j));
  }
  score_pairs(kind, slots, pairs, table);
  table.after_merge(j, k);
}

GaussianMixture live_mixture(const std::vector<GaussianComponent>& slots, const ScoreTable& table) {
  std::vector<GaussianComponent> comps;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (table.alive(s)) comps.push_back(slots[s]);
  }
  return GaussianMixture(std::move(comps));
}

}  // namespace

StepResult reduce_step(const GaussianMixture& m, CriterionKind kind, const ScoringContext& ctx) {
  if (m.order() < 2) throw ArgumentError("reduce_step needs a mixture of order >= 2");
  const ScoreTable table = score_mixture(kind, m, ctx);
  const auto best = table.best();
  if (!best.found) throw ReductionStuck(stuck_message(kind, m.order()), kind);
  return {normalize(merge_pair(m, best.j, best.k)), {best.j, best.k}, best.score};
}

ReductionTrace reduce_to(const GaussianMixture& m, std::size_t target_order, CriterionKind kind,
                         const ReduceOptions& opts) {
  if (target_order < 1 || target_order > m.order()) {
    throw ArgumentError("target order must satisfy 1 <= target <= order");
  }
  const GaussianMixture original = normalize(m);
  const ScoringContext ctx{&original, opts.quad};
  const QuadSpec kl_spec = make_quad_spec(original, opts.quad);
  const bool local = is_pair_local(kind);

  std::vector<GaussianComponent> slots(original.begin(), original.end());
  ScoreTable table(slots.size());
  // Scores of a pair-local fallback, built the first time it is needed and
  // maintained alongside `table` from then on.
  std::optional<ScoreTable> fb_table;
  std::size_t order = slots.size();
  std::vector<ReductionStep> steps;
  if (order > target_order && local) table = score_mixture(kind, original, ctx);

  while (order > target_order) {
    if (!local) {
      // Whole-mixture criteria are rescored from scratch on the compacted
      // mixture, so slots are compacted too.
      const GaussianMixture current = live_mixture(slots, table);
      slots.assign(current.begin(), current.end());
      table = score_mixture(kind, current, ctx);
      fb_table.reset();
    }
    Best best = table.best();
    CriterionKind used = kind;
    if (!best.found) {
      if (!opts.fallback) {
        throw ReductionStuck(stuck_message(kind, order), kind,
                             ReductionTrace{steps, normalize(live_mixture(slots, table))});
      }
      used = *opts.fallback;
      if (is_pair_local(used)) {
        if (!fb_table) fb_table = score_slots(used, slots, table);
        best = fb_table->best();
      } else {
        const auto fb = score_mixture(used, live_mixture(slots, table), ctx).best();
        std::vector<std::size_t> slot_of;
        for (std::size_t s = 0; s < slots.size(); ++s) {
          if (table.alive(s)) slot_of.push_back(s);
        }
        if (fb.found) best = {slot_of[fb.j], slot_of[fb.k], fb.score, true};
      }
      if (!best.found) {
        throw ReductionStuck(stuck_message(used, order), used,
                             ReductionTrace{steps, normalize(live_mixture(slots, table))});
      }
    }

    ReductionStep step;
    step.order_before = order;
    step.chosen_pair = {table.index_of(best.j), table.index_of(best.k)};
    step.score = best.score;
    step.criterion = used;

    slots[best.j] = moment_preserving_merge(slots[best.j], slots[best.k]);
    table.retire(best.k);
    if (fb_table) fb_table->retire(best.k);
    --order;
    if (opts.track_kl) step.kl_to_true = kl_numeric(original, live_mixture(slots, table), kl_spec);
    steps.push_back(step);

    if (order > target_order) {
      if (local) rescore_merged(kind, slots, best.j, best.k, table);
      if (fb_table) rescore_merged(*opts.fallback, slots, best.j, best.k, *fb_table);
    }
  }
  return {std::move(steps), normalize(live_mixture(slots, table))};
}

}  // namespace gmred

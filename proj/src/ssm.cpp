#include "gmred/ssm.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/LU>

#include "gmred/reduce.hpp"

namespace gmred {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

// Backward terms beyond this count while some precision is still singular
// are treated as a failure rather than left to grow without bound.
constexpr std::size_t kMaxDeferredTerms = 1 << 16;

std::string at_step(std::size_t n, const char* what) {
  std::ostringstream os;
  os << "step " << n << ": " << what;
  return os.str();
}

Eigen::LLT<Matrix> require_pd(const Matrix& a, const char* what) {
  auto llt = try_cholesky(a);
  if (!llt) throw NumericError(std::string(what) + " is not positive definite");
  return *llt;
}

double log_sum_exp(const std::vector<double>& v) {
  double peak = -std::numeric_limits<double>::infinity();
  for (double x : v) peak = std::max(peak, x);
  if (!std::isfinite(peak)) throw NumericError("all mixture weights vanished");
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - peak);
  return peak + std::log(acc);
}

std::vector<double> log_weights(const GaussianMixture& m) {
  const double log_total = std::log(m.total_weight());
  std::vector<double> out;
  for (const auto& c : m) out.push_back(std::log(c.weight()) - log_total);
  return out;
}

// Components built from log weights, normalized; terms that underflow are dropped.
GaussianMixture from_log_weights(const std::vector<double>& lw, std::vector<Vector>& means, std::vector<Matrix>& covs,
                                 double* log_norm = nullptr) {
  const double lse = log_sum_exp(lw);
  if (log_norm) *log_norm = lse;
  std::vector<GaussianComponent> comps;
  for (std::size_t i = 0; i < lw.size(); ++i) {
    const double w = std::exp(lw[i] - lse);
    if (w > 0.0) comps.emplace_back(w, std::move(means[i]), std::move(covs[i]));
  }
  return normalize(GaussianMixture(std::move(comps)));
}

GaussianMixture cap_mixture(const GaussianMixture& m, const FilterOptions& opts) {
  if (m.order() <= opts.cap) return m;
  ReduceOptions ro;
  ro.quad = opts.quad;
  ro.fallback = opts.fallback;
  return reduce_to(m, opts.cap, opts.criterion, ro).final_mixture;
}

// exp(log_c - x^T Lambda x / 2 + h^T x)
struct InfoTerm {
  double log_c;
  Matrix Lambda;
  Vector h;
};

std::vector<InfoTerm> backward_update(const std::vector<InfoTerm>& terms, const Vector& y,
                                      const LinearStateSpaceModel& model) {
  const auto lb = log_weights(model.obs_noise);
  std::vector<InfoTerm> out;
  out.reserve(terms.size() * model.obs_noise.order());
  for (std::size_t j = 0; j < model.obs_noise.order(); ++j) {
    const auto& w = model.obs_noise[j];
    const Matrix rinv_h = w.solve_matrix(model.H);
    const Vector e = y - w.mean();
    const Vector rinv_e = w.solve(e);
    const Matrix info = symmetrized(model.H.transpose() * rinv_h);
    const Vector hinc = model.H.transpose() * rinv_e;
    const double cinc = lb[j] - 0.5 * (model.obs_dim() * kLog2Pi + w.log_det_cov() + e.dot(rinv_e));
    for (const auto& t : terms) out.push_back({t.log_c + cinc, t.Lambda + info, t.h + hinc});
  }
  return out;
}

std::vector<InfoTerm> backward_predict(const std::vector<InfoTerm>& terms, const LinearStateSpaceModel& model) {
  const auto la = log_weights(model.sys_noise);
  const int dx = model.state_dim();
  const Matrix eye = Matrix::Identity(dx, dx);
  std::vector<InfoTerm> out;
  out.reserve(terms.size() * model.sys_noise.order());
  for (std::size_t i = 0; i < model.sys_noise.order(); ++i) {
    const auto& v = model.sys_noise[i];
    const Matrix p = symmetrized(model.G * v.cov() * model.G.transpose());
    const Vector b = model.G * v.mean();
    for (const auto& t : terms) {
      const Eigen::PartialPivLU<Matrix> a((eye + t.Lambda * p).eval());
      const double det = a.determinant();
      if (!(det > 0.0)) throw NumericError("backward prediction determinant is not positive");
      const Matrix lt = symmetrized(a.solve(t.Lambda));
      const Vector ht = a.solve(t.h);
      const double ct = 0.5 * t.h.dot(p * ht);
      out.push_back({t.log_c + la[i] - 0.5 * std::log(det) - 0.5 * b.dot(lt * b) + ht.dot(b) + ct,
                     symmetrized(model.F.transpose() * lt * model.F), model.F.transpose() * (ht - lt * b)});
    }
  }
  return out;
}

// Reduces the backward terms when every precision is PD (so each term is a
// scaled Gaussian); otherwise only rescales them.
std::vector<InfoTerm> backward_cap(std::vector<InfoTerm> terms, const FilterOptions& opts) {
  double peak = -std::numeric_limits<double>::infinity();
  for (const auto& t : terms) peak = std::max(peak, t.log_c);
  for (auto& t : terms) t.log_c -= peak;
  if (terms.size() <= opts.cap) return terms;

  const int d = static_cast<int>(terms.front().h.size());
  std::vector<double> lw;
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  for (const auto& t : terms) {
    auto llt = try_cholesky(t.Lambda);
    if (!llt) {
      if (terms.size() > kMaxDeferredTerms) {
        throw NumericError("backward mixture grew too large while its precisions stay singular");
      }
      return terms;
    }
    Vector mu = llt->solve(t.h);
    lw.push_back(t.log_c + 0.5 * d * kLog2Pi - 0.5 * log_det(*llt) + 0.5 * t.h.dot(mu));
    means.push_back(std::move(mu));
    covs.push_back(symmetrized(llt->solve(Matrix::Identity(d, d))));
  }
  const GaussianMixture reduced = cap_mixture(from_log_weights(lw, means, covs), opts);
  std::vector<InfoTerm> out;
  for (const auto& c : reduced) {
    const Matrix lambda = symmetrized(c.solve_matrix(Matrix::Identity(d, d)));
    const Vector h = c.solve(c.mean());
    out.push_back({std::log(c.weight()) - 0.5 * d * kLog2Pi - 0.5 * c.log_det_cov() - 0.5 * c.mean().dot(h),
                   lambda, h});
  }
  return out;
}

// Normalized product of a forward mixture with backward terms.
GaussianMixture combine(const GaussianMixture& forward, const std::vector<InfoTerm>& terms) {
  const int d = forward.dim();
  const Matrix eye = Matrix::Identity(d, d);
  const auto lg = log_weights(forward);
  std::vector<double> lw;
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  for (std::size_t k = 0; k < forward.order(); ++k) {
    const Vector& m = forward[k].mean();
    const Matrix& p = forward[k].cov();
    for (const auto& t : terms) {
      const Eigen::PartialPivLU<Matrix> a((eye + t.Lambda * p).eval());
      const double det = a.determinant();
      if (!(det > 0.0)) throw NumericError("smoothing combination determinant is not positive");
      const Vector ht = a.solve(t.h);
      const Vector lm = a.solve(t.Lambda * m);
      lw.push_back(lg[k] + t.log_c - 0.5 * std::log(det) - 0.5 * m.dot(lm) + ht.dot(m) + 0.5 * t.h.dot(p * ht));
      // (I + P Lambda) = (I + Lambda P)^T
      means.push_back(a.transpose().solve(m + p * t.h));
      Matrix ps = symmetrized(a.transpose().solve(p));
      require_pd(ps, "smoothed covariance");
      covs.push_back(std::move(ps));
    }
  }
  return from_log_weights(lw, means, covs);
}

void check_observation(const Vector& y, const LinearStateSpaceModel& model) {
  if (y.size() != model.obs_dim()) throw ArgumentError("observation has the wrong dimension");
  if (!y.allFinite()) throw ArgumentError("observation contains non-finite values");
}

}  // namespace

void LinearStateSpaceModel::validate() const {
  const auto dx = F.rows();
  if (F.cols() != dx || dx == 0) throw ArgumentError("F must be square and nonempty");
  if (G.rows() != dx) throw ArgumentError("G must have as many rows as F");
  if (H.cols() != dx || H.rows() == 0) throw ArgumentError("H must have as many columns as F");
  if (sys_noise.dim() != G.cols()) throw ArgumentError("system noise dimension must match the columns of G");
  if (obs_noise.dim() != H.rows()) throw ArgumentError("observation noise dimension must match the rows of H");
  if (!F.allFinite() || !G.allFinite() || !H.allFinite()) throw ArgumentError("model matrices must be finite");
}

GaussianMixture predict_step(const GaussianMixture& posterior, const LinearStateSpaceModel& model) {
  if (posterior.dim() != model.state_dim()) throw ArgumentError("posterior dimension does not match the model");
  const double post_total = posterior.total_weight();
  const double noise_total = model.sys_noise.total_weight();
  std::vector<GaussianComponent> comps;
  comps.reserve(posterior.order() * model.sys_noise.order());
  for (const auto& v : model.sys_noise) {
    const Matrix gqg = model.G * v.cov() * model.G.transpose();
    const Vector b = model.G * v.mean();
    for (const auto& c : posterior) {
      const double w = (v.weight() / noise_total) * (c.weight() / post_total);
      if (w == 0.0) continue;  // underflow
      comps.emplace_back(w, model.F * c.mean() + b, symmetrized(model.F * c.cov() * model.F.transpose() + gqg));
    }
  }
  return GaussianMixture(std::move(comps));
}

UpdateResult filter_step(const GaussianMixture& predicted, const Vector& y, const LinearStateSpaceModel& model) {
  if (predicted.dim() != model.state_dim()) throw ArgumentError("predicted dimension does not match the model");
  check_observation(y, model);
  const int dx = model.state_dim();
  const Matrix eye = Matrix::Identity(dx, dx);
  const auto lb = log_weights(model.obs_noise);
  const auto ld = log_weights(predicted);

  std::vector<double> lw;
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  for (std::size_t j = 0; j < model.obs_noise.order(); ++j) {
    const auto& w = model.obs_noise[j];
    for (std::size_t k = 0; k < predicted.order(); ++k) {
      const auto& c = predicted[k];
      const Vector e = y - model.H * c.mean() - w.mean();
      const Matrix vht = c.cov() * model.H.transpose();
      const auto s = require_pd(symmetrized(model.H * vht + w.cov()), "innovation covariance");
      const Matrix gain = s.solve(vht.transpose()).transpose();
      const Vector s_e = s.solve(e);
      const Matrix ikh = eye - gain * model.H;
      lw.push_back(lb[j] + ld[k] - 0.5 * (model.obs_dim() * kLog2Pi + log_det(s) + e.dot(s_e)));
      means.push_back(c.mean() + gain * e);
      covs.push_back(symmetrized(ikh * c.cov() * ikh.transpose() + gain * w.cov() * gain.transpose()));
    }
  }
  double log_lik = 0.0;
  GaussianMixture post = from_log_weights(lw, means, covs, &log_lik);
  return {std::move(post), log_lik};
}

GaussianMixture default_prior(int state_dim) {
  if (state_dim < 1) throw ArgumentError("state dimension must be positive");
  return GaussianMixture(
      GaussianComponent(1.0, Vector::Zero(state_dim), 1e4 * Matrix::Identity(state_dim, state_dim)));
}

FilterRun run_filter(const LinearStateSpaceModel& model, const std::vector<Vector>& ys, const GaussianMixture& prior,
                     const FilterOptions& opts) {
  model.validate();
  if (opts.cap < 1) throw ArgumentError("component cap must be at least 1");
  if (ys.empty()) throw ArgumentError("observation series is empty");
  if (prior.dim() != model.state_dim()) throw ArgumentError("prior dimension does not match the model");
  for (const auto& y : ys) check_observation(y, model);

  FilterRun run;
  run.observations = ys;
  run.options = opts;
  GaussianMixture post = normalize(prior);
  for (std::size_t n = 0; n < ys.size(); ++n) {
    try {
      GaussianMixture pred = predict_step(post, model);
      if (opts.cap_after_predict) pred = cap_mixture(pred, opts);
      auto upd = filter_step(pred, ys[n], model);
      run.log_likelihood += upd.log_lik;
      post = cap_mixture(upd.posterior, opts);
      run.predicted.push_back(std::move(pred));
      run.filtered.push_back(post);
    } catch (const ArgumentError&) {
      throw;
    } catch (const ReductionStuck& e) {
      throw ReductionStuck(at_step(n + 1, e.what()), e.criterion());
    } catch (const NumericError& e) {
      throw NumericError(at_step(n + 1, e.what()));
    }
  }
  if (!std::isfinite(run.log_likelihood)) throw NumericError("log-likelihood is not finite");
  return run;
}

FilterRun run_smoother(const FilterRun& run, const LinearStateSpaceModel& model) {
  model.validate();
  const std::size_t n_steps = run.observations.size();
  if (n_steps == 0 || run.predicted.size() != n_steps || run.filtered.size() != n_steps) {
    throw ArgumentError("filter run is incomplete");
  }
  FilterRun out = run;
  std::vector<GaussianMixture> smoothed(run.filtered);
  const int dx = model.state_dim();
  std::vector<InfoTerm> terms{{0.0, Matrix::Zero(dx, dx), Vector::Zero(dx)}};
  for (std::size_t n = n_steps; n-- > 0;) {
    try {
      if (n + 1 < n_steps) terms = backward_predict(terms, model);
      terms = backward_cap(backward_update(terms, run.observations[n], model), run.options);
      if (n + 1 < n_steps) smoothed[n] = cap_mixture(combine(run.predicted[n], terms), run.options);
    } catch (const ArgumentError&) {
      throw;
    } catch (const ReductionStuck& e) {
      throw ReductionStuck(at_step(n + 1, e.what()), e.criterion());
    } catch (const NumericError& e) {
      throw NumericError(at_step(n + 1, e.what()));
    }
  }
  out.smoothed = std::move(smoothed);
  return out;
}

LinearStateSpaceModel trend_model(double tau2, double xi2, double alpha, double sigma2) {
  for (double v : {tau2, xi2, sigma2}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ArgumentError("trend model variances must be positive and finite");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("trend model mixing weight must lie in (0, 1)");
  const Matrix one = Matrix::Ones(1, 1);
  const Vector zero = Vector::Zero(1);
  GaussianMixture sys({GaussianComponent(alpha, zero, tau2 * one), GaussianComponent(1.0 - alpha, zero, xi2 * one)});
  GaussianMixture obs(GaussianComponent(1.0, zero, sigma2 * one));
  return {one, one, one, std::move(sys), std::move(obs)};
}

}  // namespace gmred

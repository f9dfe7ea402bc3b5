// gmred: Gaussian mixture reduction and Gaussian-sum filtering from the shell.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gmred/criteria.hpp"
#include "gmred/fixtures.hpp"
#include "gmred/io.hpp"
#include "gmred/parallel.hpp"
#include "gmred/reduce.hpp"
#include "gmred/ssm.hpp"

namespace fs = std::filesystem;
using namespace gmred;

namespace {

enum ExitCode : int { kOk = 0, kFailure = 1, kBadArgument = 2, kNumeric = 3, kStuck = 4 };

struct Globals {
  std::uint64_t seed = fixtures::kDefaultSeed;
  double quad_tol = 1e-9;
  int quad_nodes = 400;
  double quad_box_k = 10.0;
  int threads = 1;

  QuadOptions quad() const { return {quad_tol, quad_nodes, quad_box_k}; }
};

std::optional<CriterionKind> parse_fallback(const std::string& name) {
  if (name == "none") return std::nullopt;
  return parse_criterion(name);
}

// Writes to `path`, or stdout when it is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

// Printed fixture weights sum to 0.9999, so inputs are normalized on load.
GaussianMixture load_mixture(const std::string& path) { return normalize(mixture_from_json(read_json(path))); }

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// "a..b" or "a"
std::pair<std::size_t, std::size_t> parse_range(const std::string& s) {
  try {
    const auto dots = s.find("..");
    if (dots == std::string::npos) {
      const auto v = std::stoul(s);
      return {v, v};
    }
    return {std::stoul(s.substr(0, dots)), std::stoul(s.substr(dots + 2))};
  } catch (const std::exception&) {
    throw ArgumentError("invalid order range '" + s + "'");
  }
}

struct FixturesArgs {
  std::string out_dir = ".";
};

int cmd_fixtures(const FixturesArgs& a, const Globals& g) {
  const fs::path dir(a.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  write_json(dir / "table1.json", mixture_to_json(fixtures::table1()));
  write_json(dir / "table3.json", mixture_to_json(fixtures::table3()));
  write_series_csv(dir / "levelshift.csv", fixtures::levelshift_series(g.seed));
  return kOk;
}

struct ReduceArgs {
  std::string in;
  std::size_t to = 1;
  std::string criterion = "pearson";
  std::string fallback = "none";
  bool track_kl = false;
  std::string out;
  std::string trace;
};

int cmd_reduce(const ReduceArgs& a, const Globals& g) {
  const GaussianMixture m = load_mixture(a.in);
  ReduceOptions opts;
  opts.track_kl = a.track_kl;
  opts.quad = g.quad();
  opts.fallback = parse_fallback(a.fallback);
  const auto kind = parse_criterion(a.criterion);
  try {
    const ReductionTrace trace = reduce_to(m, a.to, kind, opts);
    if (!a.trace.empty()) write_json(a.trace, trace_to_json(trace));
    emit(a.out, mixture_to_json(trace.final_mixture).dump(2) + "\n");
  } catch (const ReductionStuck& e) {
    if (!a.trace.empty() && e.partial()) write_json(a.trace, trace_to_json(*e.partial()));
    throw;
  }
  return kOk;
}

struct CompareArgs {
  std::string in;
  std::string criteria = "pearson,kitagawa,runnalls,salmond,isd";
  std::string orders;
  std::string fallback = "runnalls";
  bool optimal = false;
  int restarts = 3;
  std::string out;
};

int cmd_compare(const CompareArgs& a, const Globals& g) {
  const GaussianMixture m = normalize(load_mixture(a.in));
  if (m.order() < 2) throw ArgumentError("mixture must have at least two components");
  auto [lo, hi] = a.orders.empty() ? std::pair<std::size_t, std::size_t>{1, m.order() - 1} : parse_range(a.orders);
  if (lo < 1 || hi < lo || hi > m.order()) throw ArgumentError("order range must satisfy 1 <= lo <= hi <= order");

  const auto names = split_list(a.criteria);
  if (names.empty()) throw ArgumentError("no criteria given");
  std::vector<std::map<std::size_t, double>> columns;
  for (const auto& name : names) {
    ReduceOptions opts;
    opts.track_kl = true;
    opts.quad = g.quad();
    opts.fallback = parse_fallback(a.fallback);
    const auto trace = reduce_to(m, lo, parse_criterion(name), opts);
    std::map<std::size_t, double> col;
    col[m.order()] = 0.0;
    for (const auto& s : trace.steps) col[s.order_before - 1] = *s.kl_to_true;
    columns.push_back(std::move(col));
  }

  std::map<std::size_t, double> optimal;
  if (a.optimal) {
    GlobalFitConfig cfg;
    cfg.quad = g.quad();
    cfg.seed = g.seed;
    cfg.restarts = a.restarts;
    for (std::size_t order = lo; order <= hi; ++order) {
      optimal[order] = order == m.order() ? 0.0 : global_kl_fit(m, order, cfg).kl;
    }
  }

  std::ostringstream os;
  os << "order";
  for (const auto& name : names) os << ',' << name;
  if (a.optimal) os << ",optimal";
  os << '\n';
  for (std::size_t order = lo; order <= hi; ++order) {
    os << order;
    for (const auto& col : columns) os << ',' << format_number(col.at(order));
    if (a.optimal) os << ',' << format_number(optimal.at(order));
    os << '\n';
  }
  emit(a.out, os.str());
  return kOk;
}

struct GridArgs {
  std::string in;
  std::vector<double> lo;
  std::vector<double> hi;
  int points = 0;
  std::string out;
};

int cmd_eval_grid(const GridArgs& a, const Globals&) {
  const GaussianMixture m = load_mixture(a.in);
  const int d = m.dim();
  if (d > 2) throw ArgumentError("eval-grid supports d = 1 or d = 2 only");
  auto [box_lo, box_hi] = default_box(m, 5.0);
  if (!a.lo.empty()) {
    if (static_cast<int>(a.lo.size()) != d) throw ArgumentError("--lo needs one value per dimension");
    box_lo = Eigen::Map<const Vector>(a.lo.data(), d);
  }
  if (!a.hi.empty()) {
    if (static_cast<int>(a.hi.size()) != d) throw ArgumentError("--hi needs one value per dimension");
    box_hi = Eigen::Map<const Vector>(a.hi.data(), d);
  }
  if (!(box_lo.array() < box_hi.array()).all()) throw ArgumentError("grid requires lo < hi");
  const int n = a.points > 0 ? a.points : (d == 1 ? 401 : 201);
  if (n < 2) throw ArgumentError("grid needs at least 2 points per axis");

  auto coord = [&](int axis, int i) { return box_lo(axis) + (box_hi(axis) - box_lo(axis)) * i / (n - 1); };
  std::ostringstream os;
  Vector x(d);
  if (d == 1) {
    os << "x,density\n";
    for (int i = 0; i < n; ++i) {
      x(0) = coord(0, i);
      os << format_number(x(0)) << ',' << format_number(density(m, x)) << '\n';
    }
  } else {
    os << "x,y,density\n";
    for (int i = 0; i < n; ++i) {
      x(0) = coord(0, i);
      for (int j = 0; j < n; ++j) {
        x(1) = coord(1, j);
        os << format_number(x(0)) << ',' << format_number(x(1)) << ',' << format_number(density(m, x)) << '\n';
      }
    }
  }
  emit(a.out, os.str());
  return kOk;
}

struct FilterArgs {
  std::string model;
  std::string data;
  std::string prior;
  std::size_t cap = 8;
  std::string criterion = "pearson";
  std::string fallback = "runnalls";
  bool cap_after_predict = false;
  std::string out;
};

int cmd_filter(const FilterArgs& a, const Globals& g, bool smooth) {
  const Json model_json = read_json(a.model);
  const LinearStateSpaceModel model = model_from_json(model_json);
  GaussianMixture prior = default_prior(model.state_dim());
  if (!a.prior.empty()) {
    prior = load_mixture(a.prior);
  } else if (model_json.contains("prior")) {
    prior = mixture_from_json(model_json.at("prior"));
  }
  FilterOptions opts;
  opts.cap = a.cap;
  opts.criterion = parse_criterion(a.criterion);
  opts.fallback = parse_fallback(a.fallback);
  opts.cap_after_predict = a.cap_after_predict;
  opts.quad = g.quad();
  FilterRun run = run_filter(model, read_series_csv(a.data), prior, opts);
  if (smooth) run = run_smoother(run, model);
  emit(a.out, run_to_json(run).dump(2) + "\n");
  std::cerr << "log-likelihood " << format_number(run.log_likelihood, 12) << '\n';
  return kOk;
}

void add_filter_options(CLI::App* sub, FilterArgs& a) {
  sub->add_option("--model", a.model, "Model JSON")->required()->check(CLI::ExistingFile);
  sub->add_option("--data", a.data, "Observation CSV")->required()->check(CLI::ExistingFile);
  sub->add_option("--prior", a.prior, "Prior mixture JSON (default: N(0, 1e4 I))")->check(CLI::ExistingFile);
  sub->add_option("--cap", a.cap, "Maximum number of components")->check(CLI::PositiveNumber);
  sub->add_option("--criterion", a.criterion, "Reduction criterion");
  sub->add_option("--fallback", a.fallback, "Criterion used when every pair is excluded, or 'none'");
  sub->add_flag("--cap-after-predict", a.cap_after_predict, "Also reduce after each prediction");
  sub->add_option("--out", a.out, "Output run JSON (default stdout)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian mixture reduction and Gaussian-sum filtering"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Seed for generated data and optimizer restarts");
  app.add_option("--quad-tol", g.quad_tol, "Relative tolerance of numerical integration")->check(CLI::PositiveNumber);
  app.add_option("--quad-nodes", g.quad_nodes, "Gauss-Legendre nodes per axis in 2D")->check(CLI::Range(2, 100000));
  app.add_option("--quad-box-k", g.quad_box_k, "Integration box half-width in component std devs")
      ->check(CLI::PositiveNumber);
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::Range(1, 1024));

  FixturesArgs fx;
  auto* fixtures_cmd = app.add_subcommand("fixtures", "Write table1.json, table3.json and levelshift.csv");
  fixtures_cmd->add_option("--out-dir", fx.out_dir, "Output directory");

  ReduceArgs ra;
  auto* reduce_cmd = app.add_subcommand("reduce", "Greedy reduction to a target order");
  reduce_cmd->add_option("--in", ra.in, "Mixture JSON")->required()->check(CLI::ExistingFile);
  reduce_cmd->add_option("--to", ra.to, "Target order")->required();
  reduce_cmd->add_option("--criterion", ra.criterion, "pearson|kitagawa|runnalls|salmond|isd|numkl");
  reduce_cmd->add_option("--fallback", ra.fallback, "Criterion used when every pair is excluded, or 'none'");
  reduce_cmd->add_flag("--track-kl", ra.track_kl, "Record KL to the input after every merge");
  reduce_cmd->add_option("--out", ra.out, "Reduced mixture JSON (default stdout)");
  reduce_cmd->add_option("--trace", ra.trace, "Trace JSON");

  CompareArgs ca;
  auto* compare_cmd = app.add_subcommand("compare", "KL to the input versus order for several criteria (CSV)");
  compare_cmd->add_option("--in", ca.in, "Mixture JSON")->required()->check(CLI::ExistingFile);
  compare_cmd->add_option("--criteria", ca.criteria, "Comma-separated criteria");
  compare_cmd->add_option("--orders", ca.orders, "Order range lo..hi (default 1..order-1)");
  compare_cmd->add_option("--fallback", ca.fallback, "Criterion used when every pair is excluded, or 'none'");
  compare_cmd->add_flag("--optimal", ca.optimal, "Add a column from the global KL fit");
  compare_cmd->add_option("--restarts", ca.restarts, "Global fit restarts")->check(CLI::PositiveNumber);
  compare_cmd->add_option("--out", ca.out, "Output CSV (default stdout)");

  GridArgs ga;
  auto* grid_cmd = app.add_subcommand("eval-grid", "Mixture density on a regular grid (CSV)");
  grid_cmd->add_option("--in", ga.in, "Mixture JSON")->required()->check(CLI::ExistingFile);
  grid_cmd->add_option("--lo", ga.lo, "Lower corner, one value per dimension");
  grid_cmd->add_option("--hi", ga.hi, "Upper corner, one value per dimension");
  grid_cmd->add_option("--points", ga.points, "Points per axis (default 401 in 1D, 201 in 2D)");
  grid_cmd->add_option("--out", ga.out, "Output CSV (default stdout)");

  FilterArgs fa;
  auto* filter_cmd = app.add_subcommand("filter", "Gaussian-sum filter");
  add_filter_options(filter_cmd, fa);
  FilterArgs sa;
  auto* smooth_cmd = app.add_subcommand("smooth", "Gaussian-sum filter followed by the two-filter smoother");
  add_filter_options(smooth_cmd, sa);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kBadArgument;
  }

  try {
    set_num_threads(g.threads);
    if (*fixtures_cmd) return cmd_fixtures(fx, g);
    if (*reduce_cmd) return cmd_reduce(ra, g);
    if (*compare_cmd) return cmd_compare(ca, g);
    if (*grid_cmd) return cmd_eval_grid(ga, g);
    if (*filter_cmd) return cmd_filter(fa, g, false);
    if (*smooth_cmd) return cmd_filter(sa, g, true);
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadArgument;
  } catch (const ReductionStuck& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kStuck;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kStuck;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

#include "gmred/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gmred {

namespace {

constexpr double kSymmetryTol = 1e-9;

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json matrix_to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

double number(const Json& j, const char* what) {
  if (!j.is_number()) throw ArgumentError(std::string(what) + " must be a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) throw ArgumentError(std::string(what) + " must be finite");
  return x;
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ArgumentError(std::string("missing field '") + key + "'");
  return j.at(key);
}

Vector vector_from_json(const Json& j, const char* what) {
  if (!j.is_array()) throw ArgumentError(std::string(what) + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], what);
  return v;
}

Matrix matrix_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw ArgumentError(std::string(what) + " must be a nonempty nested array");
  const std::size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty()) throw ArgumentError(std::string(what) + " rows must be nonempty arrays");
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ArgumentError(std::string(what) + " is ragged");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = number(j[r][c], what);
    }
  }
  return m;
}

}  // namespace

Json mixture_to_json(const GaussianMixture& m) {
  Json comps = Json::array();
  for (const auto& c : m) {
    comps.push_back({{"weight", c.weight()}, {"mean", vector_to_json(c.mean())}, {"cov", matrix_to_json(c.cov())}});
  }
  return {{"dim", m.dim()}, {"components", std::move(comps)}};
}

GaussianMixture mixture_from_json(const Json& j) {
  const Json& dim_j = field(j, "dim");
  if (!dim_j.is_number_integer() || dim_j.get<long>() < 1) throw ArgumentError("'dim' must be a positive integer");
  const auto dim = static_cast<Eigen::Index>(dim_j.get<long>());
  const Json& comps_j = field(j, "components");
  if (!comps_j.is_array() || comps_j.empty()) throw ArgumentError("'components' must be a nonempty array");
  std::vector<GaussianComponent> comps;
  for (const auto& cj : comps_j) {
    const double w = number(field(cj, "weight"), "weight");
    Vector mean = vector_from_json(field(cj, "mean"), "mean");
    Matrix cov = matrix_from_json(field(cj, "cov"), "cov");
    if (mean.size() != dim || cov.rows() != dim || cov.cols() != dim) {
      throw ArgumentError("component dimensions do not match 'dim'");
    }
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale) {
      throw ArgumentError("covariance is not symmetric");
    }
    comps.emplace_back(w, std::move(mean), symmetrized(cov));
  }
  return GaussianMixture(std::move(comps));
}

Json model_to_json(const LinearStateSpaceModel& model) {
  return {{"F", matrix_to_json(model.F)},
          {"G", matrix_to_json(model.G)},
          {"H", matrix_to_json(model.H)},
          {"sys_noise", mixture_to_json(model.sys_noise)},
          {"obs_noise", mixture_to_json(model.obs_noise)}};
}

LinearStateSpaceModel model_from_json(const Json& j) {
  LinearStateSpaceModel model{matrix_from_json(field(j, "F"), "F"), matrix_from_json(field(j, "G"), "G"),
                              matrix_from_json(field(j, "H"), "H"), mixture_from_json(field(j, "sys_noise")),
                              mixture_from_json(field(j, "obs_noise"))};
  model.validate();
  return model;
}

Json trace_to_json(const ReductionTrace& trace) {
  Json steps = Json::array();
  for (const auto& s : trace.steps) {
    Json step = {{"order_before", s.order_before},
                 {"order_after", s.order_before - 1},
                 {"pair", {s.chosen_pair.first, s.chosen_pair.second}},
                 {"score", s.score},
                 {"criterion", std::string(to_string(s.criterion))}};
    if (s.kl_to_true) step["kl_to_true"] = *s.kl_to_true;
    steps.push_back(std::move(step));
  }
  return {{"steps", std::move(steps)}, {"final", mixture_to_json(trace.final_mixture)}};
}

Json run_to_json(const FilterRun& run) {
  Json steps = Json::array();
  for (std::size_t n = 0; n < run.observations.size(); ++n) {
    Json step = {{"n", n + 1},
                 {"y", vector_to_json(run.observations[n])},
                 {"predicted", mixture_to_json(run.predicted[n])},
                 {"filtered", mixture_to_json(run.filtered[n])},
                 {"filtered_mean", vector_to_json(mixture_moments(run.filtered[n]).mean)}};
    if (run.smoothed) {
      step["smoothed"] = mixture_to_json((*run.smoothed)[n]);
      step["smoothed_mean"] = vector_to_json(mixture_moments((*run.smoothed)[n]).mean);
    }
    steps.push_back(std::move(step));
  }
  Json out = {{"cap", run.options.cap},
              {"criterion", std::string(to_string(run.options.criterion))},
              {"cap_after_predict", run.options.cap_after_predict},
              {"log_likelihood", run.log_likelihood},
              {"steps", std::move(steps)}};
  if (run.options.fallback) out["fallback"] = std::string(to_string(*run.options.fallback));
  return out;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ArgumentError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("error writing " + path.string());
}

std::vector<Vector> read_series_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open " + path.string());
  std::vector<Vector> ys;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        const double x = std::stod(cell, &used);
        if (cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
        vals.push_back(x);
      } catch (const std::exception&) {
        numeric = false;
      }
      if (!numeric) break;
    }
    if (!numeric) {
      if (ys.empty() && line_no == 1) continue;
      throw ArgumentError(path.string() + ":" + std::to_string(line_no) + ": not a numeric row");
    }
    Vector y = Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    if (!ys.empty() && y.size() != ys.front().size()) {
      throw ArgumentError(path.string() + ":" + std::to_string(line_no) + ": inconsistent column count");
    }
    ys.push_back(std::move(y));
  }
  if (ys.empty()) throw ArgumentError(path.string() + ": no observations");
  return ys;
}

void write_series_csv(const std::filesystem::path& path, const std::vector<Vector>& ys, const std::string& header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << header << '\n';
  for (const auto& y : ys) {
    for (Eigen::Index i = 0; i < y.size(); ++i) out << (i ? "," : "") << format_number(y(i), 17);
    out << '\n';
  }
  if (!out) throw std::runtime_error("error writing " + path.string());
}

std::string format_number(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

}  // namespace gmred

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmred/gaussmix.hpp"
#include "gmred/reduce.hpp"
#include "gmred/ssm.hpp"

namespace gmred {

using Json = nlohmann::json;

/// {"dim": d, "components": [{"weight": w, "mean": [...], "cov": [[...], ...]}, ...]}
Json mixture_to_json(const GaussianMixture& m);
/// Accepts covariances symmetric to 1e-9 (relative) and symmetrizes them.
/// Weights are kept as written; callers normalize when they need to.
GaussianMixture mixture_from_json(const Json& j);

/// {"F": [[...]], "G": [[...]], "H": [[...]], "sys_noise": mixture, "obs_noise": mixture}
/// with an optional "prior" mixture.
Json model_to_json(const LinearStateSpaceModel& model);
LinearStateSpaceModel model_from_json(const Json& j);

Json trace_to_json(const ReductionTrace& trace);
Json run_to_json(const FilterRun& run);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

/// One observation vector per row, comma separated. A first row that does not
/// parse as numbers is taken as a header.
std::vector<Vector> read_series_csv(const std::filesystem::path& path);
void write_series_csv(const std::filesystem::path& path, const std::vector<Vector>& ys, const std::string& header = "y");

/// Shortest representation with at most `digits` significant digits.
std::string format_number(double x, int digits = 9);

}  // namespace gmred

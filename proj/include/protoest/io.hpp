#pragma once

// File formats: world configs, transform files, evaluation reports, run
// manifests and small serialization helpers.

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

#include "protoest/datastore.hpp"
#include "protoest/protonet.hpp"
#include "protoest/theory.hpp"
#include "protoest/transforms.hpp"
#include "protoest/world.hpp"

namespace protoest {

using nlohmann::json;

inline constexpr std::string_view kToolVersion = "0.3.1";

json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j);
json vector_to_json(const Vector& v);
Vector vector_from_json(const json& j);

/// Shortest decimal that round-trips a double.
std::string format_double(double v);

/// "fnv1a64:<16 hex digits>" of the file bytes.
std::string file_digest(const std::filesystem::path& path);

/// Comma-separated finite numbers.
std::vector<double> parse_number_list(std::string_view text);

/// `spherical:<v>`, `diag:<v1,...,vE>` or `file:<path>` (JSON nested array).
/// Throws InvalidArgument for malformed or non-PSD specs.
Matrix parse_covariance_spec(std::string_view spec, Eigen::Index dim);

/// {dim, mu, sigma, sigma_c}
json world_to_json(const GaussianWorld& world);
GaussianWorld world_from_json(const json& j);
GaussianWorld read_world_config(const std::filesystem::path& path);

/// {method, rho, d, dim_in, eigenvalues, projection, source_dataset_digest, ...}
json transform_to_json(const LinearTransform& t, const std::string& source_digest, const json& extra = json::object());
/// Parses and validates (orthonormality included).
LinearTransform transform_from_json(const json& j);
LinearTransform read_transform(const std::filesystem::path& path);

json eval_report_to_json(const EvalReport& report, const json& source_meta = json::object());
/// Rows `k,accuracy,ci95,episodes`.
std::string eval_report_csv(const EvalReport& report);
/// One wide row per model: accuracy per tested shot, then the average and its CI.
std::string eval_report_table_csv(const EvalReport& report, const std::string& model);

struct BoundRow {
  BoundReport bound;
  std::optional<AccuracyEstimate> mc;
};

/// Rows `k,bound_raw,bound_clamped,mc_accuracy,mc_ci95`; Monte Carlo columns
/// are empty when not computed.
std::string bound_sweep_csv(const std::vector<BoundRow>& rows);
json bound_sweep_to_json(const std::vector<BoundRow>& rows, const TheoryInputs& inputs);

/// Sidecar metadata for a run. The timestamp lives only here so primary
/// outputs stay byte-identical across reruns.
json run_manifest(std::string_view command, const json& params, std::uint64_t seed, const json& input_digests);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);

}  // namespace protoest

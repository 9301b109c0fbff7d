#include "protoest/io.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace protoest {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw Error(ErrorKind::ParseError, "matrix must be a nonempty nested array");
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  if (cols == 0) throw Error(ErrorKind::ParseError, "matrix rows must be nonempty arrays");
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw Error(ErrorKind::RaggedRows, "matrix rows differ in length");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[i][c].is_number()) throw Error(ErrorKind::ParseError, "matrix entries must be numbers");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j[i][c].get<double>();
    }
  }
  if (!all_finite(m)) throw Error(ErrorKind::NonFiniteValue, "matrix entries must be finite");
  return m;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorKind::ParseError, "vector must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorKind::ParseError, "vector entries must be numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  if (!all_finite(v)) throw Error(ErrorKind::NonFiniteValue, "vector entries must be finite");
  return v;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream out;
  out << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

std::vector<double> parse_number_list(std::string_view text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string_view field = text.substr(start, comma == std::string_view::npos ? text.npos : comma - start);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
      throw Error(ErrorKind::InvalidArgument, "cannot parse '" + std::string(field) + "' as a finite number");
    }
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

Matrix parse_covariance_spec(std::string_view spec, Eigen::Index dim) {
  const std::size_t colon = spec.find(':');
  if (colon == std::string_view::npos) {
    throw Error(ErrorKind::InvalidArgument, "covariance spec needs a kind prefix: '" + std::string(spec) + "'");
  }
  const std::string_view kind = spec.substr(0, colon);
  const std::string_view body = spec.substr(colon + 1);
  Matrix m;
  if (kind == "spherical") {
    const auto values = parse_number_list(body);
    if (values.size() != 1) throw Error(ErrorKind::InvalidArgument, "spherical spec takes one value");
    if (values[0] < 0.0) throw Error(ErrorKind::InvalidArgument, "spherical variance must be nonnegative");
    m = values[0] * Matrix::Identity(dim, dim);
  } else if (kind == "diag") {
    const auto values = parse_number_list(body);
    if (static_cast<Eigen::Index>(values.size()) != dim) {
      throw Error(ErrorKind::InvalidArgument, "diag spec needs " + std::to_string(dim) + " values");
    }
    for (double v : values) {
      if (v < 0.0) throw Error(ErrorKind::InvalidArgument, "diagonal variances must be nonnegative");
    }
    m = Eigen::Map<const Vector>(values.data(), dim).asDiagonal();
  } else if (kind == "file") {
    try {
      m = matrix_from_json(read_json(std::string(body)));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::InvalidArgument, std::string("covariance file: ") + e.what());
    } catch (const Error& e) {
      throw Error(ErrorKind::InvalidArgument, std::string("covariance file: ") + e.what());
    }
    if (m.rows() != dim || m.cols() != dim) {
      throw Error(ErrorKind::InvalidArgument, "covariance file must hold a " + std::to_string(dim) + "x" +
                                                  std::to_string(dim) + " matrix");
    }
    try {
      if (!is_psd(m)) throw Error(ErrorKind::InvalidArgument, "covariance file is not positive semidefinite");
    } catch (const Error& e) {
      throw Error(ErrorKind::InvalidArgument, e.what());
    }
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown covariance spec kind '" + std::string(kind) + "'");
  }
  return m;
}

json world_to_json(const GaussianWorld& world) {
  return json{{"dim", world.dim()},
              {"mu", vector_to_json(world.mean_prior_center())},
              {"sigma", matrix_to_json(world.mean_prior_cov())},
              {"sigma_c", matrix_to_json(world.class_cov())}};
}

GaussianWorld world_from_json(const json& j) {
  try {
    const auto dim = j.at("dim").get<Eigen::Index>();
    Vector mu = vector_from_json(j.at("mu"));
    Matrix sigma = matrix_from_json(j.at("sigma"));
    Matrix sigma_c = matrix_from_json(j.at("sigma_c"));
    if (mu.size() != dim) throw Error(ErrorKind::DimensionMismatch, "mu length does not match dim");
    return GaussianWorld(std::move(mu), std::move(sigma), std::move(sigma_c));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("world config: ") + e.what());
  }
}

GaussianWorld read_world_config(const std::filesystem::path& path) { return world_from_json(read_json(path)); }

json transform_to_json(const LinearTransform& t, const std::string& source_digest, const json& extra) {
  json j{{"method", std::string(to_string(t.method))},
         {"rho", t.rho},
         {"d", t.out_dim()},
         {"dim_in", t.dim_in()},
         {"eigenvalues", vector_to_json(t.selected_eigenvalues)},
         {"negative_selected_count", t.negative_selected_count},
         {"explained_variance", t.explained_variance},
         {"projection", matrix_to_json(t.projection)},
         {"source_dataset_digest", source_digest}};
  for (const auto& [key, value] : extra.items()) j[key] = value;
  return j;
}

LinearTransform transform_from_json(const json& j) {
  try {
    LinearTransform t;
    t.method = parse_transform_method(j.at("method").get<std::string>());
    t.rho = j.at("rho").get<double>();
    t.projection = matrix_from_json(j.at("projection"));
    t.selected_eigenvalues = vector_from_json(j.at("eigenvalues"));
    t.negative_selected_count = j.value("negative_selected_count", std::size_t{0});
    t.explained_variance = j.value("explained_variance", 0.0);
    if (j.at("d").get<Eigen::Index>() != t.out_dim() || j.at("dim_in").get<Eigen::Index>() != t.dim_in()) {
      throw Error(ErrorKind::DimensionMismatch, "declared d/dim_in disagree with the projection shape");
    }
    t.validate();
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("transform file: ") + e.what());
  }
}

LinearTransform read_transform(const std::filesystem::path& path) { return transform_from_json(read_json(path)); }

json eval_report_to_json(const EvalReport& report, const json& source_meta) {
  const auto& c = report.config;
  json config{{"ways", c.ways},           {"shots", c.shots},   {"queries", c.queries},
              {"query_mode", std::string(to_string(c.query_mode))},
              {"episodes", c.episodes},   {"seed", c.seed}};
  for (const auto& [key, value] : source_meta.items()) config[key] = value;
  json per_k = json::array();
  for (const auto& r : report.per_shot) {
    per_k.push_back({{"k", r.shots}, {"accuracy", r.accuracy}, {"ci95", r.ci95}, {"episodes", r.episodes}});
  }
  return json{{"config", config},
              {"per_k", per_k},
              {"average", {{"accuracy", report.average_accuracy}, {"ci95", report.average_ci95}}}};
}

std::string eval_report_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "k,accuracy,ci95,episodes\n";
  for (const auto& r : report.per_shot) {
    out << r.shots << ',' << format_double(r.accuracy) << ',' << format_double(r.ci95) << ',' << r.episodes << '\n';
  }
  return out.str();
}

std::string eval_report_table_csv(const EvalReport& report, const std::string& model) {
  std::ostringstream out;
  out << "model";
  for (const auto& r : report.per_shot) out << ',' << r.shots;
  out << ",average,average_ci95\n" << model;
  for (const auto& r : report.per_shot) out << ',' << format_double(r.accuracy);
  out << ',' << format_double(report.average_accuracy) << ',' << format_double(report.average_ci95) << '\n';
  return out.str();
}

std::string bound_sweep_csv(const std::vector<BoundRow>& rows) {
  std::ostringstream out;
  out << "k,bound_raw,bound_clamped,mc_accuracy,mc_ci95\n";
  for (const auto& r : rows) {
    out << r.bound.k << ',' << format_double(r.bound.raw) << ',' << format_double(r.bound.clamped) << ',';
    if (r.mc) out << format_double(r.mc->accuracy) << ',' << format_double(r.mc->ci95);
    else out << ',';
    out << '\n';
  }
  return out.str();
}

json bound_sweep_to_json(const std::vector<BoundRow>& rows, const TheoryInputs& inputs) {
  json out = json::array();
  for (const auto& r : rows) {
    json row{{"k", r.bound.k},
             {"ways", r.bound.ways},
             {"bound_raw", r.bound.raw},
             {"bound_clamped", r.bound.clamped},
             {"pairwise", r.bound.pairwise},
             {"components",
              {{"numerator", r.bound.components.numerator},
               {"denom_term1", r.bound.components.denom_term1},
               {"denom_term2", r.bound.components.denom_term2},
               {"denom_term3", r.bound.components.denom_term3}}}};
    if (r.mc) {
      row["mc_accuracy"] = r.mc->accuracy;
      row["mc_ci95"] = r.mc->ci95;
    } else {
      row["mc_accuracy"] = nullptr;
      row["mc_ci95"] = nullptr;
    }
    out.push_back(std::move(row));
  }
  return json{{"moments",
               {{"tr_sigma", inputs.tr_sigma},
                {"tr_sigma_c_sq", inputs.tr_sigma_c_sq},
                {"tr_sigma_sigma_c", inputs.tr_sigma_sigma_c},
                {"fourth_moment", inputs.fourth_moment}}},
              {"rows", out}};
}

json run_manifest(std::string_view command, const json& params, std::uint64_t seed, const json& input_digests) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  std::ostringstream stamp;
  stamp << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ");
  return json{{"command", command},
              {"parameters", params},
              {"seed", seed},
              {"tool_version", kToolVersion},
              {"input_digests", input_digests},
              {"timestamp", stamp.str()}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path.string());
  out << text;
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace protoest

#include "protoest/datastore.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

namespace protoest {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void parse_fail(ErrorKind kind, std::size_t row, std::size_t column, const std::string& what) {
  throw Error(kind, "row " + std::to_string(row) + ", column " + std::to_string(column) + ": " + what);
}

}  // namespace

std::vector<std::string> EmbeddingDataset::distinct_labels() const {
  std::vector<std::string> out(labels);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::vector<Eigen::Index>> EmbeddingDataset::rows_by_label() const {
  std::map<std::string, std::vector<Eigen::Index>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(static_cast<Eigen::Index>(i));
  std::vector<std::vector<Eigen::Index>> out;
  out.reserve(groups.size());
  for (auto& [label, rows] : groups) out.push_back(std::move(rows));
  return out;
}

EmbeddingDataset parse_embeddings(std::istream& in) {
  std::vector<std::string> labels;
  std::vector<double> values;
  std::size_t dim = 0;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const std::string_view text = trim(line);
    if (text.empty()) continue;

    std::size_t column = 0;
    std::size_t start = 0;
    std::size_t fields = 0;
    std::string label;
    while (start <= text.size()) {
      const std::size_t comma = text.find(',', start);
      const std::string_view field = trim(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start));
      ++column;
      if (column == 1) {
        if (field.empty()) parse_fail(ErrorKind::ParseError, row, column, "empty label");
        label = std::string(field);
      } else {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
          parse_fail(ErrorKind::ParseError, row, column, "cannot parse '" + std::string(field) + "' as a number");
        }
        if (!std::isfinite(v)) parse_fail(ErrorKind::NonFiniteValue, row, column, "non-finite value");
        values.push_back(v);
        ++fields;
      }
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields == 0) parse_fail(ErrorKind::ParseError, row, column, "record has no vector components");
    if (labels.empty()) {
      dim = fields;
    } else if (fields != dim) {
      parse_fail(ErrorKind::RaggedRows, row, column,
                 "record has " + std::to_string(fields) + " components, expected " + std::to_string(dim));
    }
    labels.push_back(std::move(label));
  }
  if (labels.empty()) throw Error(ErrorKind::ParseError, "row 0, column 0: no records");

  EmbeddingDataset ds;
  ds.labels = std::move(labels);
  ds.vectors = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(ds.labels.size()), static_cast<Eigen::Index>(dim));
  return ds;
}

EmbeddingDataset load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path.string());
  return parse_embeddings(in);
}

ClassStats class_stats(const EmbeddingDataset& dataset) {
  if (dataset.size() == 0) throw Error(ErrorKind::EmptyInput, "dataset has no records");
  ClassStats stats;
  const auto labels = dataset.distinct_labels();
  const auto groups = dataset.rows_by_label();
  for (std::size_t c = 0; c < labels.size(); ++c) {
    const Matrix members = dataset.vectors(groups[c], Eigen::all);
    ClassMoments m;
    m.label = labels[c];
    m.count = groups[c].size();
    m.mean = members.colwise().mean().transpose();
    m.cov = covariance(members);
    stats.classes.push_back(std::move(m));
  }
  stats.sample_count = dataset.size();
  stats.pooled_mean = dataset.vectors.colwise().mean().transpose();
  stats.pooled_cov = covariance(dataset.vectors);
  return stats;
}

std::string_view to_string(Weighting w) { return w == Weighting::EqualClass ? "equal-class" : "class-size"; }

Weighting parse_weighting(std::string_view text) {
  if (text == "equal-class") return Weighting::EqualClass;
  if (text == "class-size") return Weighting::ClassSize;
  throw Error(ErrorKind::InvalidArgument, "unknown weighting '" + std::string(text) + "'");
}

MomentSummary moment_summary(const ClassStats& stats, Weighting weighting) {
  const std::size_t n = stats.classes.size();
  if (n < 2) throw Error(ErrorKind::SingleClass, "moment summary needs at least two classes");
  const Eigen::Index dim = stats.pooled_mean.size();
  const double total = static_cast<double>(stats.sample_count);

  MomentSummary s;
  s.grand_mean = stats.pooled_mean;
  s.between_cov = Matrix::Zero(dim, dim);
  s.within_cov = Matrix::Zero(dim, dim);
  s.total_cov = stats.pooled_cov;
  s.class_count = n;
  s.sample_count = stats.sample_count;
  s.weighting = weighting;

  for (const auto& c : stats.classes) {
    const double w = weighting == Weighting::EqualClass ? 1.0 / static_cast<double>(n)
                                                        : static_cast<double>(c.count) / total;
    const Vector gap = c.mean - s.grand_mean;
    s.between_cov.noalias() += w * gap * gap.transpose();
    s.within_cov.noalias() += w * c.cov;
  }
  return s;
}

double variance_ratio(const MomentSummary& summary, bool allow_infinite) {
  const double between = summary.between_cov.trace();
  const double within = summary.within_cov.trace();
  if (!(within > 1e-12 * between) || within <= 0.0) {
    if (allow_infinite) return std::numeric_limits<double>::infinity();
    throw Error(ErrorKind::DegenerateIntraClassVariance, "within-class variance is zero");
  }
  return between / within;
}

std::size_t intrinsic_dimension_from_spectrum(const Vector& descending_eigenvalues, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "threshold must lie in (0, 1]");
  }
  const Vector clamped = descending_eigenvalues.cwiseMax(0.0);
  const double total = clamped.sum();
  if (!(total > 0.0)) throw Error(ErrorKind::ZeroTotalVariance, "covariance has zero total variance");
  // Relative slack absorbs rounding noise so threshold 1.0 returns the numerical rank.
  const double target = threshold * total * (1.0 - 1e-12);
  double running = 0.0;
  for (Eigen::Index d = 0; d < clamped.size(); ++d) {
    running += clamped(d);
    if (running >= target) return static_cast<std::size_t>(d + 1);
  }
  return static_cast<std::size_t>(clamped.size());
}

std::size_t intrinsic_dimension(const Matrix& cov, double threshold) {
  return intrinsic_dimension_from_spectrum(sym_eigendecompose(cov).values, threshold);
}

}  // namespace protoest

#pragma once

// Labeled embedding datasets, per-class moments and the variance diagnostics
// built on them.

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "protoest/numerics.hpp"

namespace protoest {

/// Labeled vectors in R^E. Row i of `vectors` carries `labels[i]`.
struct EmbeddingDataset {
  std::vector<std::string> labels;
  Matrix vectors;

  Eigen::Index dim() const { return vectors.cols(); }
  std::size_t size() const { return labels.size(); }
  /// Distinct labels in sorted order.
  std::vector<std::string> distinct_labels() const;
  /// Row indices of each distinct label, in distinct_labels() order.
  std::vector<std::vector<Eigen::Index>> rows_by_label() const;
};

/// Parses `label,v0,...,v{E-1}` records (no header). Blank lines are skipped.
EmbeddingDataset parse_embeddings(std::istream& in);
EmbeddingDataset load_embeddings(const std::filesystem::path& path);

struct ClassMoments {
  std::string label;
  std::size_t count = 0;
  Vector mean;
  Matrix cov;  // biased, 1 / count
};

struct ClassStats {
  std::vector<ClassMoments> classes;  // label-sorted
  std::size_t sample_count = 0;
  /// Mean and biased covariance of all samples pooled, computed from the data directly.
  Vector pooled_mean;
  Matrix pooled_cov;
};

ClassStats class_stats(const EmbeddingDataset& dataset);

enum class Weighting { EqualClass, ClassSize };

std::string_view to_string(Weighting w);
Weighting parse_weighting(std::string_view text);

struct MomentSummary {
  Vector grand_mean;
  Matrix between_cov;  // Sigma_mu
  Matrix within_cov;   // mean of per-class covariances
  Matrix total_cov;
  std::size_t class_count = 0;
  std::size_t sample_count = 0;
  Weighting weighting = Weighting::EqualClass;
};

/// EqualClass follows the EST recipe literally: grand mean over all samples,
/// 1/N averages over classes. ClassSize weights class n by L_n / M, under which
/// Tr(total) = Tr(within) + Tr(between) holds exactly.
MomentSummary moment_summary(const ClassStats& stats, Weighting weighting = Weighting::EqualClass);

/// Tr(between) / Tr(within). With `allow_infinite`, degenerate within-class
/// variance yields +infinity instead of throwing.
double variance_ratio(const MomentSummary& summary, bool allow_infinite = false);

/// Smallest d whose leading eigenvalues explain at least `threshold` of the
/// total variance. Negative eigenvalues are clamped to zero.
std::size_t intrinsic_dimension(const Matrix& cov, double threshold = 0.9);
std::size_t intrinsic_dimension_from_spectrum(const Vector& descending_eigenvalues, double threshold = 0.9);

}  // namespace protoest

#pragma once

// Nearest-prototype classification over embeddings and the episodic
// evaluation harness.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "protoest/datastore.hpp"
#include "protoest/numerics.hpp"
#include "protoest/rng.hpp"
#include "protoest/transforms.hpp"
#include "protoest/world.hpp"

namespace protoest {

/// One N-way k-shot task. supports[i] holds class i's k support vectors as rows;
/// query row q has label query_labels[q] in [0, N).
struct Episode {
  std::vector<Matrix> supports;
  Matrix queries;
  std::vector<std::size_t> query_labels;

  std::size_t ways() const { return supports.size(); }
  std::size_t shots() const { return supports.empty() ? 0 : static_cast<std::size_t>(supports.front().rows()); }
  void validate() const;
};

/// Whether the query count is per class or shared by the whole episode.
enum class QueryMode { PerClass, PerEpisode };

std::string_view to_string(QueryMode m);
QueryMode parse_query_mode(std::string_view text);

/// Query count for class `index` of an N-way episode.
std::size_t queries_for_class(QueryMode mode, std::size_t queries, std::size_t ways, std::size_t index);

/// Fresh i.i.d. classes from the world; stream layout is key.child(0) for class
/// means and key.child(1) for points.
Episode sample_episode(const GaussianWorld& world, std::size_t ways, std::size_t shots, std::size_t queries,
                       const StreamKey& key, QueryMode mode = QueryMode::PerClass);

/// Classes without replacement, then samples without replacement within each
/// class. Every class must hold at least shots + queries-per-class samples.
Episode sample_episode(const EmbeddingDataset& dataset, std::size_t ways, std::size_t shots, std::size_t queries,
                       const StreamKey& key, QueryMode mode = QueryMode::PerClass);

/// Mean of the support rows.
template <typename Derived>
VectorX<typename Derived::Scalar> prototype(const Eigen::MatrixBase<Derived>& supports) {
  return supports.colwise().mean().transpose();
}

/// Prototypes as the rows of an N x E matrix.
Matrix prototypes(const Episode& episode);

template <typename Scalar>
struct Prediction {
  VectorX<Scalar> probabilities;
  Eigen::Index label = 0;
};

/// Softmax over negative squared distances to each prototype row, evaluated
/// with max-subtraction. Ties resolve to the lowest index.
template <typename DerivedQ, typename DerivedP>
Prediction<typename DerivedQ::Scalar> predict(const Eigen::MatrixBase<DerivedQ>& query,
                                              const Eigen::MatrixBase<DerivedP>& prototype_rows) {
  using Scalar = typename DerivedQ::Scalar;
  if (query.size() != prototype_rows.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "query has dimension " + std::to_string(query.size()) +
                                                  ", prototypes have " + std::to_string(prototype_rows.cols()));
  }
  if (prototype_rows.rows() == 0) throw Error(ErrorKind::EmptyInput, "no prototypes");
  const VectorX<Scalar> logits =
      -(prototype_rows.rowwise() - query.transpose()).rowwise().squaredNorm();

  Prediction<Scalar> out;
  logits.maxCoeff(&out.label);  // first maximum wins
  const VectorX<Scalar> shifted = (logits.array() - logits(out.label)).exp().matrix();
  out.probabilities = shifted / shifted.sum();
  return out;
}

enum class AlphaForm { Distance, Linear };

/// ||q - b||^2 - ||q - a||^2, positive when q is closer to prototype a. The
/// linear form expands it as 2 (a - b)^T q + (b^T b - a^T a).
template <typename DerivedQ, typename DerivedA, typename DerivedB>
typename DerivedQ::Scalar alpha_pair(const Eigen::MatrixBase<DerivedQ>& query, const Eigen::MatrixBase<DerivedA>& proto_a,
                                     const Eigen::MatrixBase<DerivedB>& proto_b, AlphaForm form = AlphaForm::Distance) {
  if (query.size() != proto_a.size() || query.size() != proto_b.size()) {
    throw Error(ErrorKind::DimensionMismatch, "alpha_pair arguments differ in dimension");
  }
  if (form == AlphaForm::Distance) return (query - proto_b).squaredNorm() - (query - proto_a).squaredNorm();
  return 2 * (proto_a - proto_b).dot(query) + (proto_b.squaredNorm() - proto_a.squaredNorm());
}

/// Fraction of queries whose argmax matches their label.
double episode_accuracy(const Episode& episode, const LinearTransform* transform = nullptr);

inline constexpr std::size_t kDefaultEpisodes = 600;
inline constexpr std::size_t kDefaultQueries = 15;
inline constexpr std::size_t kDefaultWays = 5;

struct EvalConfig {
  std::size_t ways = kDefaultWays;
  std::vector<std::size_t> shots{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::size_t queries = kDefaultQueries;
  QueryMode query_mode = QueryMode::PerClass;
  std::size_t episodes = kDefaultEpisodes;
  std::uint64_t seed = 0;
  /// Wall-clock only; results never depend on it.
  std::size_t workers = 1;

  void validate() const;
};

struct ShotResult {
  std::size_t shots = 0;
  double accuracy = 0.0;
  double ci95 = 0.0;
  std::size_t episodes = 0;
  std::vector<double> episode_accuracies;
};

struct EvalReport {
  EvalConfig config;
  std::vector<ShotResult> per_shot;
  /// Mean of the per-shot accuracies and its CI over all episodes pooled.
  double average_accuracy = 0.0;
  double average_ci95 = 0.0;
};

/// Mean and 1.96 * std / sqrt(n) of per-episode accuracies (population std).
std::pair<double, double> mean_and_ci95(const std::vector<double>& values);

/// Episode e of shot value k uses stream StreamKey(seed).child(k).child(e). If a
/// transform is given it maps every support and query vector first.
EvalReport evaluate(const EvalConfig& config, const GaussianWorld& world, const LinearTransform* transform = nullptr);
EvalReport evaluate(const EvalConfig& config, const EmbeddingDataset& dataset,
                    const LinearTransform* transform = nullptr);

}  // namespace protoest

#include "protoest/protonet.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

namespace protoest {

void Episode::validate() const {
  if (supports.empty()) throw Error(ErrorKind::InvalidArgument, "episode has no classes");
  const Eigen::Index k = supports.front().rows();
  const Eigen::Index dim = supports.front().cols();
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "episode has no supports");
  for (const auto& s : supports) {
    if (s.rows() != k || s.cols() != dim) throw Error(ErrorKind::DimensionMismatch, "ragged support sets");
    if (!all_finite(s)) throw Error(ErrorKind::NonFinite, "support vector is not finite");
  }
  if (queries.rows() != static_cast<Eigen::Index>(query_labels.size())) {
    throw Error(ErrorKind::DimensionMismatch, "one label per query required");
  }
  if (queries.rows() > 0 && queries.cols() != dim) throw Error(ErrorKind::DimensionMismatch, "query dimension");
  if (!all_finite(queries)) throw Error(ErrorKind::NonFinite, "query vector is not finite");
  for (std::size_t label : query_labels) {
    if (label >= supports.size()) throw Error(ErrorKind::InvalidArgument, "query label out of range");
  }
}

std::string_view to_string(QueryMode m) { return m == QueryMode::PerClass ? "per-class" : "per-episode"; }

QueryMode parse_query_mode(std::string_view text) {
  if (text == "per-class") return QueryMode::PerClass;
  if (text == "per-episode") return QueryMode::PerEpisode;
  throw Error(ErrorKind::InvalidArgument, "unknown query mode '" + std::string(text) + "'");
}

std::size_t queries_for_class(QueryMode mode, std::size_t queries, std::size_t ways, std::size_t index) {
  if (mode == QueryMode::PerClass) return queries;
  return queries / ways + (index < queries % ways ? 1 : 0);
}

namespace {

void check_shape(std::size_t ways, std::size_t shots, std::size_t queries) {
  if (ways < 1 || shots < 1 || queries < 1) {
    throw Error(ErrorKind::InvalidArgument, "ways, shots and queries must all be at least 1");
  }
}

// Assembles an episode from per-class sample lists: the first `shots` rows of
// each list become supports and the rest queries.
Episode assemble(const std::vector<std::vector<Vector>>& per_class, std::size_t shots) {
  Episode ep;
  const Eigen::Index dim = per_class.front().front().size();
  std::size_t total_queries = 0;
  for (const auto& samples : per_class) total_queries += samples.size() - shots;
  ep.queries.resize(static_cast<Eigen::Index>(total_queries), dim);
  Eigen::Index q = 0;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    Matrix s(static_cast<Eigen::Index>(shots), dim);
    for (std::size_t j = 0; j < per_class[c].size(); ++j) {
      if (j < shots) {
        s.row(static_cast<Eigen::Index>(j)) = per_class[c][j].transpose();
      } else {
        ep.queries.row(q++) = per_class[c][j].transpose();
        ep.query_labels.push_back(c);
      }
    }
    ep.supports.push_back(std::move(s));
  }
  return ep;
}

}  // namespace

Episode sample_episode(const GaussianWorld& world, std::size_t ways, std::size_t shots, std::size_t queries,
                       const StreamKey& key, QueryMode mode) {
  check_shape(ways, shots, queries);
  const auto classes = sample_classes(world, ways, key.child(0));
  std::vector<std::vector<Vector>> per_class;
  per_class.reserve(ways);
  for (std::size_t c = 0; c < ways; ++c) {
    per_class.push_back(sample_points(classes[c], world, shots + queries_for_class(mode, queries, ways, c), key.child(1)));
  }
  return assemble(per_class, shots);
}

namespace {

void require_feasible(const std::vector<std::vector<Eigen::Index>>& groups, std::size_t ways, std::size_t shots,
                      std::size_t queries, QueryMode mode) {
  if (groups.size() < ways) {
    throw Error(ErrorKind::InsufficientClasses, "dataset has " + std::to_string(groups.size()) +
                                                    " classes, episodes need " + std::to_string(ways));
  }
  const std::size_t needed = shots + queries_for_class(mode, queries, ways, 0);
  for (const auto& rows : groups) {
    if (rows.size() < needed) {
      throw Error(ErrorKind::InsufficientSamplesPerClass,
                  "a class has " + std::to_string(rows.size()) + " samples, episodes need " + std::to_string(needed));
    }
  }
}

// First `count` entries of a partial Fisher-Yates shuffle of [0, n).
std::vector<std::size_t> choose(std::size_t n, std::size_t count, Stream& stream) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(stream.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

Episode sample_dataset_episode(const EmbeddingDataset& dataset, const std::vector<std::vector<Eigen::Index>>& groups,
                               std::size_t ways, std::size_t shots, std::size_t queries, const StreamKey& key,
                               QueryMode mode) {
  Stream class_stream = key.child(0).stream();
  const auto picked = choose(groups.size(), ways, class_stream);
  std::vector<std::vector<Vector>> per_class;
  per_class.reserve(ways);
  for (std::size_t c = 0; c < ways; ++c) {
    const auto& rows = groups[picked[c]];
    Stream sample_stream = key.child(1).child(c).stream();
    const auto members = choose(rows.size(), shots + queries_for_class(mode, queries, ways, c), sample_stream);
    std::vector<Vector> samples;
    samples.reserve(members.size());
    for (std::size_t m : members) samples.push_back(dataset.vectors.row(rows[m]).transpose());
    per_class.push_back(std::move(samples));
  }
  return assemble(per_class, shots);
}

}  // namespace

Episode sample_episode(const EmbeddingDataset& dataset, std::size_t ways, std::size_t shots, std::size_t queries,
                       const StreamKey& key, QueryMode mode) {
  check_shape(ways, shots, queries);
  const auto groups = dataset.rows_by_label();
  require_feasible(groups, ways, shots, queries, mode);
  return sample_dataset_episode(dataset, groups, ways, shots, queries, key, mode);
}

Matrix prototypes(const Episode& episode) {
  if (episode.supports.empty()) throw Error(ErrorKind::EmptyInput, "episode has no classes");
  Matrix out(static_cast<Eigen::Index>(episode.ways()), episode.supports.front().cols());
  for (std::size_t c = 0; c < episode.ways(); ++c) {
    out.row(static_cast<Eigen::Index>(c)) = prototype(episode.supports[c]).transpose();
  }
  return out;
}

double episode_accuracy(const Episode& episode, const LinearTransform* transform) {
  if (episode.query_labels.empty()) throw Error(ErrorKind::EmptyInput, "episode has no queries");
  Matrix protos;
  Matrix queries;
  if (transform) {
    Episode mapped;
    for (const auto& s : episode.supports) mapped.supports.push_back(apply_rows(*transform, s));
    protos = prototypes(mapped);
    queries = apply_rows(*transform, episode.queries);
  } else {
    protos = prototypes(episode);
    queries = episode.queries;
  }
  std::size_t correct = 0;
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    const auto pred = predict(queries.row(q).transpose(), protos);
    if (static_cast<std::size_t>(pred.label) == episode.query_labels[static_cast<std::size_t>(q)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(episode.query_labels.size());
}

void EvalConfig::validate() const {
  if (ways < 1 || queries < 1 || episodes < 1 || shots.empty()) {
    throw Error(ErrorKind::InvalidArgument, "ways, queries, episodes and the shot list must be nonempty/positive");
  }
  for (std::size_t k : shots) {
    if (k < 1) throw Error(ErrorKind::InvalidArgument, "shot values must be at least 1");
  }
  if (query_mode == QueryMode::PerEpisode && queries < ways) {
    throw Error(ErrorKind::InvalidArgument, "per-episode query count must cover every class");
  }
}

std::pair<double, double> mean_and_ci95(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  const double std_dev = std::sqrt(sq / n);
  return {mean, 1.96 * std_dev / std::sqrt(n)};
}

namespace {

// Runs fn(e) for e in [0, count) on `workers` threads. Each result lands in its
// own slot, so the output is independent of scheduling.
template <typename Fn>
std::vector<double> run_indexed(std::size_t count, std::size_t workers, Fn fn) {
  std::vector<double> out(count);
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t e = 0; e < count; ++e) out[e] = fn(e);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t e = next.fetch_add(1);
        if (e >= count || failed.load()) return;
        try {
          out[e] = fn(e);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

template <typename SampleFn>
EvalReport evaluate_with(const EvalConfig& config, const LinearTransform* transform, SampleFn sample) {
  config.validate();
  EvalReport report;
  report.config = config;
  std::vector<double> pooled;
  double accuracy_sum = 0.0;
  const StreamKey root(config.seed);
  for (std::size_t k : config.shots) {
    const StreamKey shot_key = root.child(k);
    ShotResult r;
    r.shots = k;
    r.episodes = config.episodes;
    r.episode_accuracies = run_indexed(config.episodes, config.workers, [&](std::size_t e) {
      return episode_accuracy(sample(k, shot_key.child(e)), transform);
    });
    std::tie(r.accuracy, r.ci95) = mean_and_ci95(r.episode_accuracies);
    accuracy_sum += r.accuracy;
    pooled.insert(pooled.end(), r.episode_accuracies.begin(), r.episode_accuracies.end());
    report.per_shot.push_back(std::move(r));
  }
  report.average_accuracy = accuracy_sum / static_cast<double>(config.shots.size());
  report.average_ci95 = mean_and_ci95(pooled).second;
  return report;
}

}  // namespace

EvalReport evaluate(const EvalConfig& config, const GaussianWorld& world, const LinearTransform* transform) {
  if (transform && transform->dim_in() != world.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "transform input dimension does not match the world");
  }
  return evaluate_with(config, transform, [&](std::size_t k, const StreamKey& key) {
    return sample_episode(world, config.ways, k, config.queries, key, config.query_mode);
  });
}

EvalReport evaluate(const EvalConfig& config, const EmbeddingDataset& dataset, const LinearTransform* transform) {
  config.validate();
  if (transform && transform->dim_in() != dataset.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "transform input dimension does not match the dataset");
  }
  const auto groups = dataset.rows_by_label();
  for (std::size_t k : config.shots) require_feasible(groups, config.ways, k, config.queries, config.query_mode);
  return evaluate_with(config, transform, [&](std::size_t k, const StreamKey& key) {
    return sample_dataset_episode(dataset, groups, config.ways, k, config.queries, key, config.query_mode);
  });
}

}  // namespace protoest

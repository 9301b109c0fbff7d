#include "protoest/theory.hpp"

#include <algorithm>
#include <cmath>

namespace protoest {

BoundReport theorem1_bound(const TheoryInputs& inputs, std::size_t k) {
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "k must be at least 1");
  inputs.validate();
  const double shrink = 1.0 + 1.0 / static_cast<double>(k);

  BoundReport r;
  r.k = k;
  r.ways = 2;
  r.components.numerator = 4.0 * inputs.tr_sigma * inputs.tr_sigma;
  r.components.denom_term1 = 8.0 * shrink * shrink * inputs.tr_sigma_c_sq;
  r.components.denom_term2 = 16.0 * shrink * inputs.tr_sigma_sigma_c;
  r.components.denom_term3 = inputs.fourth_moment;
  const double denominator = r.components.denom_term1 + r.components.denom_term2 + r.components.denom_term3;
  if (!(denominator > 0.0)) throw Error(ErrorKind::DegenerateDenominator, "all theory moments are zero");
  r.raw = r.components.numerator / denominator;
  r.clamped = std::clamp(r.raw, 0.0, 1.0);
  r.pairwise = r.raw;
  return r;
}

BoundReport nway_bound(const TheoryInputs& inputs, std::size_t k, std::size_t ways) {
  if (ways < 2) throw Error(ErrorKind::InvalidArgument, "N-way bound needs N >= 2");
  BoundReport r = theorem1_bound(inputs, k);
  const double n = static_cast<double>(ways);
  r.ways = ways;
  r.raw = ways == 2 ? r.pairwise : (n - 1.0) * r.pairwise - (n - 2.0);
  r.clamped = std::clamp(r.raw, 0.0, 1.0);
  return r;
}

double vc_gap(std::size_t vc_dim, std::size_t k, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorKind::InvalidDelta, "delta must lie in (0, 1)");
  if (vc_dim < 1 || k < 1) throw Error(ErrorKind::InvalidArgument, "VC dimension and k must be at least 1");
  const double d = static_cast<double>(vc_dim);
  const double m = static_cast<double>(k);
  const double radicand = (d * (std::log(4.0 * m / d) + 1.0) + std::log(4.0 / delta)) / (2.0 * m);
  if (!(radicand > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "gap expression is nonpositive for these arguments");
  }
  return std::sqrt(radicand);
}

namespace {

struct Accumulator {
  double n = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) {
    n += 1.0;
    const double delta = x - mean;
    mean += delta / n;
    m2 += delta * (x - mean);
  }
  double variance() const { return n > 1.0 ? m2 / (n - 1.0) : 0.0; }
};

// Sample mean, unbiased variance, and their standard errors. The variance SE
// uses the asymptotic form sqrt((m4 - s^4) / n).
struct Moments {
  double mean = 0.0;
  double var = 0.0;
  double se_mean = 0.0;
  double se_var = 0.0;
};

Moments moments_of(const std::vector<double>& xs) {
  Accumulator acc;
  for (double x : xs) acc.push(x);
  Moments m;
  m.mean = acc.mean;
  m.var = acc.variance();
  const double n = acc.n;
  double m4 = 0.0;
  for (double x : xs) {
    const double c = x - acc.mean;
    m4 += c * c * c * c;
  }
  m4 /= n;
  m.se_mean = std::sqrt(m.var / n);
  m.se_var = std::sqrt(std::max(0.0, m4 - m.var * m.var) / n);
  return m;
}

double draw_alpha(const GaussianWorld& world, const Vector& mu_a, const Vector& mu_b, std::size_t k, Stream& stream) {
  const Eigen::Index dim = world.dim();
  Vector proto_a = Vector::Zero(dim);
  Vector proto_b = Vector::Zero(dim);
  for (std::size_t i = 0; i < k; ++i) proto_a += world.draw_point(mu_a, stream);
  for (std::size_t i = 0; i < k; ++i) proto_b += world.draw_point(mu_b, stream);
  proto_a /= static_cast<double>(k);
  proto_b /= static_cast<double>(k);
  const Vector query = world.draw_point(mu_a, stream);
  return alpha_pair(query, proto_a, proto_b);
}

}  // namespace

AlphaMoments mc_alpha_moments(const GaussianWorld& world, std::size_t k,
                              const std::optional<std::pair<Vector, Vector>>& fixed_pair, const StreamKey& key,
                              const AlphaSampling& sampling) {
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "k must be at least 1");
  if (sampling.samples < 1000) throw Error(ErrorKind::InvalidArgument, "Monte Carlo needs at least 1000 samples");
  AlphaMoments out;

  if (fixed_pair) {
    const auto& [mu_a, mu_b] = *fixed_pair;
    if (mu_a.size() != world.dim() || mu_b.size() != world.dim()) {
      throw Error(ErrorKind::DimensionMismatch, "fixed pair does not match the world dimension");
    }
    std::vector<double> alphas(sampling.samples);
    for (std::size_t s = 0; s < sampling.samples; ++s) {
      Stream stream = key.child(s).stream();
      alphas[s] = draw_alpha(world, mu_a, mu_b, k, stream);
    }
    const Moments m = moments_of(alphas);
    out.mean_conditional = out.mean_marginal = m.mean;
    out.var_conditional = out.var_marginal = m.var;
    out.se_mean_conditional = out.se_mean_marginal = m.se_mean;
    out.se_var_conditional = out.se_var_marginal = m.se_var;
    out.mean_gap_sq = lemma1_conditional(mu_a, mu_b);
    out.sample_count = sampling.samples;
    out.pair_count = 1;
    return out;
  }

  const std::size_t per_pair = std::max<std::size_t>(2, sampling.draws_per_pair);
  const std::size_t pairs = std::max<std::size_t>(2, sampling.samples / per_pair);
  std::vector<double> all;
  all.reserve(pairs * per_pair);
  std::vector<double> pair_means(pairs);
  std::vector<double> pair_vars(pairs);
  double gap_sum = 0.0;
  for (std::size_t p = 0; p < pairs; ++p) {
    Stream stream = key.child(p).stream();
    const Vector mu_a = world.draw_class_mean(stream);
    const Vector mu_b = world.draw_class_mean(stream);
    gap_sum += lemma1_conditional(mu_a, mu_b);
    Accumulator acc;
    for (std::size_t i = 0; i < per_pair; ++i) {
      const double a = draw_alpha(world, mu_a, mu_b, k, stream);
      acc.push(a);
      all.push_back(a);
    }
    pair_means[p] = acc.mean;
    pair_vars[p] = acc.variance();
  }

  // Pairs are the independent units, so standard errors come from pair-level spread.
  const Moments by_mean = moments_of(pair_means);
  const Moments by_var = moments_of(pair_vars);
  const Moments pooled = moments_of(all);
  out.mean_conditional = out.mean_marginal = pooled.mean;
  out.se_mean_conditional = out.se_mean_marginal = by_mean.se_mean;
  out.var_conditional = by_var.mean;
  out.se_var_conditional = by_var.se_mean;
  out.var_marginal = pooled.var;
  out.se_var_marginal = pooled.se_var * std::sqrt(static_cast<double>(per_pair));
  out.mean_gap_sq = gap_sum / static_cast<double>(pairs);
  out.sample_count = all.size();
  out.pair_count = pairs;
  return out;
}

AccuracyEstimate mc_accuracy(const GaussianWorld& world, std::size_t k, std::size_t ways, std::size_t episodes,
                             std::size_t queries, std::uint64_t seed, std::size_t workers) {
  if (episodes < 100) throw Error(ErrorKind::InvalidArgument, "accuracy estimate needs at least 100 episodes");
  EvalConfig config;
  config.ways = ways;
  config.shots = {k};
  config.queries = queries;
  config.episodes = episodes;
  config.seed = seed;
  config.workers = workers;
  const EvalReport report = evaluate(config, world);
  return {report.per_shot.front().accuracy, report.per_shot.front().ci95};
}

TheoryInputs empirical_moments(const MomentSummary& summary, const ClassStats& stats) {
  if (stats.classes.size() < 2) throw Error(ErrorKind::SingleClass, "empirical moments need two classes");
  TheoryInputs in;
  in.tr_sigma = summary.between_cov.trace();
  in.tr_sigma_c_sq = trace_of_product(summary.within_cov, summary.within_cov);
  in.tr_sigma_sigma_c = std::max(0.0, trace_of_product(summary.between_cov, summary.within_cov));
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t a = 0; a < stats.classes.size(); ++a) {
    for (std::size_t b = a + 1; b < stats.classes.size(); ++b) {
      const double gap = (stats.classes[a].mean - stats.classes[b].mean).squaredNorm();
      sum += gap * gap;
      ++count;
    }
  }
  in.fourth_moment = sum / static_cast<double>(count);
  return in;
}

}  // namespace protoest

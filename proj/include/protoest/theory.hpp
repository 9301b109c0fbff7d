#pragma once

// Closed-form accuracy theory for 2-way and N-way prototype classification and
// the Monte Carlo estimators that check it.

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>

#include "protoest/numerics.hpp"
#include "protoest/protonet.hpp"
#include "protoest/rng.hpp"
#include "protoest/world.hpp"

namespace protoest {

/// E[alpha | a, b] = ||mu_a - mu_b||^2.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar lemma1_conditional(const Eigen::MatrixBase<DerivedA>& mu_a,
                                             const Eigen::MatrixBase<DerivedB>& mu_b) {
  if (mu_a.size() != mu_b.size()) throw Error(ErrorKind::DimensionMismatch, "class means differ in dimension");
  return (mu_a - mu_b).squaredNorm();
}

/// E[alpha] over class pairs = 2 Tr(Sigma).
inline double lemma1_marginal(double tr_sigma) {
  if (!(tr_sigma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "Tr(Sigma) must be nonnegative");
  return 2.0 * tr_sigma;
}

/// Upper bound on E_{a,b}[Var(alpha | a, b)]:
/// 8 (1 + 1/k) Tr(Sigma_c ((1 + 1/k) Sigma_c + 2 Sigma)).
template <typename DerivedC, typename DerivedS>
typename DerivedC::Scalar lemma2_bound(std::size_t k, const Eigen::MatrixBase<DerivedC>& sigma_c,
                                       const Eigen::MatrixBase<DerivedS>& sigma) {
  using Scalar = typename DerivedC::Scalar;
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "k must be at least 1");
  require_square(sigma_c, "sigma_c");
  if (sigma.rows() != sigma_c.rows() || sigma.cols() != sigma_c.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "sigma and sigma_c differ in shape");
  }
  const Scalar shrink = Scalar(1) + Scalar(1) / Scalar(k);
  const MatrixX<Scalar> inner = shrink * sigma_c + Scalar(2) * sigma;
  return Scalar(8) * shrink * trace_of_product(sigma_c, inner);
}

struct BoundComponents {
  double numerator = 0.0;     // 4 Tr(Sigma)^2
  double denom_term1 = 0.0;   // 8 (1 + 1/k)^2 Tr(Sigma_c^2)
  double denom_term2 = 0.0;   // 16 (1 + 1/k) Tr(Sigma Sigma_c)
  double denom_term3 = 0.0;   // E[||mu_a - mu_b||^4]
};

struct BoundReport {
  std::size_t k = 0;
  std::size_t ways = 2;
  double raw = 0.0;
  double clamped = 0.0;
  /// The 2-way bound the N-way value was assembled from.
  double pairwise = 0.0;
  BoundComponents components;
};

/// Chebyshev-style lower bound on 2-way accuracy, one-sided in alpha.
BoundReport theorem1_bound(const TheoryInputs& inputs, std::size_t k);

/// Frechet extension to N ways: (N - 1) * pairwise - (N - 2). The raw value is
/// often negative; `clamped` restricts it to [0, 1].
BoundReport nway_bound(const TheoryInputs& inputs, std::size_t k, std::size_t ways);

/// Generalization gap sqrt((D (ln(4k/D) + 1) + ln(4/delta)) / (2k)) for a
/// classifier of VC dimension D fitted on k samples.
double vc_gap(std::size_t vc_dim, std::size_t k, double delta);

struct AlphaMoments {
  /// Mean of alpha. With a fixed pair this is E[alpha | a, b].
  double mean_conditional = 0.0;
  /// E_{a,b}[Var(alpha | a, b)]; with random pairs, the average of the
  /// within-pair sample variances.
  double var_conditional = 0.0;
  double mean_marginal = 0.0;
  double var_marginal = 0.0;
  double se_mean_conditional = 0.0;
  double se_var_conditional = 0.0;
  double se_mean_marginal = 0.0;
  double se_var_marginal = 0.0;
  /// Average ||mu_a - mu_b||^2 over the pairs used.
  double mean_gap_sq = 0.0;
  std::size_t sample_count = 0;
  std::size_t pair_count = 0;
};

struct AlphaSampling {
  std::size_t samples = 200000;
  /// Alpha draws per random class pair; at least 2 so within-pair variance is defined.
  std::size_t draws_per_pair = 8;
};

/// Monte Carlo moments of alpha with the query drawn from class a. With a fixed
/// pair every draw reuses it; otherwise pairs are drawn from the world and each
/// is reused for `draws_per_pair` draws. Draw group g uses stream key.child(g).
AlphaMoments mc_alpha_moments(const GaussianWorld& world, std::size_t k,
                              const std::optional<std::pair<Vector, Vector>>& fixed_pair, const StreamKey& key,
                              const AlphaSampling& sampling = {});

struct AccuracyEstimate {
  double accuracy = 0.0;
  double ci95 = 0.0;
};

/// Empirical N-way k-shot accuracy over fresh world episodes.
AccuracyEstimate mc_accuracy(const GaussianWorld& world, std::size_t k, std::size_t ways, std::size_t episodes,
                             std::size_t queries, std::uint64_t seed, std::size_t workers = 1);

/// Theory inputs estimated from per-class statistics: Sigma is the between-class
/// covariance, Sigma_c the mean within-class covariance, and the fourth moment
/// averages ||mu_a - mu_b||^4 over all ordered pairs of distinct classes.
TheoryInputs empirical_moments(const MomentSummary& summary, const ClassStats& stats);

}  // namespace protoest

#pragma once

// Gaussian generative world: class means mu_c ~ N(mu, Sigma), embeddings of a
// class ~ N(mu_c, Sigma_c) with one shared within-class covariance.

#include <cstdint>
#include <vector>

#include "protoest/numerics.hpp"
#include "protoest/rng.hpp"

namespace protoest {

class GaussianWorld {
 public:
  /// Validates shapes and PSD-ness (min eigenvalue >= -1e-10) and precomputes
  /// symmetric square roots of both covariances.
  GaussianWorld(Vector mean_prior_center, Matrix mean_prior_cov, Matrix class_cov);

  Eigen::Index dim() const { return center_.size(); }
  const Vector& mean_prior_center() const { return center_; }
  const Matrix& mean_prior_cov() const { return sigma_; }
  const Matrix& class_cov() const { return sigma_c_; }
  const Matrix& mean_prior_sqrt() const { return sigma_sqrt_; }
  const Matrix& class_cov_sqrt() const { return sigma_c_sqrt_; }

  /// Draw of N(mean_prior_center, mean_prior_cov) from the given stream.
  Vector draw_class_mean(Stream& stream) const;
  /// Draw of N(class_mean, class_cov) from the given stream.
  Vector draw_point(const Vector& class_mean, Stream& stream) const;

 private:
  Vector center_;
  Matrix sigma_;
  Matrix sigma_c_;
  Matrix sigma_sqrt_;
  Matrix sigma_c_sqrt_;
};

struct SampledClass {
  std::uint64_t id = 0;
  Vector mean;
};

/// Moment bundle feeding the accuracy lower bound.
struct TheoryInputs {
  double tr_sigma = 0.0;
  double tr_sigma_c_sq = 0.0;
  double tr_sigma_sigma_c = 0.0;
  /// E[((mu_a - mu_b)^T (mu_a - mu_b))^2] over independent class pairs.
  double fourth_moment = 0.0;

  void validate() const;
};

/// Class i is drawn from stream key.child(i); ids are first_id, first_id + 1, ...
std::vector<SampledClass> sample_classes(const GaussianWorld& world, std::size_t count, const StreamKey& key,
                                         std::uint64_t first_id = 0);

/// Point j of a class is drawn from stream key.child(class.id).child(j).
std::vector<Vector> sample_points(const SampledClass& cls, const GaussianWorld& world, std::size_t count,
                                  const StreamKey& key, std::uint64_t first_index = 0);

/// Closed-form moments. The fourth moment uses the Gaussian quartic identity
/// for gaps d ~ N(0, 2 Sigma): E[(d^T d)^2] = 4 Tr(Sigma)^2 + 8 Tr(Sigma^2).
TheoryInputs world_moments(const GaussianWorld& world);

struct FourthMomentEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t pairs = 0;
};

/// Monte Carlo estimate of the fourth moment from independent class pairs.
FourthMomentEstimate mc_fourth_moment(const GaussianWorld& world, std::size_t pairs, const StreamKey& key);

}  // namespace protoest

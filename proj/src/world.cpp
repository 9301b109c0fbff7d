#include "protoest/world.hpp"

#include <cmath>
#include <string>

namespace protoest {

namespace {

Matrix checked_sqrt(const Matrix& m, const char* name) {
  auto root = psd_sqrt(m);
  if (!root) throw Error(ErrorKind::DegenerateWorld, std::string(name) + " is not positive semidefinite");
  return *std::move(root);
}

}  // namespace

GaussianWorld::GaussianWorld(Vector mean_prior_center, Matrix mean_prior_cov, Matrix class_cov)
    : center_(std::move(mean_prior_center)), sigma_(std::move(mean_prior_cov)), sigma_c_(std::move(class_cov)) {
  const Eigen::Index e = center_.size();
  if (e < 1) throw Error(ErrorKind::InvalidArgument, "world dimension must be at least 1");
  if (sigma_.rows() != e || sigma_.cols() != e || sigma_c_.rows() != e || sigma_c_.cols() != e) {
    throw Error(ErrorKind::DimensionMismatch, "world covariances must be " + std::to_string(e) + "x" +
                                                  std::to_string(e));
  }
  if (!all_finite(center_) || !all_finite(sigma_) || !all_finite(sigma_c_)) {
    throw Error(ErrorKind::NonFinite, "world parameters must be finite");
  }
  sigma_sqrt_ = checked_sqrt(sigma_, "sigma");
  sigma_c_sqrt_ = checked_sqrt(sigma_c_, "sigma_c");
  sigma_ = (sigma_ + sigma_.transpose()) / 2.0;
  sigma_c_ = (sigma_c_ + sigma_c_.transpose()) / 2.0;
}

Vector GaussianWorld::draw_class_mean(Stream& stream) const {
  return center_ + sigma_sqrt_ * stream.normal_vector(dim());
}

Vector GaussianWorld::draw_point(const Vector& class_mean, Stream& stream) const {
  return class_mean + sigma_c_sqrt_ * stream.normal_vector(dim());
}

void TheoryInputs::validate() const {
  for (double v : {tr_sigma, tr_sigma_c_sq, tr_sigma_sigma_c, fourth_moment}) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "theory inputs must be finite");
    // Tr(Sigma Sigma_c) of two PSD matrices may come out at -1e-17 from rounding.
    if (v < -1e-12) throw Error(ErrorKind::InvalidArgument, "theory inputs must be nonnegative");
  }
}

std::vector<SampledClass> sample_classes(const GaussianWorld& world, std::size_t count, const StreamKey& key,
                                         std::uint64_t first_id) {
  if (count < 1) throw Error(ErrorKind::InvalidArgument, "sample_classes needs count >= 1");
  std::vector<SampledClass> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t id = first_id + i;
    Stream stream = key.child(id).stream();
    out.push_back({id, world.draw_class_mean(stream)});
  }
  return out;
}

std::vector<Vector> sample_points(const SampledClass& cls, const GaussianWorld& world, std::size_t count,
                                  const StreamKey& key, std::uint64_t first_index) {
  if (count < 1) throw Error(ErrorKind::InvalidArgument, "sample_points needs count >= 1");
  if (cls.mean.size() != world.dim()) throw Error(ErrorKind::DimensionMismatch, "class mean has wrong dimension");
  const StreamKey class_key = key.child(cls.id);
  std::vector<Vector> out;
  out.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    Stream stream = class_key.child(first_index + j).stream();
    out.push_back(world.draw_point(cls.mean, stream));
  }
  return out;
}

TheoryInputs world_moments(const GaussianWorld& world) {
  const Matrix& sigma = world.mean_prior_cov();
  const Matrix& sigma_c = world.class_cov();
  TheoryInputs in;
  in.tr_sigma = sigma.trace();
  in.tr_sigma_c_sq = trace_of_product(sigma_c, sigma_c);
  in.tr_sigma_sigma_c = std::max(0.0, trace_of_product(sigma, sigma_c));
  in.fourth_moment = 4.0 * in.tr_sigma * in.tr_sigma + 8.0 * trace_of_product(sigma, sigma);
  return in;
}

FourthMomentEstimate mc_fourth_moment(const GaussianWorld& world, std::size_t pairs, const StreamKey& key) {
  if (pairs < 2) throw Error(ErrorKind::InvalidArgument, "need at least two class pairs");
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t p = 0; p < pairs; ++p) {
    Stream stream = key.child(p).stream();
    const Vector a = world.draw_class_mean(stream);
    const Vector b = world.draw_class_mean(stream);
    const double gap = (a - b).squaredNorm();
    const double q = gap * gap;
    sum += q;
    sum_sq += q * q;
  }
  const double n = static_cast<double>(pairs);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n), pairs};
}

}  // namespace protoest

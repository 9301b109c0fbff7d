#pragma once

// Test-only generators and oracles. Nothing here calls into the library's
// estimators, so checks built on these stay independent of the code under test.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace testutil {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix random_matrix(std::mt19937_64& gen, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(gen);
  return m;
}

inline Matrix random_symmetric(std::mt19937_64& gen, Eigen::Index n) {
  const Matrix a = random_matrix(gen, n, n);
  return (a + a.transpose()) / 2.0;
}

inline Matrix random_psd(std::mt19937_64& gen, Eigen::Index n, double scale = 1.0) {
  const Matrix a = random_matrix(gen, n, n);
  return scale * a * a.transpose() / static_cast<double>(n);
}

inline Matrix random_orthogonal(std::mt19937_64& gen, Eigen::Index n) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(gen, n, n));
  return qr.householderQ() * Matrix::Identity(n, n);
}

/// Plain two-pass biased covariance of the rows, written out longhand.
inline Matrix naive_covariance(const Matrix& rows) {
  const Eigen::Index n = rows.rows();
  const Eigen::Index d = rows.cols();
  Vector mean = Vector::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) mean += rows.row(i).transpose();
  mean /= static_cast<double>(n);
  Matrix cov = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector c = rows.row(i).transpose() - mean;
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = 0; b < d; ++b) cov(a, b) += c(a) * c(b);
  }
  return cov / static_cast<double>(n);
}

/// Bootstrap standard error of each covariance entry.
inline Matrix bootstrap_covariance_se(const Matrix& rows, int resamples, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, rows.rows() - 1);
  const Eigen::Index d = rows.cols();
  Matrix sum = Matrix::Zero(d, d);
  Matrix sum_sq = Matrix::Zero(d, d);
  Matrix resample(rows.rows(), d);
  for (int b = 0; b < resamples; ++b) {
    for (Eigen::Index i = 0; i < rows.rows(); ++i) resample.row(i) = rows.row(pick(gen));
    const Matrix c = naive_covariance(resample);
    sum += c;
    sum_sq += c.cwiseProduct(c);
  }
  const double r = static_cast<double>(resamples);
  const Matrix mean = sum / r;
  return ((sum_sq / r - mean.cwiseProduct(mean)) * r / (r - 1.0)).cwiseMax(0.0).cwiseSqrt();
}

/// Largest principal angle (degrees) between the column spans of two
/// orthonormal bases of equal width.
inline double max_principal_angle_deg(const Matrix& a, const Matrix& b) {
  Eigen::JacobiSVD<Matrix> svd(a.transpose() * b);
  const double smallest = std::clamp(svd.singularValues().minCoeff(), -1.0, 1.0);
  return std::acos(smallest) * 180.0 / M_PI;
}

}  // namespace testutil

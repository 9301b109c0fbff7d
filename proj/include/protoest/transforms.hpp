#pragma once

// Post-hoc linear maps on embeddings: the shot-agnostic transformation built
// from Sigma_mu - rho * mean(Sigma_n), and the PCA baseline.

#include <string>
#include <string_view>

#include "protoest/datastore.hpp"
#include "protoest/numerics.hpp"

namespace protoest {

enum class TransformMethod { EST, PCA };

std::string_view to_string(TransformMethod m);
TransformMethod parse_transform_method(std::string_view text);

inline constexpr double kDefaultRho = 0.001;
inline constexpr std::size_t kDefaultOutDim = 60;

/// E x d projection with orthonormal columns. Applying it maps z to
/// projection^T z, the coordinates of z in the selected eigenbasis.
struct LinearTransform {
  Matrix projection;
  TransformMethod method = TransformMethod::EST;
  double rho = 0.0;
  Vector selected_eigenvalues;
  std::size_t negative_selected_count = 0;
  /// Sum of selected eigenvalues over the sum of all eigenvalues (PCA only;
  /// for EST it is computed on the signed spectrum and may leave [0, 1]).
  double explained_variance = 0.0;

  Eigen::Index dim_in() const { return projection.rows(); }
  Eigen::Index out_dim() const { return projection.cols(); }

  /// Checks orthonormal columns (1e-9), d <= E and descending eigenvalues.
  void validate() const;
};

namespace detail {

template <typename Derived>
LinearTransform leading_subspace(const Eigen::MatrixBase<Derived>& target, std::size_t d, TransformMethod method,
                                 double rho) {
  if (static_cast<Eigen::Index>(d) > target.rows()) {
    throw Error(ErrorKind::DimensionTooLarge,
                "requested " + std::to_string(d) + " dimensions from a " + std::to_string(target.rows()) +
                    "-dimensional space");
  }
  if (d < 1) throw Error(ErrorKind::InvalidArgument, "output dimension must be at least 1");
  const auto eig = sym_eigendecompose(target.template cast<double>());
  const auto out = static_cast<Eigen::Index>(d);

  LinearTransform t;
  t.method = method;
  t.rho = rho;
  t.projection = eig.vectors.leftCols(out);
  t.selected_eigenvalues = eig.values.head(out);
  t.negative_selected_count = static_cast<std::size_t>((t.selected_eigenvalues.array() < 0.0).count());
  const double total = eig.values.sum();
  t.explained_variance = total != 0.0 ? t.selected_eigenvalues.sum() / total : 0.0;
  return t;
}

}  // namespace detail

/// Leading eigenvectors (by signed eigenvalue) of between - rho * within.
template <typename DerivedB, typename DerivedW>
LinearTransform fit_est(const Eigen::MatrixBase<DerivedB>& between_cov, const Eigen::MatrixBase<DerivedW>& within_cov,
                        double rho = kDefaultRho, std::size_t d = kDefaultOutDim) {
  if (!(rho >= 0.0)) throw Error(ErrorKind::InvalidArgument, "rho must be nonnegative");
  if (between_cov.rows() != within_cov.rows() || between_cov.cols() != within_cov.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "between and within covariances differ in shape");
  }
  return detail::leading_subspace(between_cov - rho * within_cov, d, TransformMethod::EST, rho);
}

inline LinearTransform fit_est(const MomentSummary& summary, double rho = kDefaultRho,
                               std::size_t d = kDefaultOutDim) {
  if (summary.class_count < 2) throw Error(ErrorKind::SingleClass, "fitting needs at least two classes");
  return fit_est(summary.between_cov, summary.within_cov, rho, d);
}

/// Top-d eigenvectors of a total covariance.
template <typename Derived>
LinearTransform fit_pca(const Eigen::MatrixBase<Derived>& total_cov, std::size_t d) {
  return detail::leading_subspace(total_cov, d, TransformMethod::PCA, 0.0);
}

template <typename Derived>
VectorX<typename Derived::Scalar> apply(const LinearTransform& t, const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  if (z.size() != t.dim_in()) {
    throw Error(ErrorKind::DimensionMismatch, "vector has dimension " + std::to_string(z.size()) +
                                                  ", transform expects " + std::to_string(t.dim_in()));
  }
  return t.projection.template cast<Scalar>().transpose() * z;
}

/// Applies the transform to every row of `rows`.
template <typename Derived>
MatrixX<typename Derived::Scalar> apply_rows(const LinearTransform& t, const Eigen::MatrixBase<Derived>& rows) {
  using Scalar = typename Derived::Scalar;
  if (rows.cols() != t.dim_in()) {
    throw Error(ErrorKind::DimensionMismatch, "rows have dimension " + std::to_string(rows.cols()) +
                                                  ", transform expects " + std::to_string(t.dim_in()));
  }
  return rows * t.projection.template cast<Scalar>();
}

}  // namespace protoest

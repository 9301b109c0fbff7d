#pragma once

// Dense symmetric linear algebra shared by every other component: covariance
// estimation, sorted symmetric eigendecomposition, traces and PSD square roots.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "protoest/errors.hpp"

namespace protoest {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

/// Eigenpairs of a symmetric matrix, eigenvalues sorted by signed value,
/// largest first. Column j of `vectors` pairs with `values(j)`.
template <typename Scalar>
struct SymEigen {
  VectorX<Scalar> values;
  MatrixX<Scalar> vectors;
};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.derived().array().isFinite().all();
}

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorKind::NonSquare, std::string(what) + " is " + std::to_string(a.rows()) + "x" +
                                          std::to_string(a.cols()));
  }
}

template <typename Derived>
typename Derived::Scalar trace(const Eigen::MatrixBase<Derived>& a) {
  require_square(a, "trace argument");
  return a.trace();
}

/// Trace of a product without forming it: Tr(AB) = sum_ij A_ij B_ji.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar trace_of_product(const Eigen::MatrixBase<DerivedA>& a,
                                           const Eigen::MatrixBase<DerivedB>& b) {
  if (a.cols() != b.rows() || a.rows() != b.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "trace_of_product shapes do not conform");
  }
  return a.cwiseProduct(b.transpose()).sum();
}

namespace detail {

// Largest-magnitude entry positive; ties go to the lowest row index.
template <typename Scalar>
void canonicalize_signs(MatrixX<Scalar>& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    Eigen::Index best = 0;
    Scalar best_abs = Scalar(-1);
    for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
      const Scalar v = std::abs(vectors(i, j));
      if (v > best_abs) {
        best_abs = v;
        best = i;
      }
    }
    if (vectors(best, j) < Scalar(0)) vectors.col(j) = -vectors.col(j);
  }
}

}  // namespace detail

/// Eigendecomposition of a symmetric (possibly indefinite) matrix.
///
/// The input may deviate from exact symmetry by at most 1e-8 * max|A|; it is
/// symmetrized as (A + A^T) / 2 before solving. Eigenvalues come back sorted
/// descending by signed value with sign-canonicalized eigenvectors so that
/// outputs are reproducible.
template <typename Derived>
SymEigen<typename Derived::Scalar> sym_eigendecompose(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  require_square(a, "eigendecomposition input");
  if (!all_finite(a)) throw Error(ErrorKind::NonFinite, "eigendecomposition input has non-finite entries");

  const Eigen::Index n = a.rows();
  if (n == 0) return {VectorX<Scalar>(0), MatrixX<Scalar>(0, 0)};

  const Scalar scale = a.cwiseAbs().maxCoeff();
  const Scalar asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > Scalar(1e-8) * scale) {
    throw Error(ErrorKind::NotSymmetric, "max|A - A^T| = " + std::to_string(double(asym)) +
                                             " exceeds tolerance relative to max|A| = " +
                                             std::to_string(double(scale)));
  }

  const MatrixX<Scalar> sym = (a + a.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::NonFinite, "symmetric eigensolver did not converge");
  }

  // Eigen returns ascending order; flip to descending.
  SymEigen<Scalar> out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  detail::canonicalize_signs(out.vectors);
  return out;
}

/// Biased (divide-by-total-weight) covariance about the weighted mean.
/// Points are the rows of `points`.
template <typename Derived>
MatrixX<typename Derived::Scalar> covariance(
    const Eigen::MatrixBase<Derived>& points,
    const std::optional<VectorX<typename Derived::Scalar>>& weights = std::nullopt) {
  using Scalar = typename Derived::Scalar;
  if (points.rows() == 0) throw Error(ErrorKind::EmptyInput, "covariance needs at least one point");
  if (weights && weights->size() != points.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "one weight per point required");
  }

  VectorX<Scalar> w = weights ? *weights : VectorX<Scalar>::Ones(points.rows());
  if ((w.array() < Scalar(0)).any() || !(w.sum() > Scalar(0))) {
    throw Error(ErrorKind::InvalidArgument, "weights must be nonnegative with positive sum");
  }
  w /= w.sum();

  const VectorX<Scalar> mean = points.transpose() * w;
  const MatrixX<Scalar> centered = points.rowwise() - mean.transpose();
  MatrixX<Scalar> cov = centered.transpose() * w.asDiagonal() * centered;
  return (cov + cov.transpose()) / Scalar(2);
}

/// Covariance of a list of equal-length vectors.
template <typename Scalar>
MatrixX<Scalar> covariance(const std::vector<VectorX<Scalar>>& points,
                           const std::optional<VectorX<Scalar>>& weights = std::nullopt) {
  if (points.empty()) throw Error(ErrorKind::EmptyInput, "covariance needs at least one point");
  const Eigen::Index dim = points.front().size();
  MatrixX<Scalar> stacked(static_cast<Eigen::Index>(points.size()), dim);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != dim) {
      throw Error(ErrorKind::DimensionMismatch, "point " + std::to_string(i) + " has dimension " +
                                                    std::to_string(points[i].size()) + ", expected " +
                                                    std::to_string(dim));
    }
    stacked.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  }
  return covariance(stacked, weights);
}

/// Symmetric PSD square root S with S S^T = A. Eigenvalues down to
/// -tolerance * max(1, max|lambda|) are clamped to zero; anything more negative
/// means the matrix is not PSD.
template <typename Derived>
std::optional<MatrixX<typename Derived::Scalar>> psd_sqrt(const Eigen::MatrixBase<Derived>& a,
                                                          typename Derived::Scalar tolerance = 1e-10) {
  using Scalar = typename Derived::Scalar;
  const auto eig = sym_eigendecompose(a);
  if (eig.values.size() == 0) return MatrixX<Scalar>(0, 0);
  const Scalar scale = std::max<Scalar>(Scalar(1), eig.values.cwiseAbs().maxCoeff());
  if (eig.values.minCoeff() < -tolerance * scale) return std::nullopt;
  const VectorX<Scalar> roots = eig.values.cwiseMax(Scalar(0)).cwiseSqrt();
  return eig.vectors * roots.asDiagonal() * eig.vectors.transpose();
}

template <typename Derived>
bool is_psd(const Eigen::MatrixBase<Derived>& a, typename Derived::Scalar tolerance = 1e-10) {
  const auto eig = sym_eigendecompose(a);
  if (eig.values.size() == 0) return true;
  return eig.values.minCoeff() >= -tolerance * std::max<typename Derived::Scalar>(1, eig.values.cwiseAbs().maxCoeff());
}

}  // namespace protoest

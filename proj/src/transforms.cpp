#include "protoest/transforms.hpp"

#include <cmath>

namespace protoest {

std::string_view to_string(TransformMethod m) { return m == TransformMethod::EST ? "est" : "pca"; }

TransformMethod parse_transform_method(std::string_view text) {
  if (text == "est" || text == "EST") return TransformMethod::EST;
  if (text == "pca" || text == "PCA") return TransformMethod::PCA;
  throw Error(ErrorKind::InvalidArgument, "unknown transform method '" + std::string(text) + "'");
}

void LinearTransform::validate() const {
  if (out_dim() > dim_in()) throw Error(ErrorKind::DimensionTooLarge, "transform output exceeds input dimension");
  if (out_dim() < 1) throw Error(ErrorKind::InvalidArgument, "transform has no output dimensions");
  if (!all_finite(projection) || !all_finite(selected_eigenvalues)) {
    throw Error(ErrorKind::NonFinite, "transform has non-finite entries");
  }
  if (selected_eigenvalues.size() != out_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "one eigenvalue per projection column required");
  }
  const Matrix gram = projection.transpose() * projection;
  const double deviation = (gram - Matrix::Identity(out_dim(), out_dim())).cwiseAbs().maxCoeff();
  if (deviation > 1e-9) {
    throw Error(ErrorKind::InvalidArgument,
                "projection columns are not orthonormal (deviation " + std::to_string(deviation) + ")");
  }
  for (Eigen::Index j = 1; j < selected_eigenvalues.size(); ++j) {
    if (selected_eigenvalues(j) > selected_eigenvalues(j - 1)) {
      throw Error(ErrorKind::InvalidArgument, "selected eigenvalues must be sorted descending");
    }
  }
  if (!(rho >= 0.0)) throw Error(ErrorKind::InvalidArgument, "rho must be nonnegative");
}

}  // namespace protoest

#include "bures/metric.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bures {

double bures_sq(const SpdMat3& a, const SpdMat3& b) {
  const Mat3 ra = sqrt_spd(a).matrix();
  const Mat3 rb = sqrt_spd(b).matrix();
  // Tr(sqrt(rb a rb)) is the nuclear norm of rb*ra; the maximizing rotation
  // is the polar factor of that product.
  Eigen::JacobiSVD<Mat3> svd(rb * ra, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 u = svd.matrixU() * svd.matrixV().transpose();
  return std::max(0.0, (ra - rb * u).squaredNorm());
}

W2Parts w2_parts(const Gaussian3& a, const Gaussian3& b) {
  return {(a.mean - b.mean).squaredNorm(), bures_sq(a.cov, b.cov)};
}

double w2_squared(const Gaussian3& a, const Gaussian3& b) {
  return std::max(0.0, w2_parts(a, b).w2_sq());
}

double w2_distance(const Gaussian3& a, const Gaussian3& b) {
  return std::sqrt(w2_squared(a, b));
}

double w2_trace_term_decomposed(const DecomposedCov& a, const DecomposedCov& b) {
  const Mat3 ra = a.rotation_matrix();
  const Mat3 rb = b.rotation_matrix();
  const Vec3 va = a.variances();
  const Vec3 vb = b.variances();
  const Mat3 rel = ra.transpose() * rb;
  const Mat3 e = rel * vb.asDiagonal() * rel.transpose();
  const Vec3 root_va = va.cwiseSqrt();
  const SymMat3 c = symmetrize(root_va.asDiagonal() * e * root_va.asDiagonal());
  const Vec3 l = Eigen::SelfAdjointEigenSolver<Mat3>(c.matrix(), Eigen::EigenvaluesOnly)
                     .eigenvalues()
                     .cwiseMax(0.0);
  const double cross = l.cwiseSqrt().sum();
  return std::max(0.0, va.sum() + vb.sum() - 2.0 * cross);
}

double tangent_norm_squared(const SpdMat3& base, const SymMat3& v) {
  const Mat3 g = solve_sylvester(base, v).matrix();
  const double via_pairing = 0.5 * (g * v.matrix()).trace();
  const double via_metric = (g * base.matrix() * g).trace();
  const double scale = std::max({std::abs(via_pairing), std::abs(via_metric), 1e-300});
  if (std::abs(via_pairing - via_metric) > 1e-10 * scale) {
    throw std::logic_error("tangent norm forms disagree");
  }
  return std::max(0.0, via_metric);
}

double tangent_norm_squared(const TangentCov& v) { return tangent_norm_squared(v.base, v.value); }

}  // namespace bures

#pragma once

#include <Eigen/Geometry>
#include <nlohmann/json_fwd.hpp>

#include "bures/spd_linalg.hpp"

namespace bures {

struct Gaussian3 {
  Vec3 mean = Vec3::Zero();
  SpdMat3 cov;

  friend bool operator==(const Gaussian3& a, const Gaussian3& b) {
    return a.mean == b.mean && a.cov == b.cov;
  }
};

/// Rotation/scale form Sigma = R diag(scale)^2 R^T. Scales are standard
/// deviations, not variances.
class DecomposedCov {
 public:
  DecomposedCov() : rotation_(Eigen::Quaterniond::Identity()), scale_(Vec3::Ones()) {}

  /// Normalizes the quaternion and clamps each scale to at least
  /// sqrt(floor). Throws InvalidInput for non-finite or zero-norm input.
  static DecomposedCov make(const Eigen::Quaterniond& rotation, const Vec3& scale,
                            double floor = kEpsPd);

  const Eigen::Quaterniond& rotation() const { return rotation_; }
  Mat3 rotation_matrix() const { return rotation_.toRotationMatrix(); }
  const Vec3& scale() const { return scale_; }
  Vec3 variances() const { return scale_.cwiseAbs2(); }

 private:
  Eigen::Quaterniond rotation_;
  Vec3 scale_;
};

/// Symmetric tangent vector together with the base covariance it was built at.
struct TangentCov {
  SymMat3 value;
  SpdMat3 base;
};

/// Per-frame velocity of a Gaussian: mean displacement plus covariance tangent.
struct GaussianVelocity {
  Vec3 d_mean = Vec3::Zero();
  TangentCov d_cov;
};

/// R diag(scale)^2 R^T.
SpdMat3 compose_covariance(const DecomposedCov& d, double floor = kEpsPd);

/// Inverse of compose_covariance. The rotation is proper (det +1); the axis
/// order follows ascending variance.
DecomposedCov decompose_covariance(const SpdMat3& s, double floor = kEpsPd);

/// Symmetrizes the covariance and clamps its eigenvalues to `floor`. Accepts
/// any finite 3x3 covariance, including asymmetric or indefinite ones.
Gaussian3 project_to_valid(const Vec3& mean, const Mat3& cov, double floor = kEpsPd);
Gaussian3 project_to_valid(const Gaussian3& g, double floor = kEpsPd);

/// Geometric-mean standard deviation (l1 l2 l3)^(1/6).
double sigma_scale(const SpdMat3& cov);

Gaussian3 make_gaussian(const Vec3& mean, const DecomposedCov& d);

// Scene-file atom: {"mean":[x,y,z], "rot":[w,x,y,z], "scale":[sx,sy,sz]}.
nlohmann::json gaussian_to_json(const Gaussian3& g);
Gaussian3 gaussian_from_json(const nlohmann::json& j);

}  // namespace bures

#include "bures/gaussian.hpp"

#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "bures/errors.hpp"

namespace bures {

DecomposedCov DecomposedCov::make(const Eigen::Quaterniond& rotation, const Vec3& scale,
                                  double floor) {
  if (!rotation.coeffs().allFinite() || !scale.allFinite()) {
    throw InvalidInput("decomposed covariance has non-finite entries");
  }
  const double n = rotation.norm();
  if (!(n > 0.0)) throw InvalidInput("rotation quaternion has zero norm");
  DecomposedCov d;
  d.rotation_ = rotation.normalized();
  d.scale_ = scale.cwiseAbs().cwiseMax(std::sqrt(floor));
  return d;
}

SpdMat3 compose_covariance(const DecomposedCov& d, double floor) {
  const Mat3 r = d.rotation_matrix();
  return SpdMat3::clamped(symmetrize(r * d.variances().asDiagonal() * r.transpose()), floor);
}

DecomposedCov decompose_covariance(const SpdMat3& s, double floor) {
  const EigenSystem3 e = clamp_eigenvalues(eigh3(s.sym()), floor);
  Mat3 r = e.vectors;
  if (r.determinant() < 0.0) r.col(2) = -r.col(2);
  return DecomposedCov::make(Eigen::Quaterniond(r), e.values.cwiseSqrt(), floor);
}

Gaussian3 project_to_valid(const Vec3& mean, const Mat3& cov, double floor) {
  if (!mean.allFinite()) throw InvalidInput("gaussian mean has non-finite entries");
  return {mean, SpdMat3::clamped(symmetrize(cov), floor)};
}

Gaussian3 project_to_valid(const Gaussian3& g, double floor) {
  return project_to_valid(g.mean, g.cov.matrix(), floor);
}

double sigma_scale(const SpdMat3& cov) {
  const Vec3 l = eigh3(cov.sym()).values;
  // Sum of logs avoids under/overflow of the triple product.
  return std::exp((std::log(l[0]) + std::log(l[1]) + std::log(l[2])) / 6.0);
}

Gaussian3 make_gaussian(const Vec3& mean, const DecomposedCov& d) {
  if (!mean.allFinite()) throw InvalidInput("gaussian mean has non-finite entries");
  return {mean, compose_covariance(d)};
}

namespace {

template <int N>
Eigen::Matrix<double, N, 1> read_array(const nlohmann::json& j, const char* field) {
  if (!j.contains(field)) throw InvalidInput(std::string("missing field '") + field + "'");
  const auto& a = j.at(field);
  if (!a.is_array() || a.size() != N) {
    throw InvalidInput(std::string("field '") + field + "' must be an array of " +
                       std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) {
    if (!a[i].is_number()) {
      throw InvalidInput(std::string("field '") + field + "' must contain only numbers");
    }
    v[i] = a[i].get<double>();
  }
  if (!v.allFinite()) throw InvalidInput(std::string("field '") + field + "' is not finite");
  return v;
}

}  // namespace

nlohmann::json gaussian_to_json(const Gaussian3& g) {
  const DecomposedCov d = decompose_covariance(g.cov);
  const auto& q = d.rotation();
  return {{"mean", {g.mean.x(), g.mean.y(), g.mean.z()}},
          {"rot", {q.w(), q.x(), q.y(), q.z()}},
          {"scale", {d.scale().x(), d.scale().y(), d.scale().z()}}};
}

Gaussian3 gaussian_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidInput("gaussian must be a JSON object");
  const Vec3 mean = read_array<3>(j, "mean");
  const Eigen::Vector4d q = read_array<4>(j, "rot");
  const Vec3 scale = read_array<3>(j, "scale");
  if (q.norm() == 0.0) throw InvalidInput("field 'rot' has zero norm");
  if ((scale.array() <= 0.0).any()) throw InvalidInput("field 'scale' must be positive");
  return make_gaussian(mean, DecomposedCov::make(Eigen::Quaterniond(q[0], q[1], q[2], q[3]), scale));
}

}  // namespace bures

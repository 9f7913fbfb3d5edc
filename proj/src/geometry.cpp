#include "bures/geometry.hpp"

#include <cmath>

#include "bures/errors.hpp"

namespace bures {

SpdMat3 transport_map(const SpdMat3& base, const SpdMat3& target) {
  const EigenSystem3 e = eigh3(base.sym());
  EigenSystem3 root = e;
  root.values = e.values.cwiseSqrt();
  EigenSystem3 inv_root = e;
  inv_root.values = root.values.cwiseInverse();
  const Mat3 r = root.reconstruct();
  const Mat3 ri = inv_root.reconstruct();
  const SpdMat3 middle = SpdMat3::clamped(symmetrize(r * target.matrix() * r));
  const Mat3 m = sqrt_spd(middle).matrix();
  return SpdMat3::clamped(symmetrize(ri * m * ri));
}

TangentCov log_map_cov(const SpdMat3& base, const SpdMat3& target) {
  const Mat3 t = transport_map(base, target).matrix();
  const Mat3& s = base.matrix();
  return {symmetrize(t * s + s * t - 2.0 * s), base};
}

ExpResult exp_map_cov(const SpdMat3& base, const SymMat3& v, double floor) {
  const EigenSystem3 e = eigh3(base.sym());
  const Mat3 g = solve_sylvester(e, v).matrix();
  const Mat3& s = base.matrix();
  const SymMat3 raw = symmetrize(s + v.matrix() + g * s * g.transpose());

  const SymMat3 shifted = symmetrize(Mat3::Identity() + g);
  const bool left = eigh3(shifted).values[0] < std::sqrt(floor);
  return {SpdMat3::clamped(raw, floor), left};
}

Gaussian3 geodesic(const Gaussian3& a, const Gaussian3& b, double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw InvalidInput("geodesic parameter must lie in [0, 1]");
  const TangentCov log = log_map_cov(a.cov, b.cov);
  const ExpResult r = exp_map_cov(a.cov, s * log.value);
  return {(1.0 - s) * a.mean + s * b.mean, r.cov};
}

GaussianVelocity velocity(const Gaussian3& prev, const Gaussian3& curr) {
  TangentCov back = log_map_cov(curr.cov, prev.cov);
  return {curr.mean - prev.mean, {-back.value, curr.cov}};
}

PredictResult predict(const Gaussian3& curr, const GaussianVelocity& v, double floor) {
  const ExpResult r = exp_map_cov(curr.cov, v.d_cov.value, floor);
  return {{curr.mean + v.d_mean, r.cov}, r.left_manifold};
}

}  // namespace bures

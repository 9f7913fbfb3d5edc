#pragma once

// Logarithmic and exponential maps of the Bures-Wasserstein geometry on
// Gaussians, anchored at the base point:
//
//   Log_S(L) = (L S)^1/2 + (S L)^1/2 - 2 S = T S + S T - 2 S
//   Exp_S(X) = S + X + G S G,   G S + S G = X
//
// where T = S^-1/2 (S^1/2 L S^1/2)^1/2 S^-1/2 is the optimal transport map
// from N(0, S) to N(0, L). With this pairing G = T - I and Exp(Log(L)) = L.

#include "bures/gaussian.hpp"

namespace bures {

/// Result of an exponential map. `left_manifold` is set when the Sylvester
/// root G has I + G with an eigenvalue below sqrt(floor): the tangent step
/// ran past the point where the geodesic stops being a transport of the
/// base, so the returned covariance (already clamped to the PD cone) is not a
/// continuation of the geodesic.
struct ExpResult {
  SpdMat3 cov;
  bool left_manifold = false;
};

struct PredictResult {
  Gaussian3 gaussian;
  bool left_manifold = false;
};

/// Optimal transport map T between centered Gaussians, base -> target.
SpdMat3 transport_map(const SpdMat3& base, const SpdMat3& target);

TangentCov log_map_cov(const SpdMat3& base, const SpdMat3& target);
ExpResult exp_map_cov(const SpdMat3& base, const SymMat3& v, double floor = kEpsPd);
inline ExpResult exp_map_cov(const TangentCov& v, double floor = kEpsPd) {
  return exp_map_cov(v.base, v.value, floor);
}

/// Point at parameter s in [0, 1] on the geodesic from a to b. Throws
/// InvalidInput for s outside [0, 1].
Gaussian3 geodesic(const Gaussian3& a, const Gaussian3& b, double s);

/// Velocity at `curr`: d_mean = mu_curr - mu_prev, d_cov = -Log_curr(prev).
GaussianVelocity velocity(const Gaussian3& prev, const Gaussian3& curr);

/// Constant-velocity step: mean + d_mean, Exp_curr(d_cov). The covariance
/// tangent is reused as a raw symmetric matrix at curr's covariance; no
/// parallel transport is applied.
PredictResult predict(const Gaussian3& curr, const GaussianVelocity& v, double floor = kEpsPd);

}  // namespace bures

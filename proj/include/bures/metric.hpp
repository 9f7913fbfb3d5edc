#pragma once

#include "bures/gaussian.hpp"

namespace bures {

/// Squared 2-Wasserstein distance split into its two terms.
struct W2Parts {
  double mean_sq = 0.0;     // |mu_a - mu_b|^2
  double trace_term = 0.0;  // Tr(Sa + Sb - 2 (Sb^1/2 Sa Sb^1/2)^1/2)
  double w2_sq() const { return mean_sq + trace_term; }
};

/// Covariance part of W2^2 between two SPD matrices (the squared Bures
/// distance). Evaluated as |Sa^1/2 - Sb^1/2 U|_F^2 with U the optimal
/// orthogonal alignment, which equals the trace form exactly and is free of
/// cancellation, so identical inputs give 0 to machine precision.
double bures_sq(const SpdMat3& a, const SpdMat3& b);

W2Parts w2_parts(const Gaussian3& a, const Gaussian3& b);
double w2_squared(const Gaussian3& a, const Gaussian3& b);
double w2_distance(const Gaussian3& a, const Gaussian3& b);

/// Trace term computed from rotation/scale parameters:
///   E = Ra^T Rb Vb Rb^T Ra,  C = Va^1/2 E Va^1/2 (re-symmetrized),
///   Tr(Va) + Tr(Vb) - 2 sum_k sqrt(lambda_k(C)),
/// with V = diag(scale)^2.
double w2_trace_term_decomposed(const DecomposedCov& a, const DecomposedCov& b);

/// <v, v> at `base` in the Bures metric. Computed both as Tr(G v)/2 and
/// Tr(G base G) with G the Sylvester root of v; throws std::logic_error when
/// the two disagree by more than 1e-10 relative.
double tangent_norm_squared(const SpdMat3& base, const SymMat3& v);
double tangent_norm_squared(const TangentCov& v);

}  // namespace bures

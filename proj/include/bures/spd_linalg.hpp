#pragma once

// Stabilized kernels for symmetric and SPD 3x3 matrices.
//
// Everything here is a pure function of its arguments. Covariances are kept
// away from the PD boundary by an eigenvalue floor (kEpsPd by default); the
// floor is a parameter wherever it matters.

#include <Eigen/Core>

namespace bures {

inline constexpr double kEpsPd = 1e-8;

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

/// Symmetric 3x3 matrix. Exact symmetry is a construction invariant: the
/// only ways in are symmetrize(), the checked factories, and arithmetic that
/// preserves symmetry entrywise.
class SymMat3 {
 public:
  SymMat3() : m_(Mat3::Zero()) {}

  /// Throws InvalidInput unless `m` is finite and exactly symmetric.
  static SymMat3 from_symmetric(const Mat3& m);
  static SymMat3 diagonal(double a, double b, double c);
  static SymMat3 identity() { return diagonal(1.0, 1.0, 1.0); }
  static SymMat3 zero() { return SymMat3(); }

  const Mat3& matrix() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }
  double trace() const { return m_.trace(); }
  double frobenius() const { return m_.norm(); }

  friend SymMat3 operator+(const SymMat3& a, const SymMat3& b) { return SymMat3(a.m_ + b.m_); }
  friend SymMat3 operator-(const SymMat3& a, const SymMat3& b) { return SymMat3(a.m_ - b.m_); }
  friend SymMat3 operator-(const SymMat3& a) { return SymMat3(-a.m_); }
  friend SymMat3 operator*(double s, const SymMat3& a) { return SymMat3(s * a.m_); }
  friend SymMat3 operator*(const SymMat3& a, double s) { return SymMat3(s * a.m_); }
  friend bool operator==(const SymMat3& a, const SymMat3& b) { return a.m_ == b.m_; }

 private:
  friend SymMat3 symmetrize(const Mat3& m);
  explicit SymMat3(const Mat3& m) : m_(m) {}

  Mat3 m_;
};

/// Eigenvalues ascending; column k of `vectors` belongs to `values[k]`.
struct EigenSystem3 {
  Vec3 values;
  Mat3 vectors;

  Mat3 reconstruct() const;
};

/// Symmetric positive-definite 3x3 matrix with every eigenvalue at or above
/// the floor it was validated against (up to round-off slack).
class SpdMat3 {
 public:
  /// Identity.
  SpdMat3() : s_(SymMat3::identity()) {}

  /// Validating constructor; throws InvalidInput when the smallest eigenvalue
  /// is below `floor`.
  static SpdMat3 from(const SymMat3& s, double floor = kEpsPd);
  /// Projection: eigenvalues below `floor` are raised to it. Inputs that are
  /// already valid come back bitwise unchanged, so this is idempotent.
  static SpdMat3 clamped(const SymMat3& s, double floor = kEpsPd);
  static SpdMat3 diagonal(double a, double b, double c, double floor = kEpsPd);
  static SpdMat3 identity() { return SpdMat3(); }
  static SpdMat3 scaled_identity(double v, double floor = kEpsPd) {
    return diagonal(v, v, v, floor);
  }

  const SymMat3& sym() const { return s_; }
  const Mat3& matrix() const { return s_.matrix(); }
  double operator()(int i, int j) const { return s_(i, j); }
  double trace() const { return s_.trace(); }
  operator const SymMat3&() const { return s_; }  // NOLINT(google-explicit-constructor)

  friend bool operator==(const SpdMat3& a, const SpdMat3& b) { return a.s_ == b.s_; }

 private:
  explicit SpdMat3(const SymMat3& s) : s_(s) {}
  friend SpdMat3 spd_from_eigen(const EigenSystem3& e);

  SymMat3 s_;
};

/// (m + m^T) / 2. Throws InvalidInput on non-finite entries.
SymMat3 symmetrize(const Mat3& m);

/// Deterministic symmetric eigendecomposition: ascending eigenvalues,
/// orthonormal eigenvectors, each column signed so that its largest-magnitude
/// component (lowest index on ties) is nonnegative.
EigenSystem3 eigh3(const SymMat3& s);

/// Replaces every eigenvalue by max(lambda, floor). Throws InvalidInput for a
/// nonpositive floor.
EigenSystem3 clamp_eigenvalues(const EigenSystem3& e, double floor);

/// Rebuilds Q diag(values) Q^T. The caller guarantees the values are above
/// the PD floor (e.g. the output of clamp_eigenvalues).
SpdMat3 spd_from_eigen(const EigenSystem3& e);

/// True when every eigenvalue is >= floor up to round-off slack.
bool is_spd(const SymMat3& s, double floor = kEpsPd);

/// lambda_max / lambda_min.
double condition_number(const SpdMat3& a);

SpdMat3 sqrt_spd(const SpdMat3& a, double floor = kEpsPd);

struct InvSqrtResult {
  SpdMat3 value;
  /// Set when cond(a) > 1e8; the result is still usable but loses digits.
  bool degraded = false;
};

InvSqrtResult inv_sqrt_spd_checked(const SpdMat3& a, double floor = kEpsPd);
SpdMat3 inv_sqrt_spd(const SpdMat3& a, double floor = kEpsPd);

/// Solves G*sigma + sigma*G = delta in the eigenbasis of sigma:
/// G' = Q^T delta Q, G'_ij /= (l_i + l_j), G = Q G' Q^T.
SymMat3 solve_sylvester(const SpdMat3& sigma, const SymMat3& delta);
/// Same solve reusing a precomputed eigensystem of sigma.
SymMat3 solve_sylvester(const EigenSystem3& sigma_eig, const SymMat3& delta);

}  // namespace bures

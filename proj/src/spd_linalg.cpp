#include "bures/spd_linalg.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <string>

#include "bures/errors.hpp"

namespace bures {
namespace {

constexpr double kIllConditioned = 1e8;

bool all_finite(const Mat3& m) { return m.allFinite(); }

// Round-off allowance when testing an eigenvalue against the floor. A matrix
// rebuilt from clamped eigenvalues must test as valid again.
double floor_slack(double floor, double max_abs_eig) {
  return floor * 1e-6 + 64.0 * std::numeric_limits<double>::epsilon() * max_abs_eig;
}

Mat3 scaled_basis(const EigenSystem3& e, const Vec3& diag) {
  return e.vectors * diag.asDiagonal() * e.vectors.transpose();
}

}  // namespace

SymMat3 SymMat3::from_symmetric(const Mat3& m) {
  if (!all_finite(m)) throw InvalidInput("symmetric matrix has non-finite entries");
  if (m != m.transpose()) throw InvalidInput("matrix is not symmetric");
  return SymMat3(m);
}

SymMat3 SymMat3::diagonal(double a, double b, double c) {
  return from_symmetric(Vec3(a, b, c).asDiagonal().toDenseMatrix());
}

SymMat3 symmetrize(const Mat3& m) {
  if (!all_finite(m)) throw InvalidInput("matrix has non-finite entries");
  Mat3 s;
  for (int i = 0; i < 3; ++i) {
    s(i, i) = m(i, i);
    for (int j = i + 1; j < 3; ++j) {
      s(i, j) = s(j, i) = 0.5 * (m(i, j) + m(j, i));
    }
  }
  return SymMat3(s);
}

Mat3 EigenSystem3::reconstruct() const { return scaled_basis(*this, values); }

EigenSystem3 eigh3(const SymMat3& s) {
  Eigen::SelfAdjointEigenSolver<Mat3> solver(s.matrix(), Eigen::ComputeEigenvectors);
  EigenSystem3 e{solver.eigenvalues(), solver.eigenvectors()};
  // The solver already returns ascending order; keep it explicit.
  for (int i = 0; i < 2; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      if (e.values[j] < e.values[i]) {
        std::swap(e.values[i], e.values[j]);
        e.vectors.col(i).swap(e.vectors.col(j));
      }
    }
  }
  for (int k = 0; k < 3; ++k) {
    int pivot = 0;
    for (int r = 1; r < 3; ++r) {
      if (std::abs(e.vectors(r, k)) > std::abs(e.vectors(pivot, k))) pivot = r;
    }
    if (e.vectors(pivot, k) < 0.0) e.vectors.col(k) = -e.vectors.col(k);
  }
  return e;
}

EigenSystem3 clamp_eigenvalues(const EigenSystem3& e, double floor) {
  if (!(floor > 0.0)) throw InvalidInput("eigenvalue floor must be positive");
  EigenSystem3 out = e;
  out.values = e.values.cwiseMax(floor);
  return out;
}

SpdMat3 spd_from_eigen(const EigenSystem3& e) {
  return SpdMat3(symmetrize(e.reconstruct()));
}

bool is_spd(const SymMat3& s, double floor) {
  const Vec3 l = eigh3(s).values;
  return l[0] >= floor - floor_slack(floor, l.cwiseAbs().maxCoeff());
}

SpdMat3 SpdMat3::from(const SymMat3& s, double floor) {
  if (!is_spd(s, floor)) {
    throw InvalidInput("matrix is not positive definite (smallest eigenvalue " +
                       std::to_string(eigh3(s).values[0]) + ")");
  }
  return SpdMat3(s);
}

SpdMat3 SpdMat3::clamped(const SymMat3& s, double floor) {
  const EigenSystem3 e = eigh3(s);
  if (e.values[0] >= floor - floor_slack(floor, e.values.cwiseAbs().maxCoeff())) {
    return SpdMat3(s);
  }
  return spd_from_eigen(clamp_eigenvalues(e, floor));
}

SpdMat3 SpdMat3::diagonal(double a, double b, double c, double floor) {
  return from(SymMat3::diagonal(a, b, c), floor);
}

double condition_number(const SpdMat3& a) {
  const Vec3 l = eigh3(a.sym()).values;
  return l[2] / l[0];
}

SpdMat3 sqrt_spd(const SpdMat3& a, double floor) {
  EigenSystem3 e = clamp_eigenvalues(eigh3(a.sym()), floor);
  e.values = e.values.cwiseSqrt();
  return spd_from_eigen(e);
}

InvSqrtResult inv_sqrt_spd_checked(const SpdMat3& a, double floor) {
  EigenSystem3 e = clamp_eigenvalues(eigh3(a.sym()), floor);
  const bool degraded = e.values[2] / e.values[0] > kIllConditioned;
  e.values = e.values.cwiseSqrt().cwiseInverse();
  return {spd_from_eigen(e), degraded};
}

SpdMat3 inv_sqrt_spd(const SpdMat3& a, double floor) {
  return inv_sqrt_spd_checked(a, floor).value;
}

SymMat3 solve_sylvester(const EigenSystem3& sigma_eig, const SymMat3& delta) {
  const Mat3& q = sigma_eig.vectors;
  const Vec3& l = sigma_eig.values;
  Mat3 g = q.transpose() * delta.matrix() * q;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) g(i, j) /= (l[i] + l[j]);
  }
  return symmetrize(q * g * q.transpose());
}

SymMat3 solve_sylvester(const SpdMat3& sigma, const SymMat3& delta) {
  return solve_sylvester(eigh3(sigma.sym()), delta);
}

}  // namespace bures

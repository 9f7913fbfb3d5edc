#pragma once

#include <doctest.h>

#include "bures/spd_linalg.hpp"

namespace bures::test {

inline double max_abs_diff(const Mat3& a, const Mat3& b) { return (a - b).cwiseAbs().maxCoeff(); }

inline Mat3 diag(double a, double b, double c) { return Vec3(a, b, c).asDiagonal(); }

}  // namespace bures::test

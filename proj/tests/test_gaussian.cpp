#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "bures/errors.hpp"
#include "bures/gaussian.hpp"
#include "bures/testing/oracles.hpp"
#include "bures/testing/random.hpp"
#include "helpers.hpp"

using namespace bures;
using bures::test::diag;
using bures::test::max_abs_diff;

namespace {

Eigen::Quaterniond about_z(double angle) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, Vec3::UnitZ()));
}

}  // namespace

TEST_CASE("compose_covariance") {
  CHECK(max_abs_diff(compose_covariance(DecomposedCov()).matrix(), Mat3::Identity()) == 0.0);
  CHECK(max_abs_diff(compose_covariance(DecomposedCov::make(Eigen::Quaterniond::Identity(), Vec3(1, 2, 3))).matrix(),
                     diag(1, 4, 9)) <= 1e-15);

  // R diag(1,4,1) R^T for a 90 degree turn about z, written out by hand.
  const Mat3 r = (Mat3() << 0, -1, 0, 1, 0, 0, 0, 0, 1).finished();
  const Mat3 by_hand = r * diag(1, 4, 1) * r.transpose();
  const SpdMat3 c = compose_covariance(DecomposedCov::make(about_z(std::numbers::pi / 2), Vec3(1, 2, 1)));
  CHECK(max_abs_diff(c.matrix(), by_hand) <= 1e-15);
  CHECK(max_abs_diff(c.matrix(), diag(4, 1, 1)) <= 1e-15);

  testing::Rng rng(40);
  for (int t = 0; t < 500; ++t) {
    const DecomposedCov d = testing::random_decomposed(rng);
    const Vec3 ev = eigh3(compose_covariance(d)).values;
    Vec3 v = d.variances();
    std::sort(v.data(), v.data() + 3);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(ev[k] - v[k]) <= 1e-10 * v[k]);
  }
}

TEST_CASE("DecomposedCov::make") {
  const DecomposedCov d = DecomposedCov::make(Eigen::Quaterniond(2, 0, 0, 0), Vec3(-0.5, 1e-9, 2));
  CHECK(std::abs(d.rotation().norm() - 1.0) <= 1e-12);
  CHECK(d.scale()[0] == 0.5);
  CHECK(d.scale()[1] == doctest::Approx(std::sqrt(kEpsPd)));
  CHECK_THROWS_AS(DecomposedCov::make(Eigen::Quaterniond(0, 0, 0, 0), Vec3::Ones()), InvalidInput);
  CHECK_THROWS_AS(DecomposedCov::make(Eigen::Quaterniond::Identity(), Vec3(1, NAN, 1)), InvalidInput);
}

TEST_CASE("decompose_covariance") {
  SUBCASE("diagonal") {
    const DecomposedCov d = decompose_covariance(SpdMat3::diagonal(1, 4, 9));
    Vec3 s = d.scale();
    std::sort(s.data(), s.data() + 3);
    CHECK(max_abs_diff(s.asDiagonal(), diag(1, 2, 3)) <= 1e-14);
    const Mat3 r = d.rotation_matrix();
    CHECK(max_abs_diff(r.cwiseAbs() * r.cwiseAbs().transpose(), Mat3::Identity()) <= 1e-12);
  }
  SUBCASE("isotropic") {
    const DecomposedCov d = decompose_covariance(SpdMat3::identity());
    CHECK(max_abs_diff(d.scale().asDiagonal(), Mat3::Identity()) <= 1e-15);
    CHECK(max_abs_diff(compose_covariance(d).matrix(), Mat3::Identity()) <= 1e-15);
  }
  SUBCASE("round trips") {
    testing::Rng rng(41);
    for (int t = 0; t < 1000; ++t) {
      const DecomposedCov d = testing::random_decomposed(rng);
      const SpdMat3 c = compose_covariance(d);
      const DecomposedCov back = decompose_covariance(c);
      CHECK(back.rotation_matrix().determinant() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(testing::rel_frobenius(compose_covariance(back).matrix(), c.matrix()) <= 1e-9);
      const SpdMat3 s = testing::random_spd(rng);
      CHECK(testing::rel_frobenius(compose_covariance(decompose_covariance(s)).matrix(), s.matrix()) <= 1e-9);
    }
  }
}

TEST_CASE("project_to_valid") {
  SUBCASE("valid input is returned bitwise") {
    testing::Rng rng(42);
    for (int t = 0; t < 200; ++t) {
      const Gaussian3 g = testing::random_gaussian(rng);
      CHECK(project_to_valid(g) == g);
    }
  }
  SUBCASE("one slightly negative eigenvalue is lifted to the floor") {
    testing::Rng rng(43);
    const Mat3 r = testing::random_rotation(rng);
    const Mat3 cov = r * diag(-1e-10, 0.5, 2.0) * r.transpose();
    const Gaussian3 g = project_to_valid(Vec3::Zero(), cov);
    const Vec3 ev = eigh3(g.cov).values;
    CHECK(ev[0] == doctest::Approx(1e-8).epsilon(1e-6));
    CHECK(ev[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(ev[2] == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("asymmetric input equals the projection of its symmetrized form") {
    testing::Rng rng(44);
    for (int t = 0; t < 200; ++t) {
      const Mat3 cov = testing::random_spd(rng).matrix() + testing::random_mat(rng, 1e-3);
      const Gaussian3 a = project_to_valid(Vec3::Zero(), cov);
      const Gaussian3 b = project_to_valid(Vec3::Zero(), testing::entrywise_symmetrize(cov));
      CHECK(a == b);
    }
  }
  SUBCASE("idempotent bitwise") {
    testing::Rng rng(45);
    for (int t = 0; t < 500; ++t) {
      const Gaussian3 once = project_to_valid(Vec3::Zero(), testing::random_sym(rng).matrix());
      CHECK(project_to_valid(once) == once);
    }
  }
  SUBCASE("non-finite input is rejected") {
    CHECK_THROWS_AS(project_to_valid(Vec3(NAN, 0, 0), Mat3::Identity()), InvalidInput);
    Mat3 m = Mat3::Identity();
    m(1, 1) = INFINITY;
    CHECK_THROWS_AS(project_to_valid(Vec3::Zero(), m), InvalidInput);
  }
}

TEST_CASE("sigma_scale") {
  CHECK(sigma_scale(SpdMat3::identity()) == doctest::Approx(1.0));
  CHECK(sigma_scale(SpdMat3::diagonal(1, 4, 16)) == doctest::Approx(2.0));
  testing::Rng rng(46);
  const SpdMat3 s = testing::random_spd(rng);
  const Mat3 r = testing::random_rotation(rng);
  const SpdMat3 rotated = SpdMat3::clamped(symmetrize(r * s.matrix() * r.transpose()));
  CHECK(sigma_scale(rotated) == doctest::Approx(sigma_scale(s)).epsilon(1e-12));
}

TEST_CASE("gaussian json atom") {
  testing::Rng rng(47);
  for (int t = 0; t < 100; ++t) {
    const Gaussian3 g = testing::random_gaussian(rng);
    const nlohmann::json j = gaussian_to_json(g);
    CHECK(j.at("rot").size() == 4);
    const Gaussian3 back = gaussian_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.mean == g.mean);
    CHECK(testing::rel_frobenius(back.cov.matrix(), g.cov.matrix()) <= 1e-12);
  }
  const auto atom = nlohmann::json::parse(R"({"mean":[1,2,3],"rot":[1,0,0,0],"scale":[1,2,3]})");
  const Gaussian3 g = gaussian_from_json(atom);
  CHECK(g.mean == Vec3(1, 2, 3));
  CHECK(max_abs_diff(g.cov.matrix(), diag(1, 4, 9)) == 0.0);

  auto expect_field = [](const char* text, const char* field) {
    try {
      gaussian_from_json(nlohmann::json::parse(text));
      FAIL("expected InvalidInput");
    } catch (const InvalidInput& e) {
      CHECK(std::string(e.what()).find(field) != std::string::npos);
    }
  };
  expect_field(R"({"rot":[1,0,0,0],"scale":[1,1,1]})", "mean");
  expect_field(R"({"mean":[0,0,0],"rot":[1,0,0],"scale":[1,1,1]})", "rot");
  expect_field(R"({"mean":[0,0,0],"rot":[1,0,0,0],"scale":[1,"x",1]})", "scale");
  expect_field(R"({"mean":[0,0,0],"rot":[0,0,0,0],"scale":[1,1,1]})", "rot");
  expect_field(R"([1,2,3])", "object");
}

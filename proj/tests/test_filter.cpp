#include <cmath>

#include "bures/errors.hpp"
#include "bures/filter.hpp"
#include "bures/metric.hpp"
#include "bures/testing/oracles.hpp"
#include "bures/testing/random.hpp"
#include "helpers.hpp"

using namespace bures;
using bures::test::diag;
using bures::test::max_abs_diff;

namespace {

Gaussian3 at(const Vec3& m, const SpdMat3& c = SpdMat3::identity()) { return {m, c}; }

std::vector<std::vector<Gaussian3>> single_track(const std::vector<Gaussian3>& g) {
  std::vector<std::vector<Gaussian3>> seq;
  for (const auto& x : g) seq.push_back({x});
  return seq;
}

}  // namespace

TEST_CASE("FilterConfig") {
  const FilterConfig cfg;
  CHECK(cfg.engage_threshold == 0.1);
  CHECK(cfg.revert_threshold == 3.0);
  CHECK(cfg.epsilon_pd == 1e-8);
  CHECK_NOTHROW(cfg.validate());
  CHECK_THROWS_AS((FilterConfig{3.0, 0.1, kEpsPd}.validate()), InvalidInput);
  CHECK_THROWS_AS((FilterConfig{0.0, 3.0, kEpsPd}.validate()), InvalidInput);
  CHECK_THROWS_AS((FilterConfig{0.1, 3.0, 0.0}.validate()), InvalidInput);
}

TEST_CASE("kalman_gain") {
  testing::Rng rng(70);
  const SpdMat3 s = testing::random_spd(rng);
  CHECK(max_abs_diff(kalman_gain(s, s), 0.5 * Mat3::Identity()) <= 1e-14);

  const Mat3 tiny = kalman_gain(SpdMat3::scaled_identity(kEpsPd), SpdMat3::identity());
  CHECK(max_abs_diff(tiny, (kEpsPd / (1 + kEpsPd)) * Mat3::Identity()) <= 1e-22);

  CHECK(max_abs_diff(kalman_gain(SpdMat3::diagonal(1, 2, 3), SpdMat3::diagonal(3, 2, 1)),
                     diag(0.25, 0.5, 0.75)) <= 1e-15);

  for (int t = 0; t < 300; ++t) {
    const SpdMat3 a = testing::random_spd(rng), b = testing::random_spd(rng);
    const Mat3 k = kalman_gain(a, b);
    CHECK(testing::rel_frobenius(k, a.matrix() * (a.matrix() + b.matrix()).inverse()) <= 1e-10);
  }
}

TEST_CASE("merge") {
  testing::Rng rng(71);
  const Gaussian3 g = testing::random_gaussian(rng);
  CHECK(merge(g, g) == g);

  const Gaussian3 m = merge(at(Vec3::Zero()), at(Vec3(2, 0, 0)));
  CHECK(m.mean == Vec3(1, 0, 0));

  const Gaussian3 d = merge(at(Vec3::Zero(), SpdMat3::diagonal(1, 2, 3)), at(Vec3(4, 4, 4), SpdMat3::diagonal(3, 2, 1)));
  CHECK((d.mean - Vec3(1, 2, 3)).norm() <= 1e-14);

  SUBCASE("merged mean lies between obs and pred along shared eigendirections") {
    for (int t = 0; t < 500; ++t) {
      const Mat3 r = testing::random_rotation(rng);
      auto with_axes = [&](const Vec3& v) {
        return SpdMat3::clamped(symmetrize(r * v.asDiagonal() * r.transpose()));
      };
      const Gaussian3 o{testing::random_vec(rng), with_axes(testing::random_vec(rng).cwiseAbs() + Vec3::Constant(0.01))};
      const Gaussian3 p{testing::random_vec(rng), with_axes(testing::random_vec(rng).cwiseAbs() + Vec3::Constant(0.01))};
      const Gaussian3 m = merge(o, p);
      for (int k = 0; k < 3; ++k) {
        const double a = r.col(k).dot(o.mean), b = r.col(k).dot(p.mean), x = r.col(k).dot(m.mean);
        CHECK(x >= std::min(a, b) - 1e-12);
        CHECK(x <= std::max(a, b) + 1e-12);
      }
      const Gaussian3 q = merge(testing::random_gaussian(rng), testing::random_gaussian(rng));
      CHECK(project_to_valid(q) == q);
    }
  }
}

TEST_CASE("gate") {
  const FilterConfig cfg;
  const Gaussian3 o = at(Vec3::Zero());
  const GateResult same = gate(o, o, cfg);
  CHECK(same.decision == GateDecision::engage);
  CHECK(same.distance == 0.0);
  CHECK(same.sigma_scale == doctest::Approx(1.0));
  CHECK(gate(at(Vec3(5, 0, 0)), o, cfg).decision == GateDecision::revert);
  CHECK(gate(at(Vec3(1, 0, 0)), o, cfg).decision == GateDecision::hold);
  CHECK(gate(at(Vec3(3, 0, 0)), o, cfg).decision == GateDecision::hold);
  CHECK(gate(at(Vec3(std::nextafter(3.0, 4.0), 0, 0)), o, cfg).decision == GateDecision::revert);
  CHECK(gate(at(Vec3(0.1, 0, 0)), o, cfg).decision == GateDecision::hold);
  CHECK(gate(at(Vec3(std::nextafter(0.1, 0.0), 0, 0)), o, cfg).decision == GateDecision::engage);
  // sigma_scale comes from the observation, not the prediction
  const Gaussian3 wide = at(Vec3::Zero(), SpdMat3::scaled_identity(4));
  CHECK(gate(at(Vec3(5, 0, 0)), wide, cfg).decision == GateDecision::hold);
  CHECK(gate(at(Vec3(5, 0, 0), SpdMat3::scaled_identity(4)), o, cfg).decision == GateDecision::revert);
}

TEST_CASE("step") {
  const FilterConfig cfg;
  SUBCASE("warmup frames pass through verbatim") {
    testing::Rng rng(72);
    TrackState t;
    for (int f = 0; f < 2; ++f) {
      const Gaussian3 o = testing::random_gaussian(rng);
      const StepResult r = step(t, o, cfg);
      CHECK(r.output == o);
      CHECK_FALSE(r.event.decision.has_value());
      CHECK(r.state.status == TrackStatus::warmup);
      t = r.state;
    }
    CHECK(t.prev2.has_value());
    CHECK(t.velocity.has_value());
  }
  SUBCASE("noiseless constant velocity: third output equals the observation") {
    const SpdMat3 c = SpdMat3::diagonal(0.5, 1.0, 2.0);
    TrackState t;
    StepResult r;
    for (int f = 0; f < 3; ++f) {
      r = step(t, at(Vec3(0.01 * f, 0, 0), c), cfg);
      t = r.state;
    }
    CHECK(r.event.merged);
    CHECK(r.state.status == TrackStatus::engaged);
    CHECK((r.output.mean - Vec3(0.02, 0, 0)).norm() <= 1e-15);
    CHECK(testing::rel_frobenius(r.output.cov.matrix(), c.matrix()) <= 1e-14);
  }
  SUBCASE("10 sigma outlier on a static track reverts") {
    TrackState t;
    for (int f = 0; f < 4; ++f) t = step(t, at(Vec3::Zero()), cfg).state;
    REQUIRE(t.status == TrackStatus::engaged);
    const Gaussian3 outlier = at(Vec3(10, 0, 0));
    const StepResult r = step(t, outlier, cfg);
    CHECK(r.event.decision == GateDecision::revert);
    CHECK(r.output == outlier);
    CHECK(r.state.status == TrackStatus::reverted);
    CHECK(r.state.consecutive_divergence_count == 1);
    CHECK_FALSE(r.state.velocity.has_value());
    CHECK_FALSE(r.state.prev2.has_value());
  }
  SUBCASE("left-manifold prediction is never merged") {
    TrackState t;
    t.status = TrackStatus::engaged;
    t.prev2 = at(Vec3::Zero(), SpdMat3::scaled_identity(4));
    t.prev = at(Vec3::Zero());
    t.velocity = velocity(*t.prev2, *t.prev);
    const Gaussian3 o = at(Vec3::Zero());
    const StepResult r = step(t, o, cfg);
    CHECK(r.event.left_manifold);
    CHECK(r.event.decision == GateDecision::hold);
    CHECK_FALSE(r.event.merged);
    CHECK(r.output == o);
  }
  SUBCASE("velocity always matches the stored history") {
    testing::Rng rng(73);
    TrackState t;
    for (int f = 0; f < 40; ++f) {
      const Gaussian3 o{Vec3(0.01 * f, 0, 0) + testing::random_vec(rng, f % 9 == 8 ? 3.0 : 0.01),
                        SpdMat3::identity()};
      t = step(t, o, cfg).state;
      CHECK(t.velocity.has_value() == t.prev2.has_value());
      if (t.velocity) {
        const GaussianVelocity v = velocity(*t.prev2, *t.prev);
        CHECK(v.d_mean == t.velocity->d_mean);
        CHECK(v.d_cov.value == t.velocity->d_cov.value);
      }
    }
  }
}

TEST_CASE("state machine over random walks") {
  // warmup never jumps to reverted, reverted never merges
  const FilterConfig cfg;
  testing::Rng rng(74);
  for (int trial = 0; trial < 50; ++trial) {
    TrackState t;
    for (int f = 0; f < 60; ++f) {
      const double u = testing::uniform(rng, 0, 1);
      const double jump = u < 0.1 ? 6.0 : (u < 0.3 ? 1.0 : 0.01);
      const Gaussian3 o{testing::random_vec(rng, jump), SpdMat3::identity()};
      const StepResult r = step(t, o, cfg);
      if (t.status == TrackStatus::warmup) CHECK(r.state.status != TrackStatus::reverted);
      if (r.state.status == TrackStatus::reverted || t.status == TrackStatus::reverted) {
        CHECK_FALSE(r.event.merged);
      }
      CHECK(project_to_valid(r.output) == r.output);
      t = r.state;
    }
  }
}

TEST_CASE("track_sequence") {
  const FilterConfig cfg;
  CHECK(track_sequence({}, cfg).frames.empty());

  SUBCASE("static noiseless Gaussian") {
    const Gaussian3 g{Vec3(1, 2, 3), SpdMat3::diagonal(0.1, 0.2, 0.3)};
    const TrackOutput out = track_sequence(single_track(std::vector<Gaussian3>(10, g)), cfg);
    REQUIRE(out.frames.size() == 10);
    for (const auto& f : out.frames) {
      CHECK(f[0].mean == g.mean);
      CHECK(testing::rel_frobenius(f[0].cov.matrix(), g.cov.matrix()) <= 1e-14);
    }
    CHECK(out.log.size() == 10);
    CHECK_FALSE(out.log[1].gate_distance.has_value());
    CHECK(out.log[2].gate_distance.has_value());
    CHECK(out.log[9].status == TrackStatus::engaged);
  }
  SUBCASE("count mismatch names the frame") {
    std::vector<std::vector<Gaussian3>> seq(4, std::vector<Gaussian3>(3));
    seq[2].pop_back();
    try {
      track_sequence(seq, cfg);
      FAIL("expected CorrespondenceError");
    } catch (const CorrespondenceError& e) {
      CHECK(e.frame() == 2);
      CHECK(std::string(e.what()).find("frame 2") != std::string::npos);
    }
  }
  SUBCASE("threads do not change the result") {
    testing::Rng rng(75);
    std::vector<std::vector<Gaussian3>> seq(20, std::vector<Gaussian3>(17));
    for (std::size_t f = 0; f < seq.size(); ++f) {
      for (auto& g : seq[f]) g = {testing::random_vec(rng, 0.05), testing::random_spd(rng, 10.0, 0.5)};
    }
    const TrackOutput a = track_sequence(seq, cfg, 1);
    const TrackOutput b = track_sequence(seq, cfg, 4);
    CHECK(a.frames == b.frames);
    for (std::size_t k = 0; k < a.log.size(); ++k) {
      CHECK(a.log[k].status == b.log[k].status);
      CHECK(a.log[k].gate_distance == b.log[k].gate_distance);
      CHECK(a.log[k].frame * 17 + a.log[k].index == k);
    }
  }
  SUBCASE("linear motion with mean noise: filtered RMSE below observed") {
    int wins = 0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s) {
      testing::Rng rng(1000 + s);
      const SpdMat3 c = SpdMat3::scaled_identity(0.01);  // sigma_scale 0.1
      std::vector<Gaussian3> truth, obs;
      for (int f = 0; f < 60; ++f) {
        truth.push_back({Vec3(0.003 * f, -0.002 * f, 0.001 * f), c});
        obs.push_back({truth.back().mean + testing::random_vec(rng, 0.05 * 0.1), c});
      }
      const TrackOutput out = track_sequence(single_track(obs), cfg);
      double e_obs = 0, e_filt = 0;
      for (int f = 0; f < 60; ++f) {
        e_obs += (obs[f].mean - truth[f].mean).squaredNorm();
        e_filt += (out.frames[f][0].mean - truth[f].mean).squaredNorm();
      }
      wins += e_filt < e_obs ? 1 : 0;
    }
    CHECK(wins == seeds);
  }
}

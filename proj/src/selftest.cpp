#include "bures/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Geometry>

#include "bures/filter.hpp"
#include "bures/geometry.hpp"
#include "bures/losses.hpp"
#include "bures/metric.hpp"
#include "bures/parallel.hpp"
#include "bures/sim.hpp"
#include "bures/testing/oracles.hpp"
#include "bures/testing/random.hpp"

namespace bures {

using testing::Rng;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::uint64_t trial_seed(std::uint64_t base, int criterion, std::size_t trial) {
  std::uint64_t x = base ^ (static_cast<std::uint64_t>(criterion) << 48) ^ (trial * 0x9E3779B97F4A7C15ULL);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Worst-case error over a batch of trials, each compared to one tolerance.
class ErrorTracker {
 public:
  ErrorTracker(int criterion, std::string name, double tolerance)
      : criterion_(criterion), name_(std::move(name)), tolerance_(tolerance), start_(Clock::now()) {}

  void add(double err, std::uint64_t seed) {
    ++trials_;
    const bool ok = err <= tolerance_;
    if (!ok) ++failures_;
    if (std::isnan(err)) err = std::numeric_limits<double>::infinity();
    if (trials_ == 1 || err > worst_) {
      worst_ = err;
      worst_seed_ = seed;
    }
  }

  PropertyResult result(std::string detail = {}) const {
    PropertyResult r;
    r.criterion = criterion_;
    r.name = name_;
    r.passed = failures_ == 0 && trials_ > 0;
    r.observed = worst_;
    r.threshold = tolerance_;
    r.relation = "<=";
    r.seed = worst_seed_;
    r.trials = trials_;
    r.failures = failures_;
    r.seconds = seconds_since(start_);
    r.detail = std::move(detail);
    return r;
  }

 private:
  int criterion_;
  std::string name_;
  double tolerance_;
  Clock::time_point start_;
  double worst_ = 0.0;
  std::uint64_t worst_seed_ = 0;
  std::size_t trials_ = 0;
  std::size_t failures_ = 0;
};

PropertyResult scalar_property(int criterion, std::string name, double observed, double threshold,
                               std::string relation, double seconds, std::string detail = {}) {
  PropertyResult r;
  r.criterion = criterion;
  r.name = std::move(name);
  r.observed = observed;
  r.threshold = threshold;
  r.relation = relation;
  if (relation == "<=") r.passed = observed <= threshold;
  else if (relation == "<") r.passed = observed < threshold;
  else if (relation == ">=") r.passed = observed >= threshold;
  else if (relation == "==") r.passed = observed == threshold;
  r.trials = 1;
  r.failures = r.passed ? 0 : 1;
  r.seconds = seconds;
  r.detail = std::move(detail);
  return r;
}

TangentCov log_for_check(const SpdMat3& base, const SpdMat3& target, const SelftestOptions& o) {
  TangentCov t = log_map_cov(base, target);
  if (o.inject_log_sign_flip) t.value = -t.value;
  return t;
}

}  // namespace

double tolerance_scale(ToleranceProfile p) { return p == ToleranceProfile::strict ? 0.1 : 1.0; }

bool SelftestReport::passed() const {
  return !properties.empty() &&
         std::all_of(properties.begin(), properties.end(), [](const auto& p) { return p.passed; });
}

nlohmann::json SelftestReport::to_json() const {
  nlohmann::json props = nlohmann::json::array();
  for (const PropertyResult& p : properties) {
    nlohmann::json j = {{"criterion", p.criterion},
                        {"name", p.name},
                        {"passed", p.passed},
                        {"threshold", p.threshold},
                        {"relation", p.relation},
                        {"seed", p.seed},
                        {"trials", p.trials},
                        {"failures", p.failures},
                        {"seconds", p.seconds},
                        {"detail", p.detail}};
    j["observed"] = std::isfinite(p.observed) ? nlohmann::json(p.observed) : nlohmann::json(nullptr);
    props.push_back(std::move(j));
  }
  return {{"schema", "bures-flow/selftest-report/1"},
          {"passed", passed()},
          {"profile", profile == ToleranceProfile::strict ? "strict" : "standard"},
          {"seconds", seconds},
          {"properties", std::move(props)}};
}

// 1. Metric axioms.
std::vector<PropertyResult> check_metric_axioms(const SelftestOptions& o) {
  const auto start = Clock::now();
  const double k = tolerance_scale(o.profile);
  ErrorTracker identity(1, "w2_identity", 1e-9 * k);
  ErrorTracker symmetry(1, "w2_symmetry", 1e-10 * k);
  ErrorTracker triangle(1, "w2_triangle", 1e-9 * k);
  for (std::size_t t = 0; t < o.trials; ++t) {
    const std::uint64_t seed = trial_seed(o.seed, 1, t);
    Rng rng(seed);
    const Gaussian3 a = testing::random_gaussian(rng);
    const Gaussian3 b = testing::random_gaussian(rng);
    const Gaussian3 c = testing::random_gaussian(rng);
    identity.add(w2_distance(a, a), seed);
    const double ab = w2_distance(a, b);
    const double ba = w2_distance(b, a);
    symmetry.add(std::abs(ab - ba) / std::max(ab, 1.0), seed);
    const double bc = w2_distance(b, c);
    const double ac = w2_distance(a, c);
    triangle.add(std::max(0.0, ac - ab - bc), seed);
  }
  std::vector<PropertyResult> out{identity.result(), symmetry.result("|w2(a,b)-w2(b,a)| / max(w2,1)"),
                                  triangle.result("max(0, w2(a,c) - w2(a,b) - w2(b,c))")};
  out.push_back(scalar_property(1, "metric_axioms_runtime_seconds", seconds_since(start), 5.0, "<",
                                seconds_since(start)));
  return out;
}

// 2. Decomposed trace term against the full-matrix trace term, plus the
// full-matrix route against an independent brute-force evaluation.
std::vector<PropertyResult> check_decomposition_consistency(const SelftestOptions& o) {
  const double k = tolerance_scale(o.profile);
  ErrorTracker decomposed(2, "decomposed_trace_term", 1e-9 * k);
  ErrorTracker brute(2, "w2_vs_bruteforce", 1e-9 * k);
  for (std::size_t t = 0; t < o.trials; ++t) {
    const std::uint64_t seed = trial_seed(o.seed, 2, t);
    Rng rng(seed);
    const DecomposedCov da = testing::random_decomposed(rng);
    const DecomposedCov db = testing::random_decomposed(rng);
    const SpdMat3 sa = compose_covariance(da);
    const SpdMat3 sb = compose_covariance(db);
    const double full = bures_sq(sa, sb);
    const double dec = w2_trace_term_decomposed(da, db);
    decomposed.add(std::abs(dec - full) / std::max(full, 1e-12), seed);

    const Gaussian3 a = testing::random_gaussian(rng);
    const Gaussian3 b = testing::random_gaussian(rng);
    const double w = w2_squared(a, b);
    const double ref = (a.mean - b.mean).squaredNorm() +
                       testing::trace_term_bruteforce(a.cov.matrix(), b.cov.matrix());
    brute.add(std::abs(w - ref) / std::max(std::abs(ref), 1e-12), seed);
  }
  return {decomposed.result("relative to the full-matrix value"),
          brute.result("schur-sqrt evaluation of the trace formula")};
}

// 3. Exp(Log) round trip and flag-free geodesics.
std::vector<PropertyResult> check_exp_log_round_trip(const SelftestOptions& o) {
  const double k = tolerance_scale(o.profile);
  ErrorTracker round_trip(3, "exp_log_round_trip", 1e-6 * k);
  ErrorTracker flags(3, "geodesic_left_manifold_flags", 0.0);
  for (std::size_t t = 0; t < o.trials; ++t) {
    const std::uint64_t seed = trial_seed(o.seed, 3, t);
    Rng rng(seed);
    const SpdMat3 base = testing::random_spd(rng);
    const SpdMat3 target = testing::random_spd(rng);
    const TangentCov log = log_for_check(base, target, o);
    const ExpResult back = exp_map_cov(base, log.value);
    round_trip.add(testing::rel_frobenius(back.cov.matrix(), target.matrix()), seed);
    int flagged = 0;
    for (double s : {0.0, testing::uniform(rng, 0.0, 1.0), 0.5, 1.0}) {
      flagged += exp_map_cov(base, s * log.value).left_manifold ? 1 : 0;
    }
    flags.add(flagged, seed);
  }
  return {round_trip.result("|Exp(Log(L)) - L|_F / |L|_F"),
          flags.result("flagged exp steps per trial at s in {0, u, 0.5, 1}")};
}

// 4. Tangent norm of the log equals the squared distance; midpoints bisect.
std::vector<PropertyResult> check_metric_geometry(const SelftestOptions& o) {
  const double k = tolerance_scale(o.profile);
  ErrorTracker compat(4, "tangent_norm_matches_w2", 1e-6 * k);
  ErrorTracker midpoint(4, "geodesic_midpoint_bisects", 1e-6 * k);
  for (std::size_t t = 0; t < o.trials; ++t) {
    const std::uint64_t seed = trial_seed(o.seed, 4, t);
    Rng rng(seed);
    const SpdMat3 base = testing::random_spd(rng);
    const SpdMat3 target = testing::random_spd(rng);
    const double norm = tangent_norm_squared(log_for_check(base, target, o));
    const double dist = bures_sq(base, target);
    compat.add(std::abs(norm - dist) / std::max(dist, 1e-12), seed);

    const Gaussian3 a = testing::random_gaussian(rng);
    const Gaussian3 b = testing::random_gaussian(rng);
    Gaussian3 m = geodesic(a, b, 0.5);
    if (o.inject_log_sign_flip) {
      m.cov = exp_map_cov(a.cov, 0.5 * log_for_check(a.cov, b.cov, o).value).cov;
    }
    const double half = 0.5 * w2_distance(a, b);
    const double err = std::max(std::abs(w2_distance(a, m) - half), std::abs(w2_distance(m, b) - half));
    midpoint.add(err / std::max(half, 1e-12), seed);
  }
  return {compat.result("relative to the covariance part of W2^2"),
          midpoint.result("relative to w2(a,b)/2")};
}

// 5. Eigenbasis Sylvester solve against the Kronecker-vectorized oracle.
std::vector<PropertyResult> check_sylvester(const SelftestOptions& o) {
  const double k = tolerance_scale(o.profile);
  ErrorTracker oracle(5, "sylvester_vs_kronecker", 1e-9 * k);
  ErrorTracker residual(5, "sylvester_residual", 1e-9 * k);
  ErrorTracker symmetry(5, "sylvester_symmetry", 1e-12 * k);
  for (std::size_t t = 0; t < o.trials; ++t) {
    const std::uint64_t seed = trial_seed(o.seed, 5, t);
    Rng rng(seed);
    const SpdMat3 sigma = testing::random_spd(rng);
    const SymMat3 delta = testing::random_sym(rng, testing::uniform(rng, 0.01, 10.0));
    const Mat3 g = solve_sylvester(sigma, delta).matrix();
    const Mat3 ref = testing::kronecker_sylvester(sigma.matrix(), delta.matrix());
    oracle.add(testing::rel_frobenius(g, ref, 1e-12), seed);
    const Mat3 lhs = g * sigma.matrix() + sigma.matrix() * g;
    residual.add((lhs - delta.matrix()).norm() / std::max(delta.frobenius(), 1e-12), seed);
    symmetry.add((g - g.transpose()).cwiseAbs().maxCoeff(), seed);
  }
  return {oracle.result("relative Frobenius"), residual.result("relative Frobenius"),
          symmetry.result("max |G - G^T|")};
}

// 6 and 7. Default simulator preset over many seeds, both modes.
std::vector<PropertyResult> check_filter_simulation(const SelftestOptions& o) {
  const auto start = Clock::now();
  struct Outcome {
    MetricsReport obs;
    MetricsReport filtered;
  };
  std::vector<Outcome> outcomes(o.sim_seeds);
  const FilterConfig fcfg;
  parallel_for(o.sim_seeds, o.threads, [&](std::size_t k) {
    ScenarioConfig cfg = preset("default");
    cfg.seed = o.seed + k;
    outcomes[k].obs = run_experiment(cfg, fcfg, Mode::obs_only).metrics;
    outcomes[k].filtered = run_experiment(cfg, fcfg, Mode::filtered).metrics;
  });
  const double elapsed = seconds_since(start);

  std::size_t aepe_wins = 0, wr_ok = 0, rough_ok = 0;
  std::vector<double> reductions;
  for (const Outcome& r : outcomes) {
    aepe_wins += r.filtered.aepe_2d < r.obs.aepe_2d ? 1 : 0;
    wr_ok += r.filtered.wr_loss <= r.obs.wr_loss ? 1 : 0;
    rough_ok += r.filtered.temporal_roughness <= r.obs.temporal_roughness ? 1 : 0;
    reductions.push_back(1.0 - r.filtered.aepe_2d / r.obs.aepe_2d);
  }
  double median = 0.0;
  if (!reductions.empty()) {
    std::sort(reductions.begin(), reductions.end());
    const std::size_t n = reductions.size();
    median = n % 2 ? reductions[n / 2] : 0.5 * (reductions[n / 2 - 1] + reductions[n / 2]);
  }
  const double required = std::ceil(0.95 * static_cast<double>(o.sim_seeds));
  std::ostringstream seeds;
  seeds << o.sim_seeds << " seeds starting at " << o.seed;

  std::vector<PropertyResult> out;
  out.push_back(scalar_property(6, "filtered_aepe_below_observation_seeds", static_cast<double>(aepe_wins), required, ">=",
                                elapsed, seeds.str()));
  out.push_back(scalar_property(6, "median_aepe_reduction", median, 0.20, ">=", elapsed,
                                "median over seeds of 1 - aepe_filtered / aepe_obs"));
  out.push_back(scalar_property(6, "simulation_runtime_seconds", elapsed, 60.0, "<", elapsed));
  out.push_back(scalar_property(7, "wr_loss_not_above_observation_seeds", static_cast<double>(wr_ok), required, ">=",
                                elapsed, seeds.str()));
  out.push_back(scalar_property(7, "roughness_not_above_observation_seeds", static_cast<double>(rough_ok), required, ">=",
                                elapsed, seeds.str()));
  for (auto& p : out) p.seed = o.seed;
  return out;
}

namespace {

// Expected outcome of one filter step, by (status, stored states, gate regime).
struct Transition {
  TrackStatus next;
  bool merged;
  std::size_t history;  // stored states afterwards
  int divergence;       // -1 reset to 0, 0 unchanged, +1 incremented
};

Transition expected_transition(TrackStatus s, std::size_t history, GateDecision d, bool left) {
  if (history < 2) return {s, false, history + 1, 0};
  if (left) d = GateDecision::hold;
  switch (s) {
    case TrackStatus::warmup:
      if (d == GateDecision::engage) return {TrackStatus::engaged, true, 2, -1};
      if (d == GateDecision::hold) return {TrackStatus::warmup, false, 2, -1};
      return {TrackStatus::warmup, false, 1, +1};
    case TrackStatus::engaged:
      if (d == GateDecision::revert) return {TrackStatus::reverted, false, 1, +1};
      if (left) return {TrackStatus::engaged, false, 2, 0};
      return {TrackStatus::engaged, true, 2, -1};
    case TrackStatus::reverted:
      if (d == GateDecision::revert) return {TrackStatus::reverted, false, 1, +1};
      return {TrackStatus::warmup, false, 1, -1};
  }
  return {s, false, history, 0};
}

Gaussian3 at(double x, const SpdMat3& cov = SpdMat3::identity()) { return {Vec3(x, 0.0, 0.0), cov}; }

TrackState make_state(TrackStatus status, std::size_t history, bool left) {
  TrackState t;
  t.status = status;
  t.consecutive_divergence_count = 1;
  if (history >= 1) t.prev = at(0.0);
  if (history >= 2) {
    t.prev2 = left ? at(0.0, SpdMat3::scaled_identity(4.0)) : at(0.0);
    t.velocity = velocity(*t.prev2, *t.prev);
  }
  return t;
}

std::size_t stored(const TrackState& t) { return t.prev2 ? 2 : (t.prev ? 1 : 0); }

}  // namespace

// 8. Gating state machine.
std::vector<PropertyResult> check_gating(const SelftestOptions& o) {
  const auto start = Clock::now();
  const FilterConfig cfg;
  std::vector<PropertyResult> out;

  // Exhaustive enumeration over reachable (status, history) pairs, gate
  // regimes and the left-manifold flag. Observations have identity
  // covariance, so sigma_scale = 1 and the regime is set by the offset.
  const std::pair<GateDecision, double> regimes[] = {
      {GateDecision::engage, 0.05}, {GateDecision::hold, 1.0}, {GateDecision::revert, 5.0}};
  const std::pair<TrackStatus, std::size_t> states[] = {
      {TrackStatus::warmup, 0}, {TrackStatus::warmup, 1}, {TrackStatus::warmup, 2},
      {TrackStatus::engaged, 2}, {TrackStatus::reverted, 1}, {TrackStatus::reverted, 2}};
  std::size_t cases = 0, mismatches = 0;
  std::ostringstream bad;
  for (const auto& [status, history] : states) {
    for (const auto& [regime, offset] : regimes) {
      for (bool left : {false, true}) {
        if (left && history < 2) continue;
        ++cases;
        const TrackState before = make_state(status, history, left);
        const Gaussian3 obs = at(offset);
        const StepResult r = step(before, obs, cfg);
        const Transition want = expected_transition(status, history, regime, left);
        const int div_delta = r.state.consecutive_divergence_count == 0 ? -1
                              : r.state.consecutive_divergence_count == 1 ? 0 : +1;
        const bool ok = r.state.status == want.next && r.event.merged == want.merged &&
                        stored(r.state) == want.history && div_delta == want.divergence &&
                        (want.merged || r.output == obs) &&
                        (r.state.velocity.has_value() == r.state.prev2.has_value());
        if (!ok) {
          ++mismatches;
          bad << to_string(status) << '/' << history << '/' << to_string(regime) << (left ? "/left " : " ");
        }
      }
    }
  }
  out.push_back(scalar_property(8, "transition_table_mismatches", static_cast<double>(mismatches), 0.0,
                                "==", seconds_since(start),
                                std::to_string(cases) + " cases " + bad.str()));

  // Scripted outlier on a static track: exactly 3 sigma holds engagement,
  // the next representable distance reverts, then the track re-enters
  // warmup and re-engages.
  auto run_script = [&](double offset) {
    std::vector<TrackStatus> statuses;
    std::vector<bool> merged;
    TrackState t;
    for (int f = 0; f < 12; ++f) {
      const Gaussian3 obs = f == 4 ? at(offset) : at(0.0);
      const StepResult r = step(t, obs, cfg);
      statuses.push_back(r.state.status);
      merged.push_back(r.event.merged);
      t = r.state;
    }
    return std::make_pair(statuses, merged);
  };
  using S = TrackStatus;
  const auto [at_threshold, at_threshold_merged] = run_script(3.0);
  const auto [above, above_merged] = run_script(std::nextafter(3.0, 4.0));
  const std::vector<S> want_above = {S::warmup,   S::warmup,   S::engaged, S::engaged,
                                     S::reverted, S::reverted, S::reverted, S::reverted,
                                     S::warmup,   S::warmup,   S::engaged,  S::engaged};
  const bool threshold_holds =
      std::all_of(at_threshold.begin() + 2, at_threshold.end(), [](S s) { return s == S::engaged; });
  bool reverted_never_merges = true;
  for (std::size_t f = 0; f < above.size(); ++f) {
    if (above[f] == S::reverted && above_merged[f]) reverted_never_merges = false;
  }
  const bool scripted_ok = threshold_holds && above == want_above && reverted_never_merges &&
                           above_merged[10] && above_merged[11];
  out.push_back(scalar_property(8, "scripted_outlier_revert_and_reengage", scripted_ok ? 1.0 : 0.0, 1.0,
                                "==", seconds_since(start),
                                "revert iff distance > 3 sigma_scale; re-engage after warmup"));
  out.push_back(scalar_property(8, "default_thresholds", cfg.engage_threshold == 0.1 && cfg.revert_threshold == 3.0,
                                1.0, "==", 0.0, "engage 0.1 sigma, revert 3 sigma"));
  for (auto& p : out) p.seed = o.seed;
  return out;
}

// 9. Loss arithmetic.
std::vector<PropertyResult> check_loss_arithmetic(const SelftestOptions& o) {
  const double k = tolerance_scale(o.profile);
  ErrorTracker composite(9, "total_loss_composite", 1e-12 * k);
  ErrorTracker linear(9, "linear_losses_vs_entrywise", 1e-12 * k);

  composite.add(std::abs(total_loss(1.0, 4.0, 10.0) - 1.5), 0);
  composite.add(std::abs(total_loss(0.0, 0.0, 0.0)), 0);
  composite.add(std::abs(total_loss(2.5, 7.0, 3.0, {0.0, 0.0}) - 2.5), 0);
  const Gaussian3 a = at(0.0);
  const Gaussian3 b{Vec3(1.0, 0.0, 0.0), SpdMat3::scaled_identity(4.0)};
  linear.add(std::abs(linear_soa_loss(a, b) - 28.0) / 28.0, 0);

  for (std::size_t t = 0; t < o.trials / 10; ++t) {
    const std::uint64_t seed = trial_seed(o.seed, 9, t);
    Rng rng(seed);
    const double r = testing::uniform(rng, 0.0, 5.0);
    const double s = testing::uniform(rng, 0.0, 5.0);
    const double w = testing::uniform(rng, 0.0, 5.0);
    const double hand = r + 0.1 * s + 0.01 * w;
    composite.add(std::abs(total_loss(r, s, w) - hand) / std::max(hand, 1.0), seed);

    Sequence seq(4, std::vector<Gaussian3>(3));
    for (auto& frame : seq) {
      for (auto& g : frame) g = testing::random_gaussian(rng);
    }
    double expect = 0.0;
    for (std::size_t f = 1; f < seq.size(); ++f) {
      for (std::size_t i = 0; i < seq[f].size(); ++i) {
        const Gaussian3& p = seq[f][i];
        const Gaussian3& q = seq[f - 1][i];
        double term = 0.0;
        for (int r0 = 0; r0 < 3; ++r0) {
          term += (p.mean[r0] - q.mean[r0]) * (p.mean[r0] - q.mean[r0]);
          for (int c0 = 0; c0 < 3; ++c0) {
            const double d = p.cov(r0, c0) - q.cov(r0, c0);
            term += d * d;
          }
        }
        expect += term;
      }
    }
    linear.add(std::abs(linear_wr_loss(seq) - expect) / std::max(expect, 1e-12), seed);
  }
  return {composite.result("lambda_soa = 0.1, lambda_wr = 0.01"),
          linear.result("squared mean and Frobenius differences against explicit loops")};
}

// 10. Finite-difference gradient of W2^2 against the analytic derivative
// -Tr(G H) with G the Sylvester root of Log_Sa(Sb).
std::vector<PropertyResult> check_gradient(const SelftestOptions& o) {
  const double k = tolerance_scale(o.profile);
  ErrorTracker grad(10, "w2_gradient_vs_finite_difference", 1e-4 * k);
  auto hat = [](const Vec3& w) {
    Mat3 m;
    m << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
    return m;
  };
  auto separated = [](const Vec3& s) {
    Vec3 v = s.cwiseAbs2();
    std::sort(v.data(), v.data() + 3);
    return v[1] - v[0] > 0.1 * v[1] && v[2] - v[1] > 0.1 * v[2];
  };
  for (std::size_t t = 0; t < o.fd_trials; ++t) {
    const std::uint64_t seed = trial_seed(o.seed, 10, t);
    Rng rng(seed);
    DecomposedCov da, db;
    do da = testing::random_decomposed(rng, 0.2, 1.5); while (!separated(da.scale()));
    do db = testing::random_decomposed(rng, 0.2, 1.5); while (!separated(db.scale()));
    const Vec3 mu_a = testing::random_vec(rng);
    const Gaussian3 b{testing::random_vec(rng), compose_covariance(db)};
    const Mat3 ra = da.rotation_matrix();

    auto value = [&](const Eigen::Matrix<double, 9, 1>& p) {
      const Vec3 w = p.segment<3>(6);
      const Mat3 rot = (w.norm() > 0.0 ? Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix()
                                       : Mat3::Identity()) * ra;
      const DecomposedCov d = DecomposedCov::make(Eigen::Quaterniond(rot), da.scale() + p.segment<3>(3));
      return w2_squared({mu_a + p.segment<3>(0), compose_covariance(d)}, b);
    };

    const SpdMat3 sa = compose_covariance(da);
    const Mat3 g = solve_sylvester(sa, log_for_check(sa, b.cov, o).value).matrix();
    Eigen::Matrix<double, 9, 1> analytic;
    analytic.segment<3>(0) = 2.0 * (mu_a - b.mean);
    for (int j = 0; j < 3; ++j) {
      Vec3 ds = Vec3::Zero();
      ds[j] = 2.0 * da.scale()[j];
      const Mat3 h_scale = ra * ds.asDiagonal() * ra.transpose();
      analytic[3 + j] = -(g * h_scale).trace();
      const Mat3 e = hat(Vec3::Unit(j));
      const Mat3 h_rot = e * sa.matrix() - sa.matrix() * e;
      analytic[6 + j] = -(g * h_rot).trace();
    }
    Eigen::Matrix<double, 9, 1> numeric;
    const double h = 1e-6;
    for (int j = 0; j < 9; ++j) {
      Eigen::Matrix<double, 9, 1> p = Eigen::Matrix<double, 9, 1>::Zero();
      p[j] = h;
      numeric[j] = (value(p) - value(-p)) / (2.0 * h);
    }
    grad.add((numeric - analytic).cwiseAbs().maxCoeff() / std::max(analytic.norm(), 1e-12), seed);
  }
  return {grad.result("max component error relative to |gradient|; mean, scale and rotation parameters")};
}

SelftestReport run_selftest(const SelftestOptions& o) {
  const auto start = Clock::now();
  SelftestReport report;
  report.profile = o.profile;
  using Check = std::vector<PropertyResult> (*)(const SelftestOptions&);
  std::vector<Check> checks = {check_metric_axioms, check_decomposition_consistency,
                               check_exp_log_round_trip, check_metric_geometry, check_sylvester};
  if (o.run_simulation) checks.push_back(check_filter_simulation);
  checks.push_back(check_gating);
  checks.push_back(check_loss_arithmetic);
  checks.push_back(check_gradient);
  for (Check c : checks) {
    for (PropertyResult& p : c(o)) report.properties.push_back(std::move(p));
  }
  report.seconds = seconds_since(start);
  return report;
}

}  // namespace bures

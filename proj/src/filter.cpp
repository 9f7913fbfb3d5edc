#include "bures/filter.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <string>

#include "bures/errors.hpp"
#include "bures/parallel.hpp"

namespace bures {

std::string_view to_string(TrackStatus s) {
  switch (s) {
    case TrackStatus::warmup: return "warmup";
    case TrackStatus::engaged: return "engaged";
    case TrackStatus::reverted: return "reverted";
  }
  return "unknown";
}

std::string_view to_string(GateDecision d) {
  switch (d) {
    case GateDecision::engage: return "engage";
    case GateDecision::hold: return "hold";
    case GateDecision::revert: return "revert";
  }
  return "unknown";
}

void FilterConfig::validate() const {
  if (!(std::isfinite(engage_threshold) && std::isfinite(revert_threshold))) {
    throw InvalidInput("filter thresholds must be finite");
  }
  if (!(engage_threshold > 0.0 && engage_threshold < revert_threshold)) {
    throw InvalidInput("filter thresholds must satisfy 0 < engage_threshold < revert_threshold");
  }
  if (!(epsilon_pd > 0.0)) throw InvalidInput("epsilon_pd must be positive");
}

Mat3 kalman_gain(const SpdMat3& sigma_ob, const SpdMat3& sigma_p) {
  const Mat3 total = sigma_ob.matrix() + sigma_p.matrix();
  // K^T = total^-1 sigma_ob since both factors are symmetric.
  return total.ldlt().solve(sigma_ob.matrix()).transpose();
}

Gaussian3 merge(const Gaussian3& obs, const Gaussian3& pred, double floor) {
  const Mat3 k = kalman_gain(obs.cov, pred.cov);
  const Vec3 mean = obs.mean + k * (pred.mean - obs.mean);
  const Mat3 cov = obs.cov.matrix() + k * (pred.cov.matrix() - obs.cov.matrix());
  return project_to_valid(mean, cov, floor);
}

GateResult gate(const Gaussian3& pred, const Gaussian3& obs, const FilterConfig& cfg) {
  GateResult r;
  r.distance = (pred.mean - obs.mean).norm();
  r.sigma_scale = sigma_scale(obs.cov);
  if (r.distance < cfg.engage_threshold * r.sigma_scale) {
    r.decision = GateDecision::engage;
  } else if (r.distance > cfg.revert_threshold * r.sigma_scale) {
    r.decision = GateDecision::revert;
  } else {
    r.decision = GateDecision::hold;
  }
  return r;
}

namespace {

void push_history(TrackState& t, const Gaussian3& g) {
  if (t.prev) {
    t.prev2 = std::move(t.prev);
    t.prev = g;
    t.velocity = velocity(*t.prev2, *t.prev);
  } else {
    t.prev = g;
  }
}

void restart_history(TrackState& t, const Gaussian3& g) {
  t.prev = g;
  t.prev2.reset();
  t.velocity.reset();
}

}  // namespace

StepResult step(const TrackState& track, const Gaussian3& obs, const FilterConfig& cfg) {
  StepResult r{track, obs, {}};
  TrackState& t = r.state;

  if (!t.prev2) {
    // Not enough history to predict: pass the observation through.
    push_history(t, obs);
    return r;
  }

  const PredictResult p = predict(*t.prev, *t.velocity, cfg.epsilon_pd);
  const GateResult g = gate(p.gaussian, obs, cfg);
  // A prediction that left the manifold is never trusted: it forces hold.
  const GateDecision decision = p.left_manifold ? GateDecision::hold : g.decision;
  r.event.decision = decision;
  r.event.gate_distance = g.distance;
  r.event.sigma_scale = g.sigma_scale;
  r.event.left_manifold = p.left_manifold;

  auto pass_through = [&] { push_history(t, obs); };
  auto merge_in = [&] {
    r.output = merge(obs, p.gaussian, cfg.epsilon_pd);
    r.event.merged = true;
    push_history(t, r.output);
  };

  switch (track.status) {
    case TrackStatus::warmup:
      if (decision == GateDecision::revert) {
        ++t.consecutive_divergence_count;
        restart_history(t, obs);
      } else if (decision == GateDecision::engage) {
        t.status = TrackStatus::engaged;
        t.consecutive_divergence_count = 0;
        merge_in();
      } else {
        t.consecutive_divergence_count = 0;
        pass_through();
      }
      break;
    case TrackStatus::engaged:
      if (decision == GateDecision::revert) {
        t.status = TrackStatus::reverted;
        ++t.consecutive_divergence_count;
        restart_history(t, obs);
      } else if (p.left_manifold) {
        pass_through();
      } else {
        t.consecutive_divergence_count = 0;
        merge_in();
      }
      break;
    case TrackStatus::reverted:
      if (decision == GateDecision::revert) {
        ++t.consecutive_divergence_count;
      } else {
        t.status = TrackStatus::warmup;
        t.consecutive_divergence_count = 0;
      }
      restart_history(t, obs);
      break;
  }
  return r;
}

TrackOutput track_sequence(const std::vector<std::vector<Gaussian3>>& observations,
                           const FilterConfig& cfg, unsigned threads) {
  cfg.validate();
  TrackOutput out;
  if (observations.empty()) return out;

  const std::size_t n = observations.front().size();
  for (std::size_t f = 1; f < observations.size(); ++f) {
    if (observations[f].size() != n) {
      throw CorrespondenceError("frame " + std::to_string(f) + " has " +
                                    std::to_string(observations[f].size()) +
                                    " gaussians, expected " + std::to_string(n),
                                f);
    }
  }

  const std::size_t frames = observations.size();
  out.frames.assign(frames, std::vector<Gaussian3>(n));
  out.log.resize(frames * n);

  parallel_for(n, threads, [&](std::size_t i) {
    TrackState state;
    for (std::size_t f = 0; f < frames; ++f) {
      StepResult r = step(state, observations[f][i], cfg);
      out.frames[f][i] = std::move(r.output);
      StatusRecord& rec = out.log[f * n + i];
      rec.frame = f;
      rec.index = i;
      rec.status = r.state.status;
      if (r.event.decision) {
        rec.gate_distance = r.event.gate_distance;
        rec.sigma_scale = r.event.sigma_scale;
      }
      state = std::move(r.state);
    }
  });
  return out;
}

}  // namespace bures

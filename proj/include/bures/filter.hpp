#pragma once

// State consistency filter: constant-velocity prediction on the Gaussian
// manifold, gated Kalman-style merge with the observation, and the
// per-Gaussian tracking loop over a fixed-index sequence.

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "bures/geometry.hpp"

namespace bures {

enum class TrackStatus { warmup, engaged, reverted };
enum class GateDecision { engage, hold, revert };

std::string_view to_string(TrackStatus s);
std::string_view to_string(GateDecision d);

struct FilterConfig {
  double engage_threshold = 0.1;  // merge when |mu_pred - mu_obs| < this * sigma
  double revert_threshold = 3.0;  // revert when |mu_pred - mu_obs| > this * sigma
  double epsilon_pd = kEpsPd;

  /// Throws InvalidInput unless 0 < engage < revert and epsilon_pd > 0.
  void validate() const;
};

/// Filter memory for one Gaussian. `velocity` is present exactly when
/// `prev2` is, and is always velocity(*prev2, *prev).
struct TrackState {
  std::optional<Gaussian3> prev;
  std::optional<Gaussian3> prev2;
  std::optional<GaussianVelocity> velocity;
  TrackStatus status = TrackStatus::warmup;
  int consecutive_divergence_count = 0;
};

struct GateResult {
  GateDecision decision = GateDecision::engage;
  double distance = 0.0;     // |mu_pred - mu_obs|
  double sigma_scale = 0.0;  // geometric-mean std of the observation
};

/// What happened to one track on one frame.
struct StepEvent {
  std::optional<GateDecision> decision;  // empty when no prediction was gated
  double gate_distance = 0.0;
  double sigma_scale = 0.0;
  bool merged = false;
  bool left_manifold = false;
};

struct StepResult {
  TrackState state;
  Gaussian3 output;
  StepEvent event;
};

/// One row of the per-track status log.
struct StatusRecord {
  std::size_t frame = 0;
  std::size_t index = 0;
  TrackStatus status = TrackStatus::warmup;
  std::optional<double> gate_distance;
  std::optional<double> sigma_scale;
};

struct TrackOutput {
  std::vector<std::vector<Gaussian3>> frames;
  std::vector<StatusRecord> log;  // ordered by (frame, index)
};

/// K = S_ob (S_ob + S_p)^-1.
Mat3 kalman_gain(const SpdMat3& sigma_ob, const SpdMat3& sigma_p);

/// mu = mu_ob + K (mu_p - mu_ob); S = project(S_ob + K (S_p - S_ob)).
Gaussian3 merge(const Gaussian3& obs, const Gaussian3& pred, double floor = kEpsPd);

GateResult gate(const Gaussian3& pred, const Gaussian3& obs, const FilterConfig& cfg);

/// Advances one track by one observation. With fewer than two stored states
/// the observation passes through. Otherwise the constant-velocity prediction
/// is gated against the observation:
///
///  warmup   engage -> merge, become engaged
///           hold   -> pass through
///           revert -> pass through, history restarts at obs
///  engaged  engage or hold -> merge (engagement is kept inside the band)
///           revert -> pass through, become reverted, history restarts at obs
///  reverted never merges; anything but revert re-enters warmup. History
///           restarts at obs either way.
///
/// A prediction flagged as having left the manifold is gated as hold and is
/// never merged.
///
/// History always advances with the emitted output, and the velocity is
/// recomputed from the last two stored states.
StepResult step(const TrackState& track, const Gaussian3& obs, const FilterConfig& cfg);

/// Runs one track per index over all frames. Every frame must hold the same
/// number of Gaussians (CorrespondenceError otherwise). Tracks are
/// independent and may run on `threads` workers; the result is identical to a
/// sequential run.
TrackOutput track_sequence(const std::vector<std::vector<Gaussian3>>& observations,
                           const FilterConfig& cfg, unsigned threads = 1);

}  // namespace bures

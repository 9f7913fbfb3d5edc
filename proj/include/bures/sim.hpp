#pragma once

// Synthetic dynamic scenes standing in for a learned deformation field:
// ground-truth Gaussian trajectories, parametric observation noise, and the
// evaluation rig comparing raw observations with filtered estimates.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bures/filter.hpp"
#include "bures/losses.hpp"

namespace bures {

enum class Motion { constant_velocity, circular, scale_oscillation, composite };
enum class Mode { obs_only, filtered };

std::string_view to_string(Motion m);
std::string_view to_string(Mode m);
Motion motion_from_string(std::string_view s);

struct NoiseModel {
  double mean_noise_std = 0.0;     // per-axis, in units of sigma_scale
  double rot_noise_std = 0.0;      // radians, per axis of a random axis-angle
  double scale_noise_std = 0.0;    // std of log(scale)
  double outlier_rate = 0.0;       // in [0, 1]
  double outlier_magnitude = 0.0;  // offset length in units of sigma_scale

  void validate() const;
  bool is_zero() const;
};

/// Camera looking down +z of its own frame (x right, y down).
struct PinholeCamera {
  Vec3 position = Vec3(0.0, 0.0, -6.0);
  Mat3 world_to_camera = Mat3::Identity();  // rows: right, down, forward
  double focal = 600.0;                      // pixels
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;

  static PinholeCamera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal,
                               int width, int height);
  void validate() const;
  Vec3 to_camera(const Vec3& world) const {
    return world_to_camera * (world - position);
  }
};

struct MotionParams {
  Vec3 velocity = Vec3::Zero();  // scene length per frame
  double angular_rate = 0.0;     // rad per frame, about the z axis through `center`
  Vec3 center = Vec3::Zero();
  double scale_amplitude = 0.0;  // relative, in [0, 1)
  double scale_rate = 0.0;       // rad per frame
};

struct ScenarioConfig {
  std::string name = "custom";
  std::size_t n_gaussians = 64;
  std::size_t n_frames = 60;
  Motion motion = Motion::composite;
  MotionParams params;
  double extent = 1.0;  // initial means uniform in [-extent, extent]^3
  double scale_min = 0.05;
  double scale_max = 0.15;
  NoiseModel noise;
  PinholeCamera camera;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Named scenarios: "default", "zero_noise", "constant_velocity".
ScenarioConfig preset(std::string_view name);
std::vector<std::string> preset_names();

struct FlowVector {
  double u = 0.0;
  double v = 0.0;
  bool valid = false;
};

/// flow[k][i] is the displacement of Gaussian i from frame k to frame k+1.
using FlowField = std::vector<std::vector<FlowVector>>;

struct MetricsReport {
  double mean_rmse = 0.0;           // sqrt(mean |mu_est - mu_gt|^2)
  double w2_rmse = 0.0;             // sqrt(mean W2^2(est, gt))
  double temporal_roughness = 0.0;  // mean W2(est_t, est_{t-1})
  double aepe_2d = 0.0;             // pixels
  double wr_loss = 0.0;             // raw consecutive W2^2 sum of the estimates
  std::vector<double> per_frame_mean_rmse;
  std::vector<double> per_frame_w2_rmse;
  std::vector<double> per_frame_roughness;  // size n_frames - 1
  std::vector<double> per_frame_aepe;       // size n_frames - 1; NaN if no valid point
};

struct ExperimentResult {
  Sequence truth;
  Sequence observations;
  Sequence estimates;
  std::vector<StatusRecord> status_log;  // filtered mode only
  FlowField estimated_flow;
  FlowField true_flow;
  MetricsReport metrics;
};

Sequence generate_scene(const ScenarioConfig& cfg);

struct Perturbed {
  Sequence frames;
  std::vector<std::vector<bool>> outlier;  // [frame][index]
};

/// Applies `noise` independently to every (frame, index). Deterministic in
/// `seed`; zero noise returns the scene unchanged.
Perturbed perturb_with_mask(const Sequence& scene, const NoiseModel& noise, std::uint64_t seed);
Sequence perturb(const Sequence& scene, const NoiseModel& noise, std::uint64_t seed);

/// Seed of the observation noise stream for a scenario seed.
std::uint64_t observation_seed(std::uint64_t scenario_seed);

/// Pinhole displacement between consecutive frames; points with nonpositive
/// depth at either end are marked invalid.
FlowField project_flow(const PinholeCamera& camera, const Sequence& scene);

/// Mean endpoint error over points valid in both fields. Throws InvalidInput
/// on a shape mismatch and UndefinedMetric when nothing is valid.
double aepe(const FlowField& est, const FlowField& gt);

MetricsReport evaluate(const PinholeCamera& camera, const Sequence& truth, const Sequence& estimates);

ExperimentResult run_experiment(const ScenarioConfig& cfg, const FilterConfig& filter_cfg, Mode mode,
                                unsigned threads = 1);

}  // namespace bures

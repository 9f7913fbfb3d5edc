#include "bures/sim.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "bures/errors.hpp"
#include "bures/metric.hpp"
#include "bures/summation.hpp"

namespace bures {

std::string_view to_string(Motion m) {
  switch (m) {
    case Motion::constant_velocity: return "constant_velocity";
    case Motion::circular: return "circular";
    case Motion::scale_oscillation: return "scale_oscillation";
    case Motion::composite: return "composite";
  }
  return "unknown";
}

std::string_view to_string(Mode m) { return m == Mode::obs_only ? "obs" : "filtered"; }

Motion motion_from_string(std::string_view s) {
  for (Motion m : {Motion::constant_velocity, Motion::circular, Motion::scale_oscillation,
                   Motion::composite}) {
    if (to_string(m) == s) return m;
  }
  throw InvalidInput("unknown motion '" + std::string(s) + "'");
}

void NoiseModel::validate() const {
  for (double v : {mean_noise_std, rot_noise_std, scale_noise_std, outlier_rate, outlier_magnitude}) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidInput("noise parameters must be finite and >= 0");
  }
  if (outlier_rate > 1.0) throw InvalidInput("outlier_rate must lie in [0, 1]");
}

bool NoiseModel::is_zero() const {
  return mean_noise_std == 0.0 && rot_noise_std == 0.0 && scale_noise_std == 0.0 &&
         (outlier_rate == 0.0 || outlier_magnitude == 0.0);
}

PinholeCamera PinholeCamera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up,
                                     double focal, int width, int height) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 right = (-up).cross(forward).normalized();
  const Vec3 down = forward.cross(right);
  PinholeCamera c;
  c.position = eye;
  c.world_to_camera.row(0) = right.transpose();
  c.world_to_camera.row(1) = down.transpose();
  c.world_to_camera.row(2) = forward.transpose();
  c.focal = focal;
  c.width = width;
  c.height = height;
  c.cx = 0.5 * width;
  c.cy = 0.5 * height;
  c.validate();
  return c;
}

void PinholeCamera::validate() const {
  if (!(focal > 0.0) || !std::isfinite(focal)) throw InvalidInput("camera focal length must be > 0");
  if (width <= 0 || height <= 0) throw InvalidInput("camera resolution must be positive");
  if (!position.allFinite() || !world_to_camera.allFinite()) {
    throw InvalidInput("camera pose must be finite");
  }
}

void ScenarioConfig::validate() const {
  if (n_gaussians == 0) throw InvalidInput("n_gaussians must be positive");
  if (n_frames < 3) throw InvalidInput("n_frames must be at least 3");
  if (!(params.scale_amplitude >= 0.0 && params.scale_amplitude < 1.0)) {
    throw InvalidInput("scale_amplitude must lie in [0, 1)");
  }
  if (!params.velocity.allFinite() || !params.center.allFinite() ||
      !std::isfinite(params.angular_rate) || !std::isfinite(params.scale_rate)) {
    throw InvalidInput("motion parameters must be finite");
  }
  if (!(extent >= 0.0) || !std::isfinite(extent)) throw InvalidInput("extent must be >= 0");
  if (!(scale_min > 0.0 && scale_min <= scale_max) || !std::isfinite(scale_max)) {
    throw InvalidInput("scales must satisfy 0 < scale_min <= scale_max");
  }
  noise.validate();
  camera.validate();
}

ScenarioConfig preset(std::string_view name) {
  ScenarioConfig c;
  c.name = std::string(name);
  c.n_gaussians = 64;
  c.n_frames = 60;
  c.motion = Motion::composite;
  c.params.velocity = Vec3(0.01, 0.005, 0.0);
  c.params.angular_rate = 0.01;
  c.params.scale_amplitude = 0.2;
  c.params.scale_rate = 0.1;
  c.camera = PinholeCamera::look_at(Vec3(0.0, 0.0, -6.0), Vec3::Zero(), Vec3::UnitY(), 600.0, 640, 480);
  c.noise = {0.05, 0.02, 0.02, 0.01, 10.0};
  if (name == "default") return c;
  if (name == "zero_noise") {
    // Motion the constant-velocity filter predicts exactly, so both modes
    // sit at the numerical floor.
    c.motion = Motion::constant_velocity;
    c.noise = {};
    return c;
  }
  if (name == "constant_velocity") {
    c.motion = Motion::constant_velocity;
    c.noise = {0.05, 0.0, 0.0, 0.0, 0.0};
    return c;
  }
  throw InvalidInput("unknown preset '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() { return {"default", "zero_noise", "constant_velocity"}; }

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double uniform01(std::mt19937_64& rng) {
  return std::generate_canonical<double, std::numeric_limits<double>::digits>(rng);
}

Vec3 normal3(std::mt19937_64& rng, std::normal_distribution<double>& n) {
  const double a = n(rng);
  const double b = n(rng);
  const double c = n(rng);
  return {a, b, c};
}

struct Seed {
  Vec3 mean;
  Eigen::Quaterniond rotation;
  Vec3 scale;
  double phase;
};

}  // namespace

std::uint64_t observation_seed(std::uint64_t scenario_seed) {
  return splitmix64(scenario_seed ^ 0xD1B54A32D192ED03ULL);
}

Sequence generate_scene(const ScenarioConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Seed> seeds(cfg.n_gaussians);
  for (auto& s : seeds) {
    for (int k = 0; k < 3; ++k) s.mean[k] = cfg.extent * (2.0 * uniform01(rng) - 1.0);
    Eigen::Vector4d q;
    do {
      for (int k = 0; k < 4; ++k) q[k] = normal(rng);
    } while (q.norm() < 1e-6);
    s.rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized();
    for (int k = 0; k < 3; ++k) {
      s.scale[k] = cfg.scale_min + (cfg.scale_max - cfg.scale_min) * uniform01(rng);
    }
    s.phase = 2.0 * std::numbers::pi * uniform01(rng);
  }

  const bool translate = cfg.motion == Motion::constant_velocity || cfg.motion == Motion::composite;
  const bool rotate = cfg.motion == Motion::circular || cfg.motion == Motion::composite;
  const bool oscillate = cfg.motion == Motion::scale_oscillation || cfg.motion == Motion::composite;
  const MotionParams& p = cfg.params;

  Sequence scene(cfg.n_frames, std::vector<Gaussian3>(cfg.n_gaussians));
  for (std::size_t t = 0; t < cfg.n_frames; ++t) {
    const double time = static_cast<double>(t);
    const double angle = rotate ? p.angular_rate * time : 0.0;
    const Eigen::AngleAxisd spin(angle, Vec3::UnitZ());
    for (std::size_t i = 0; i < cfg.n_gaussians; ++i) {
      const Seed& s = seeds[i];
      Vec3 mean = s.mean;
      Eigen::Quaterniond rot = s.rotation;
      if (angle != 0.0) {
        mean = p.center + spin * (s.mean - p.center);
        rot = Eigen::Quaterniond(spin) * s.rotation;
      }
      if (translate) mean += time * p.velocity;
      Vec3 scale = s.scale;
      if (oscillate) scale *= 1.0 + p.scale_amplitude * std::sin(p.scale_rate * time + s.phase);
      scene[t][i] = make_gaussian(mean, DecomposedCov::make(rot, scale));
    }
  }
  return scene;
}

Perturbed perturb_with_mask(const Sequence& scene, const NoiseModel& noise, std::uint64_t seed) {
  noise.validate();
  check_equal_counts(scene);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const bool perturb_shape = noise.rot_noise_std > 0.0 || noise.scale_noise_std > 0.0;

  Perturbed out{scene, {}};
  out.outlier.assign(scene.size(), std::vector<bool>(scene.empty() ? 0 : scene.front().size()));
  for (std::size_t f = 0; f < scene.size(); ++f) {
    for (std::size_t i = 0; i < scene[f].size(); ++i) {
      // Fixed draw count per element keeps streams aligned across settings.
      const Vec3 mean_draw = normal3(rng, normal);
      const Vec3 rot_draw = normal3(rng, normal);
      const Vec3 scale_draw = normal3(rng, normal);
      const double outlier_draw = uniform01(rng);
      Vec3 dir = normal3(rng, normal);
      if (dir.norm() < 1e-12) dir = Vec3::UnitX();

      const Gaussian3& g = scene[f][i];
      Gaussian3& o = out.frames[f][i];
      const double sigma = sigma_scale(g.cov);
      if (outlier_draw < noise.outlier_rate) {
        o.mean = g.mean + (noise.outlier_magnitude * sigma) * dir.normalized();
        out.outlier[f][i] = true;
      } else {
        o.mean = g.mean + (noise.mean_noise_std * sigma) * mean_draw;
      }
      if (perturb_shape) {
        const DecomposedCov d = decompose_covariance(g.cov);
        const Vec3 omega = noise.rot_noise_std * rot_draw;
        const double angle = omega.norm();
        const Eigen::Quaterniond kick =
            angle > 0.0 ? Eigen::Quaterniond(Eigen::AngleAxisd(angle, omega / angle))
                        : Eigen::Quaterniond::Identity();
        const Vec3 scale = d.scale().cwiseProduct((noise.scale_noise_std * scale_draw).array().exp().matrix());
        o.cov = compose_covariance(DecomposedCov::make(kick * d.rotation(), scale));
      }
    }
  }
  return out;
}

Sequence perturb(const Sequence& scene, const NoiseModel& noise, std::uint64_t seed) {
  return perturb_with_mask(scene, noise, seed).frames;
}

FlowField project_flow(const PinholeCamera& camera, const Sequence& scene) {
  check_equal_counts(scene);
  FlowField flow;
  if (scene.size() < 2) return flow;
  flow.resize(scene.size() - 1);
  auto pixel = [&](const Vec3& c) {
    return Eigen::Vector2d(camera.focal * c.x() / c.z() + camera.cx,
                           camera.focal * c.y() / c.z() + camera.cy);
  };
  for (std::size_t k = 0; k + 1 < scene.size(); ++k) {
    flow[k].resize(scene[k].size());
    for (std::size_t i = 0; i < scene[k].size(); ++i) {
      const Vec3 a = camera.to_camera(scene[k][i].mean);
      const Vec3 b = camera.to_camera(scene[k + 1][i].mean);
      FlowVector& fv = flow[k][i];
      fv.valid = a.z() > 0.0 && b.z() > 0.0;
      if (fv.valid) {
        const Eigen::Vector2d d = pixel(b) - pixel(a);
        fv.u = d.x();
        fv.v = d.y();
      }
    }
  }
  return flow;
}

double aepe(const FlowField& est, const FlowField& gt) {
  if (est.size() != gt.size()) throw InvalidInput("flow fields have different frame counts");
  CompensatedSum sum;
  std::size_t count = 0;
  for (std::size_t k = 0; k < est.size(); ++k) {
    if (est[k].size() != gt[k].size()) {
      throw InvalidInput("flow fields differ in point count at frame " + std::to_string(k));
    }
    for (std::size_t i = 0; i < est[k].size(); ++i) {
      const FlowVector& a = est[k][i];
      const FlowVector& b = gt[k][i];
      if (!(a.valid && b.valid)) continue;
      sum += std::hypot(a.u - b.u, a.v - b.v);
      ++count;
    }
  }
  if (count == 0) throw UndefinedMetric("no valid flow vectors to compare");
  return sum.value() / static_cast<double>(count);
}

MetricsReport evaluate(const PinholeCamera& camera, const Sequence& truth, const Sequence& estimates) {
  if (truth.size() != estimates.size()) throw InvalidInput("truth and estimates differ in frame count");
  check_equal_counts(truth);
  check_equal_counts(estimates);
  if (!truth.empty() && truth.front().size() != estimates.front().size()) {
    throw InvalidInput("truth and estimates differ in gaussian count");
  }
  MetricsReport m;
  const std::size_t frames = truth.size();
  if (frames == 0) return m;
  const std::size_t n = truth.front().size();

  CompensatedSum mean_sq, w2_sq, rough;
  for (std::size_t t = 0; t < frames; ++t) {
    CompensatedSum f_mean, f_w2;
    for (std::size_t i = 0; i < n; ++i) {
      const W2Parts parts = w2_parts(estimates[t][i], truth[t][i]);
      f_mean += parts.mean_sq;
      f_w2 += std::max(0.0, parts.w2_sq());
    }
    mean_sq += f_mean.value();
    w2_sq += f_w2.value();
    m.per_frame_mean_rmse.push_back(std::sqrt(f_mean.value() / static_cast<double>(n)));
    m.per_frame_w2_rmse.push_back(std::sqrt(f_w2.value() / static_cast<double>(n)));
    if (t > 0) {
      CompensatedSum f_rough;
      for (std::size_t i = 0; i < n; ++i) f_rough += w2_distance(estimates[t][i], estimates[t - 1][i]);
      rough += f_rough.value();
      m.per_frame_roughness.push_back(f_rough.value() / static_cast<double>(n));
    }
  }
  const double samples = static_cast<double>(frames * n);
  m.mean_rmse = std::sqrt(mean_sq.value() / samples);
  m.w2_rmse = std::sqrt(w2_sq.value() / samples);
  m.temporal_roughness = frames > 1 ? rough.value() / static_cast<double>((frames - 1) * n) : 0.0;
  m.wr_loss = wr_loss(estimates);

  if (frames > 1) {
    const FlowField est_flow = project_flow(camera, estimates);
    const FlowField gt_flow = project_flow(camera, truth);
    for (std::size_t k = 0; k < est_flow.size(); ++k) {
      try {
        m.per_frame_aepe.push_back(aepe({est_flow[k]}, {gt_flow[k]}));
      } catch (const UndefinedMetric&) {
        m.per_frame_aepe.push_back(std::numeric_limits<double>::quiet_NaN());
      }
    }
    m.aepe_2d = aepe(est_flow, gt_flow);
  }
  return m;
}

ExperimentResult run_experiment(const ScenarioConfig& cfg, const FilterConfig& filter_cfg, Mode mode,
                                unsigned threads) {
  cfg.validate();
  filter_cfg.validate();
  ExperimentResult r;
  r.truth = generate_scene(cfg);
  r.observations = perturb(r.truth, cfg.noise, observation_seed(cfg.seed));
  if (mode == Mode::filtered) {
    TrackOutput tracked = track_sequence(r.observations, filter_cfg, threads);
    r.estimates = std::move(tracked.frames);
    r.status_log = std::move(tracked.log);
  } else {
    r.estimates = r.observations;
  }
  r.estimated_flow = project_flow(cfg.camera, r.estimates);
  r.true_flow = project_flow(cfg.camera, r.truth);
  r.metrics = evaluate(cfg.camera, r.truth, r.estimates);
  return r;
}

}  // namespace bures

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bures/errors.hpp"
#include "bures/filter.hpp"
#include "bures/geometry.hpp"
#include "bures/io.hpp"
#include "bures/losses.hpp"
#include "bures/metric.hpp"
#include "bures/selftest.hpp"
#include "bures/sim.hpp"

namespace py = pybind11;
using namespace bures;

namespace {

using Quat = Eigen::Vector4d;  // w, x, y, z

SymMat3 sym(const Mat3& m) { return SymMat3::from_symmetric(m); }
SpdMat3 spd(const Mat3& m) { return SpdMat3::from(sym(m)); }
Gaussian3 gaussian(const Vec3& mean, const Mat3& cov) {
  if (!mean.allFinite()) throw InvalidInput("mean must be finite");
  return {mean, spd(cov)};
}

py::dict metrics_dict(const MetricsReport& m) {
  py::dict d;
  d["mean_rmse"] = m.mean_rmse;
  d["w2_rmse"] = m.w2_rmse;
  d["temporal_roughness"] = m.temporal_roughness;
  d["aepe_2d"] = m.aepe_2d;
  d["wr_loss"] = m.wr_loss;
  d["per_frame_aepe"] = m.per_frame_aepe;
  d["per_frame_roughness"] = m.per_frame_roughness;
  return d;
}

// Sequences cross the boundary as nested lists of (mean, cov) pairs.
using PySequence = std::vector<std::vector<std::pair<Vec3, Mat3>>>;

Sequence to_sequence(const PySequence& in) {
  Sequence out(in.size());
  for (std::size_t f = 0; f < in.size(); ++f) {
    for (const auto& [m, c] : in[f]) out[f].push_back(gaussian(m, c));
  }
  return out;
}

PySequence from_sequence(const Sequence& in) {
  PySequence out(in.size());
  for (std::size_t f = 0; f < in.size(); ++f) {
    for (const Gaussian3& g : in[f]) out[f].emplace_back(g.mean, g.cov.matrix());
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bures-Wasserstein geometry of 3D Gaussians and the state-consistency filter";
  py::register_exception<CorrespondenceError>(m, "CorrespondenceError", PyExc_ValueError);
  py::register_exception<UndefinedMetric>(m, "UndefinedMetric", PyExc_ArithmeticError);

  m.attr("EPS_PD") = kEpsPd;

  m.def("w2_squared", [](const Vec3& ma, const Mat3& ca, const Vec3& mb, const Mat3& cb) {
    return w2_squared(gaussian(ma, ca), gaussian(mb, cb));
  }, py::arg("mean_a"), py::arg("cov_a"), py::arg("mean_b"), py::arg("cov_b"));
  m.def("w2_distance", [](const Vec3& ma, const Mat3& ca, const Vec3& mb, const Mat3& cb) {
    return w2_distance(gaussian(ma, ca), gaussian(mb, cb));
  }, py::arg("mean_a"), py::arg("cov_a"), py::arg("mean_b"), py::arg("cov_b"));
  m.def("w2_parts", [](const Vec3& ma, const Mat3& ca, const Vec3& mb, const Mat3& cb) {
    const W2Parts p = w2_parts(gaussian(ma, ca), gaussian(mb, cb));
    return py::make_tuple(p.mean_sq, p.trace_term);
  }, "(mean_sq, trace_term)", py::arg("mean_a"), py::arg("cov_a"), py::arg("mean_b"), py::arg("cov_b"));
  m.def("w2_trace_term_decomposed", [](const Quat& qa, const Vec3& sa, const Quat& qb, const Vec3& sb) {
    auto d = [](const Quat& q, const Vec3& s) {
      return DecomposedCov::make(Eigen::Quaterniond(q[0], q[1], q[2], q[3]), s);
    };
    return w2_trace_term_decomposed(d(qa, sa), d(qb, sb));
  }, py::arg("rot_a"), py::arg("scale_a"), py::arg("rot_b"), py::arg("scale_b"));

  m.def("sqrt_spd", [](const Mat3& a) { return sqrt_spd(spd(a)).matrix(); });
  m.def("solve_sylvester", [](const Mat3& sigma, const Mat3& delta) {
    return solve_sylvester(spd(sigma), sym(delta)).matrix();
  }, py::arg("sigma"), py::arg("delta"));
  m.def("compose_covariance", [](const Quat& q, const Vec3& s) {
    return compose_covariance(DecomposedCov::make(Eigen::Quaterniond(q[0], q[1], q[2], q[3]), s)).matrix();
  }, py::arg("rot"), py::arg("scale"));
  m.def("decompose_covariance", [](const Mat3& c) {
    const DecomposedCov d = decompose_covariance(spd(c));
    const auto& q = d.rotation();
    return py::make_tuple(Quat(q.w(), q.x(), q.y(), q.z()), d.scale());
  }, "(rot [w,x,y,z], scale)", py::arg("cov"));

  m.def("log_map", [](const Mat3& base, const Mat3& target) {
    return log_map_cov(spd(base), spd(target)).value.matrix();
  }, py::arg("base"), py::arg("target"));
  m.def("exp_map", [](const Mat3& base, const Mat3& v) {
    const ExpResult r = exp_map_cov(spd(base), sym(v));
    return py::make_tuple(r.cov.matrix(), r.left_manifold);
  }, "(cov, left_manifold)", py::arg("base"), py::arg("v"));
  m.def("geodesic", [](const Vec3& ma, const Mat3& ca, const Vec3& mb, const Mat3& cb, double s) {
    const Gaussian3 g = geodesic(gaussian(ma, ca), gaussian(mb, cb), s);
    return py::make_tuple(g.mean, g.cov.matrix());
  }, py::arg("mean_a"), py::arg("cov_a"), py::arg("mean_b"), py::arg("cov_b"), py::arg("s"));
  m.def("tangent_norm_squared", [](const Mat3& base, const Mat3& v) {
    return tangent_norm_squared(spd(base), sym(v));
  }, py::arg("base"), py::arg("v"));

  m.def("kalman_gain", [](const Mat3& ob, const Mat3& p) { return kalman_gain(spd(ob), spd(p)); },
        py::arg("sigma_ob"), py::arg("sigma_p"));
  m.def("merge", [](const Vec3& mo, const Mat3& co, const Vec3& mp, const Mat3& cp) {
    const Gaussian3 g = merge(gaussian(mo, co), gaussian(mp, cp));
    return py::make_tuple(g.mean, g.cov.matrix());
  }, py::arg("obs_mean"), py::arg("obs_cov"), py::arg("pred_mean"), py::arg("pred_cov"));
  m.def("track_sequence", [](const PySequence& obs, double engage, double revert) {
    FilterConfig cfg;
    cfg.engage_threshold = engage;
    cfg.revert_threshold = revert;
    TrackOutput out;
    {
      const Sequence seq = to_sequence(obs);
      py::gil_scoped_release release;
      out = track_sequence(seq, cfg);
    }
    std::vector<std::string> status;
    for (const auto& r : out.log) status.emplace_back(to_string(r.status));
    return py::make_tuple(from_sequence(out.frames), status);
  }, "Filtered frames and the per-(frame, index) status log, frame-major.",
        py::arg("observations"), py::arg("engage_threshold") = 0.1, py::arg("revert_threshold") = 3.0);

  m.def("soa_loss", [](const Vec3& ma, const Mat3& ca, const Vec3& mb, const Mat3& cb) {
    return soa_loss(gaussian(ma, ca), gaussian(mb, cb));
  });
  m.def("wr_loss", [](const PySequence& seq) { return wr_loss(to_sequence(seq)); });
  m.def("linear_wr_loss", [](const PySequence& seq) { return linear_wr_loss(to_sequence(seq)); });
  m.def("total_loss", [](double render, double soa, double wr, double lambda_soa, double lambda_wr) {
    return total_loss(render, soa, wr, {lambda_soa, lambda_wr});
  }, py::arg("render"), py::arg("soa"), py::arg("wr"), py::arg("lambda_soa") = 0.1, py::arg("lambda_wr") = 0.01);

  m.def("preset_names", &preset_names);
  m.def("run_experiment", [](const std::string& preset_name, std::uint64_t seed, const std::string& mode) {
    if (mode != "obs" && mode != "filtered") throw InvalidInput("mode must be 'obs' or 'filtered'");
    ScenarioConfig cfg = preset(preset_name);
    cfg.seed = seed;
    ExperimentResult r;
    {
      py::gil_scoped_release release;
      r = run_experiment(cfg, FilterConfig{}, mode == "obs" ? Mode::obs_only : Mode::filtered);
    }
    return metrics_dict(r.metrics);
  }, py::arg("preset") = "default", py::arg("seed") = 0, py::arg("mode") = "filtered");

  m.def("selftest", [](bool quick, bool strict, std::uint64_t seed) {
    SelftestOptions o;
    o.seed = seed;
    o.profile = strict ? ToleranceProfile::strict : ToleranceProfile::standard;
    if (quick) {
      o.trials = 100;
      o.fd_trials = 10;
      o.run_simulation = false;
    }
    std::string text;
    {
      py::gil_scoped_release release;
      text = run_selftest(o).to_json().dump();
    }
    return py::module_::import("json").attr("loads")(text);
  }, "Runs the property suite and returns the report as a dict.",
        py::arg("quick") = true, py::arg("strict") = false, py::arg("seed") = SelftestOptions{}.seed);
}

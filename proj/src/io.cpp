#include "bures/io.hpp"

#include <algorithm>
#include <charconv>
#include <initializer_list>
#include <fstream>
#include <ostream>
#include <sstream>

#include "bures/errors.hpp"

namespace bures {

using nlohmann::json;

json scene_to_json(const Sequence& seq, const json& meta) {
  json frames = json::array();
  for (const auto& frame : seq) {
    json f = json::array();
    for (const auto& g : frame) f.push_back(gaussian_to_json(g));
    frames.push_back(std::move(f));
  }
  return {{"frames", std::move(frames)}, {"meta", meta}};
}

Sequence scene_from_json(const json& j) {
  if (!j.is_object() || !j.contains("frames")) throw InvalidInput("scene is missing field 'frames'");
  const json& frames = j.at("frames");
  if (!frames.is_array()) throw InvalidInput("field 'frames' must be an array");
  Sequence seq;
  seq.reserve(frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (!frames[f].is_array()) {
      throw InvalidInput("field 'frames[" + std::to_string(f) + "]' must be an array");
    }
    std::vector<Gaussian3> frame;
    for (std::size_t i = 0; i < frames[f].size(); ++i) {
      try {
        frame.push_back(gaussian_from_json(frames[f][i]));
      } catch (const InvalidInput& e) {
        throw InvalidInput("frames[" + std::to_string(f) + "][" + std::to_string(i) + "]: " + e.what());
      }
    }
    seq.push_back(std::move(frame));
  }
  return seq;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput("cannot parse '" + path.string() + "': " + e.what());
  }
}

Sequence read_scene_file(const std::filesystem::path& path) {
  try {
    return scene_from_json(read_json_file(path));
  } catch (const InvalidInput& e) {
    const std::string msg = e.what();
    if (msg.find(path.string()) != std::string::npos) throw;
    throw InvalidInput(path.string() + ": " + msg);
  }
}

void write_scene_file(const std::filesystem::path& path, const Sequence& seq, const json& meta) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
  out << scene_to_json(seq, meta).dump() << '\n';
  if (!out) throw InvalidInput("failed writing '" + path.string() + "'");
}

namespace {

double number_field(const json& obj, const std::string& field, const std::string& where) {
  const json& v = obj.at(field);
  if (!v.is_number()) throw InvalidInput("field '" + where + field + "' must be a number");
  return v.get<double>();
}

Vec3 vec3_field(const json& obj, const std::string& field, const std::string& where) {
  const json& v = obj.at(field);
  if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() ||
      !v[2].is_number()) {
    throw InvalidInput("field '" + where + field + "' must be an array of 3 numbers");
  }
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

std::size_t count_field(const json& obj, const std::string& field) {
  const json& v = obj.at(field);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw InvalidInput("field '" + field + "' must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

void check_keys(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end()) {
      throw InvalidInput("unknown field '" + where + key + "'");
    }
  }
}

template <typename Fn>
void if_present(const json& obj, const char* field, Fn&& fn) {
  if (obj.contains(field)) fn();
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw InvalidInput("configuration must be a JSON object");
  if (!j.contains("schema")) throw InvalidInput("missing field 'schema'");
  if (!j.at("schema").is_number_integer() || j.at("schema").get<int>() != kConfigSchemaVersion) {
    throw InvalidInput("field 'schema' must be " + std::to_string(kConfigSchemaVersion));
  }
  check_keys(j,
             {"schema", "preset", "name", "n_gaussians", "n_frames", "motion", "extent", "scale_min",
              "scale_max", "seed", "motion_params", "noise", "camera", "filter"},
             "");
  RunConfig rc;
  std::string base = "default";
  if_present(j, "preset", [&] {
    if (!j.at("preset").is_string()) throw InvalidInput("field 'preset' must be a string");
    base = j.at("preset").get<std::string>();
  });
  rc.scenario = preset(base);
  ScenarioConfig& s = rc.scenario;

  if_present(j, "name", [&] {
    if (!j.at("name").is_string()) throw InvalidInput("field 'name' must be a string");
    s.name = j.at("name").get<std::string>();
    if (s.name.empty() || s.name.find_first_of(",\"\r\n") != std::string::npos) {
      throw InvalidInput("field 'name' must be nonempty and free of commas, quotes and newlines");
    }
  });
  if_present(j, "n_gaussians", [&] { s.n_gaussians = count_field(j, "n_gaussians"); });
  if_present(j, "n_frames", [&] { s.n_frames = count_field(j, "n_frames"); });
  if_present(j, "motion", [&] {
    if (!j.at("motion").is_string()) throw InvalidInput("field 'motion' must be a string");
    s.motion = motion_from_string(j.at("motion").get<std::string>());
  });
  if_present(j, "extent", [&] { s.extent = number_field(j, "extent", ""); });
  if_present(j, "scale_min", [&] { s.scale_min = number_field(j, "scale_min", ""); });
  if_present(j, "scale_max", [&] { s.scale_max = number_field(j, "scale_max", ""); });
  if_present(j, "seed", [&] {
    if (!j.at("seed").is_number_unsigned()) throw InvalidInput("field 'seed' must be a nonnegative integer");
    s.seed = j.at("seed").get<std::uint64_t>();
  });

  if_present(j, "motion_params", [&] {
    const json& m = j.at("motion_params");
    if (!m.is_object()) throw InvalidInput("field 'motion_params' must be an object");
    check_keys(m, {"velocity", "angular_rate", "center", "scale_amplitude", "scale_rate"}, "motion_params.");
    const std::string w = "motion_params.";
    if_present(m, "velocity", [&] { s.params.velocity = vec3_field(m, "velocity", w); });
    if_present(m, "angular_rate", [&] { s.params.angular_rate = number_field(m, "angular_rate", w); });
    if_present(m, "center", [&] { s.params.center = vec3_field(m, "center", w); });
    if_present(m, "scale_amplitude",
               [&] { s.params.scale_amplitude = number_field(m, "scale_amplitude", w); });
    if_present(m, "scale_rate", [&] { s.params.scale_rate = number_field(m, "scale_rate", w); });
  });
  if_present(j, "noise", [&] {
    const json& n = j.at("noise");
    if (!n.is_object()) throw InvalidInput("field 'noise' must be an object");
    check_keys(n, {"mean_noise_std", "rot_noise_std", "scale_noise_std", "outlier_rate", "outlier_magnitude"}, "noise.");
    const std::string w = "noise.";
    if_present(n, "mean_noise_std", [&] { s.noise.mean_noise_std = number_field(n, "mean_noise_std", w); });
    if_present(n, "rot_noise_std", [&] { s.noise.rot_noise_std = number_field(n, "rot_noise_std", w); });
    if_present(n, "scale_noise_std",
               [&] { s.noise.scale_noise_std = number_field(n, "scale_noise_std", w); });
    if_present(n, "outlier_rate", [&] { s.noise.outlier_rate = number_field(n, "outlier_rate", w); });
    if_present(n, "outlier_magnitude",
               [&] { s.noise.outlier_magnitude = number_field(n, "outlier_magnitude", w); });
  });
  if_present(j, "camera", [&] {
    const json& c = j.at("camera");
    if (!c.is_object()) throw InvalidInput("field 'camera' must be an object");
    check_keys(c, {"position", "look_at", "up", "focal", "width", "height"}, "camera.");
    const std::string w = "camera.";
    Vec3 eye = s.camera.position;
    Vec3 target = Vec3::Zero();
    Vec3 up = Vec3::UnitY();
    double focal = s.camera.focal;
    int width = s.camera.width;
    int height = s.camera.height;
    if_present(c, "position", [&] { eye = vec3_field(c, "position", w); });
    if_present(c, "look_at", [&] { target = vec3_field(c, "look_at", w); });
    if_present(c, "up", [&] { up = vec3_field(c, "up", w); });
    if_present(c, "focal", [&] { focal = number_field(c, "focal", w); });
    if_present(c, "width", [&] { width = static_cast<int>(number_field(c, "width", w)); });
    if_present(c, "height", [&] { height = static_cast<int>(number_field(c, "height", w)); });
    s.camera = PinholeCamera::look_at(eye, target, up, focal, width, height);
  });
  if_present(j, "filter", [&] {
    const json& f = j.at("filter");
    if (!f.is_object()) throw InvalidInput("field 'filter' must be an object");
    check_keys(f, {"engage_threshold", "revert_threshold", "epsilon_pd"}, "filter.");
    const std::string w = "filter.";
    if_present(f, "engage_threshold",
               [&] { rc.filter.engage_threshold = number_field(f, "engage_threshold", w); });
    if_present(f, "revert_threshold",
               [&] { rc.filter.revert_threshold = number_field(f, "revert_threshold", w); });
    if_present(f, "epsilon_pd", [&] { rc.filter.epsilon_pd = number_field(f, "epsilon_pd", w); });
  });
  s.validate();
  rc.filter.validate();
  return rc;
}

json run_config_to_json(const RunConfig& rc) {
  const ScenarioConfig& s = rc.scenario;
  auto arr = [](const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); };
  const Vec3 forward = s.camera.world_to_camera.row(2).transpose();
  const Vec3 down = s.camera.world_to_camera.row(1).transpose();
  return {
      {"schema", kConfigSchemaVersion},
      {"name", s.name},
      {"n_gaussians", s.n_gaussians},
      {"n_frames", s.n_frames},
      {"motion", std::string(to_string(s.motion))},
      {"extent", s.extent},
      {"scale_min", s.scale_min},
      {"scale_max", s.scale_max},
      {"seed", s.seed},
      {"motion_params",
       {{"velocity", arr(s.params.velocity)},
        {"angular_rate", s.params.angular_rate},
        {"center", arr(s.params.center)},
        {"scale_amplitude", s.params.scale_amplitude},
        {"scale_rate", s.params.scale_rate}}},
      {"noise",
       {{"mean_noise_std", s.noise.mean_noise_std},
        {"rot_noise_std", s.noise.rot_noise_std},
        {"scale_noise_std", s.noise.scale_noise_std},
        {"outlier_rate", s.noise.outlier_rate},
        {"outlier_magnitude", s.noise.outlier_magnitude}}},
      {"camera",
       {{"position", arr(s.camera.position)},
        {"look_at", arr(s.camera.position + forward)},
        {"up", arr(-down)},
        {"focal", s.camera.focal},
        {"width", s.camera.width},
        {"height", s.camera.height}}},
      {"filter",
       {{"engage_threshold", rc.filter.engage_threshold},
        {"revert_threshold", rc.filter.revert_threshold},
        {"epsilon_pd", rc.filter.epsilon_pd}}},
  };
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
  os << kMetricsHeader << '\n';
  for (const MetricsRow& r : rows) {
    os << r.scenario << ',' << to_string(r.mode) << ',' << r.seed << ','
       << format_number(r.metrics.mean_rmse) << ',' << format_number(r.metrics.w2_rmse) << ','
       << format_number(r.metrics.temporal_roughness) << ',' << format_number(r.metrics.aepe_2d)
       << '\n';
  }
}

void write_flow_csv(std::ostream& os, const FlowField& flow) {
  os << "frame,index,u,v,valid\n";
  for (std::size_t k = 0; k < flow.size(); ++k) {
    for (std::size_t i = 0; i < flow[k].size(); ++i) {
      const FlowVector& f = flow[k][i];
      os << k << ',' << i << ',' << format_number(f.u) << ',' << format_number(f.v) << ','
         << (f.valid ? 1 : 0) << '\n';
    }
  }
}

void write_status_csv(std::ostream& os, const std::vector<StatusRecord>& log) {
  os << "frame,index,status,gate_distance,sigma_scale\n";
  for (const StatusRecord& r : log) {
    os << r.frame << ',' << r.index << ',' << to_string(r.status) << ',';
    if (r.gate_distance) os << format_number(*r.gate_distance);
    os << ',';
    if (r.sigma_scale) os << format_number(*r.sigma_scale);
    os << '\n';
  }
}

}  // namespace bures

#pragma once

// File formats: scene JSON, run-configuration JSON, and the CSV outputs of
// the experiment rig (metrics, flow dumps, status logs). Numbers are written
// in shortest round-trip form, independent of locale.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bures/sim.hpp"

namespace bures {

inline constexpr int kConfigSchemaVersion = 1;

/// {"frames": [[atom, ...], ...], "meta": {...}}
nlohmann::json scene_to_json(const Sequence& seq, const nlohmann::json& meta = nlohmann::json::object());
Sequence scene_from_json(const nlohmann::json& j);

/// Throws InvalidInput naming the path when it cannot be read or parsed.
nlohmann::json read_json_file(const std::filesystem::path& path);
Sequence read_scene_file(const std::filesystem::path& path);
void write_scene_file(const std::filesystem::path& path, const Sequence& seq,
                      const nlohmann::json& meta = nlohmann::json::object());

struct RunConfig {
  ScenarioConfig scenario;
  FilterConfig filter;
};

/// Parses a configuration. An optional "preset" field selects the base
/// values; every other field overrides it. "schema" must equal
/// kConfigSchemaVersion.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& cfg);

/// Shortest decimal that round-trips to the same double.
std::string format_number(double v);

struct MetricsRow {
  std::string scenario;
  Mode mode = Mode::obs_only;
  std::uint64_t seed = 0;
  MetricsReport metrics;
};

inline constexpr const char* kMetricsHeader =
    "scenario,mode,seed,mean_rmse,w2_rmse,temporal_roughness,aepe_2d";

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows);
/// frame,index,u,v,valid; `frame` is the index of the flow's start frame.
void write_flow_csv(std::ostream& os, const FlowField& flow);
/// frame,index,status,gate_distance,sigma_scale; empty fields when no gate ran.
void write_status_csv(std::ostream& os, const std::vector<StatusRecord>& log);

}  // namespace bures

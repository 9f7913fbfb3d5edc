// bures-flow: distance queries, simulator runs and the property suite.
//
// Exit codes: 0 success, 1 property failure, 2 usage or input error.

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bures/errors.hpp"
#include "bures/io.hpp"
#include "bures/metric.hpp"
#include "bures/parallel.hpp"
#include "bures/selftest.hpp"
#include "bures/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Input problems detected after argument parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) {
    throw UsageError(what + ": expected a nonnegative integer, got '" + s + "'");
  }
  return v;
}

// "N" is a count of consecutive seeds from the scenario seed; anything with
// a comma is an explicit list ("7," selects seed 7 alone).
std::vector<std::uint64_t> parse_seeds(const std::string& text, std::uint64_t base) {
  std::vector<std::uint64_t> seeds;
  if (text.find(',') == std::string::npos) {
    const std::uint64_t n = parse_u64(text, "--seeds");
    if (n == 0) throw UsageError("--seeds: count must be positive");
    for (std::uint64_t k = 0; k < n; ++k) seeds.push_back(base + k);
    return seeds;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) seeds.push_back(parse_u64(item, "--seeds"));
  }
  if (seeds.empty()) throw UsageError("--seeds: empty seed list");
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  return seeds;
}

// ---- distance ------------------------------------------------------------

struct DistanceArgs {
  std::vector<std::string> inline_atoms;
  std::string scene;
  std::vector<std::string> at;
};

bures::Gaussian3 parse_inline(const std::string& text, const std::string& label) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw bures::InvalidInput(label + ": not valid JSON (" + e.what() + ")");
  }
  try {
    return bures::gaussian_from_json(j);
  } catch (const bures::InvalidInput& e) {
    throw bures::InvalidInput(label + ": " + e.what());
  }
}

std::pair<std::size_t, std::size_t> parse_frame_index(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw UsageError("--at: expected FRAME:INDEX, got '" + s + "'");
  return {parse_u64(s.substr(0, colon), "--at frame"), parse_u64(s.substr(colon + 1), "--at index")};
}

int cmd_distance(const DistanceArgs& a) {
  bures::Gaussian3 g[2];
  if (!a.scene.empty()) {
    if (a.at.size() != 2 || !a.inline_atoms.empty()) {
      throw UsageError("distance with --scene takes exactly two --at FRAME:INDEX selectors");
    }
    const bures::Sequence seq = bures::read_scene_file(a.scene);
    for (int k = 0; k < 2; ++k) {
      const auto [f, i] = parse_frame_index(a.at[k]);
      if (f >= seq.size() || i >= seq[f].size()) {
        throw bures::InvalidInput("frames[" + std::to_string(f) + "][" + std::to_string(i) +
                                  "]: out of range in " + a.scene);
      }
      g[k] = seq[f][i];
    }
  } else {
    if (a.inline_atoms.size() != 2) {
      throw UsageError("distance takes two inline Gaussians or --scene with two --at selectors");
    }
    g[0] = parse_inline(a.inline_atoms[0], "first gaussian");
    g[1] = parse_inline(a.inline_atoms[1], "second gaussian");
  }
  const bures::W2Parts parts = bures::w2_parts(g[0], g[1]);
  const double w2_sq = bures::w2_squared(g[0], g[1]);
  const json out = {{"w2", std::sqrt(w2_sq)}, {"w2_sq", w2_sq}, {"mean_sq", parts.mean_sq},
                    {"trace_term", parts.trace_term}};
  std::cout << out.dump() << '\n';
  return kExitOk;
}

// ---- track ---------------------------------------------------------------

struct TrackArgs {
  std::string preset;
  std::string config;
  std::string out;
  std::string mode = "both";
  std::string seeds = "1";
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw UsageError("cannot write " + path.string());
  os << text;
  if (!os.flush()) throw UsageError("cannot write " + path.string());
}

template <typename Writer>
void write_csv(const fs::path& path, Writer&& w) {
  std::ostringstream os;
  w(os);
  write_text(path, os.str());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_track(const TrackArgs& a) {
  if (!a.preset.empty() && !a.config.empty()) throw UsageError("--preset and --config are exclusive");
  bures::RunConfig run;
  if (!a.config.empty()) {
    run = bures::run_config_from_json(bures::read_json_file(a.config));
  } else {
    run.scenario = bures::preset(a.preset.empty() ? "default" : a.preset);
  }
  run.scenario.validate();
  run.filter.validate();

  std::vector<bures::Mode> modes;
  if (a.mode == "obs" || a.mode == "both") modes.push_back(bures::Mode::obs_only);
  if (a.mode == "filtered" || a.mode == "both") modes.push_back(bures::Mode::filtered);
  const std::vector<std::uint64_t> seeds = parse_seeds(a.seeds, run.scenario.seed);

  const fs::path out(a.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) {
    throw UsageError("cannot create output directory " + out.string() +
                     (ec ? " (" + ec.message() + ")" : ""));
  }

  struct Job {
    bures::Mode mode;
    std::uint64_t seed;
    bures::ExperimentResult result;
  };
  std::vector<Job> jobs;
  for (bures::Mode m : modes) {
    for (std::uint64_t s : seeds) jobs.push_back({m, s, {}});
  }
  bures::parallel_for(jobs.size(), bures::default_thread_count(), [&](std::size_t k) {
    bures::ScenarioConfig cfg = run.scenario;
    cfg.seed = jobs[k].seed;
    jobs[k].result = bures::run_experiment(cfg, run.filter, jobs[k].mode);
  });

  std::vector<bures::MetricsRow> rows;
  for (const Job& j : jobs) rows.push_back({run.scenario.name, j.mode, j.seed, j.result.metrics});
  std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) {
    const auto mx = bures::to_string(x.mode), my = bures::to_string(y.mode);
    return std::tie(x.scenario, mx, x.seed) < std::tie(y.scenario, my, y.seed);
  });
  write_csv(out / "metrics.csv", [&](std::ostream& os) { bures::write_metrics_csv(os, rows); });

  // Per-frame artefacts for the first seed of each mode.
  for (const Job& j : jobs) {
    if (j.seed != seeds.front()) continue;
    const std::string tag(bures::to_string(j.mode));
    const json meta = {{"scenario", run.scenario.name}, {"mode", tag}, {"seed", j.seed}};
    bures::write_scene_file(out / ("estimates_" + tag + ".json"), j.result.estimates, meta);
    write_csv(out / ("flow_" + tag + ".csv"),
              [&](std::ostream& os) { bures::write_flow_csv(os, j.result.estimated_flow); });
    write_csv(out / ("status_" + tag + ".csv"),
              [&](std::ostream& os) { bures::write_status_csv(os, j.result.status_log); });
    if (j.mode == modes.front()) {
      write_csv(out / "flow_truth.csv",
                [&](std::ostream& os) { bures::write_flow_csv(os, j.result.true_flow); });
    }
  }
  write_text(out / "config.json", bures::run_config_to_json(run).dump(2) + "\n");

  std::cout << "scenario " << run.scenario.name << ", " << seeds.size() << " seed(s), medians\n";
  std::cout << std::left << std::setw(10) << "mode" << std::right << std::setw(14) << "mean_rmse"
            << std::setw(14) << "w2_rmse" << std::setw(14) << "roughness" << std::setw(14) << "aepe_2d"
            << '\n';
  for (bures::Mode m : modes) {
    std::vector<double> cols[4];
    for (const auto& r : rows) {
      if (r.mode != m) continue;
      cols[0].push_back(r.metrics.mean_rmse);
      cols[1].push_back(r.metrics.w2_rmse);
      cols[2].push_back(r.metrics.temporal_roughness);
      cols[3].push_back(r.metrics.aepe_2d);
    }
    std::cout << std::left << std::setw(10) << bures::to_string(m) << std::right;
    for (auto& c : cols) std::cout << std::setw(14) << std::setprecision(6) << median(c);
    std::cout << '\n';
  }
  return kExitOk;
}

// ---- selftest ------------------------------------------------------------

struct SelftestArgs {
  std::string tolerance = "default";
  std::string json_report;
  std::uint64_t seed = bures::SelftestOptions{}.seed;
  bool quick = false;
  std::string inject;
};

int cmd_selftest(const SelftestArgs& a) {
  bures::SelftestOptions o;
  o.profile = a.tolerance == "strict" ? bures::ToleranceProfile::strict : bures::ToleranceProfile::standard;
  o.seed = a.seed;
  o.threads = bures::default_thread_count();
  o.inject_log_sign_flip = a.inject == "log-sign-flip";
  if (a.quick) {
    o.trials = 100;
    o.fd_trials = 10;
    o.run_simulation = false;
  }
  const bures::SelftestReport report = bures::run_selftest(o);
  for (const auto& p : report.properties) {
    std::cout << (p.passed ? "PASS " : "FAIL ") << '[' << p.criterion << "] " << p.name
              << " observed=" << bures::format_number(p.observed) << ' ' << p.relation << ' '
              << bures::format_number(p.threshold);
    if (!p.passed) std::cout << " seed=" << p.seed << " failures=" << p.failures << '/' << p.trials;
    std::cout << '\n';
  }
  std::cout << (report.passed() ? "selftest passed" : "selftest FAILED") << " in "
            << std::fixed << std::setprecision(2) << report.seconds << " s\n";
  if (!a.json_report.empty()) write_text(a.json_report, report.to_json().dump(2) + "\n");
  return report.passed() ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bures-Wasserstein geometry of 3D Gaussians and the state-consistency filter"};
  app.require_subcommand(1);

  DistanceArgs dist;
  auto* distance = app.add_subcommand("distance", "W2 between two Gaussians, printed as JSON");
  distance->add_option("gaussians", dist.inline_atoms,
                       R"(two inline atoms {"mean":[..],"rot":[w,x,y,z],"scale":[..]})");
  distance->add_option("--scene", dist.scene, "scene file to select Gaussians from");
  distance->add_option("--at", dist.at, "FRAME:INDEX selector, given twice with --scene");

  TrackArgs track;
  auto* trk = app.add_subcommand("track", "run the simulator and write metrics, estimates, flow and status");
  trk->add_option("--preset", track.preset, "embedded scenario")
      ->check(CLI::IsMember(bures::preset_names()));
  trk->add_option("--config", track.config, "run configuration JSON");
  trk->add_option("--out", track.out, "output directory")->required();
  trk->add_option("--mode", track.mode, "obs, filtered or both")
      ->check(CLI::IsMember({"obs", "filtered", "both"}));
  trk->add_option("--seeds", track.seeds, "seed count N, or a comma-separated list");

  SelftestArgs st;
  auto* self = app.add_subcommand("selftest", "run the property suite");
  self->add_option("--tolerance", st.tolerance, "strict or default")
      ->check(CLI::IsMember({"strict", "default"}));
  self->add_option("--json-report", st.json_report, "write a JSON report here");
  self->add_option("--seed", st.seed, "base seed");
  self->add_flag("--quick", st.quick, "fewer trials, no simulation");
  self->add_option("--inject-fault", st.inject, "test hook")
      ->check(CLI::IsMember({"log-sign-flip"}))
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*distance) return cmd_distance(dist);
    if (*trk) return cmd_track(track);
    if (*self) return cmd_selftest(st);
  } catch (const UsageError& e) {
    std::cerr << "bures-flow: " << e.what() << '\n';
    return kExitUsage;
  } catch (const bures::InvalidInput& e) {
    std::cerr << "bures-flow: " << e.what() << '\n';
    return kExitUsage;
  } catch (const bures::CorrespondenceError& e) {
    std::cerr << "bures-flow: " << e.what() << '\n';
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "bures-flow: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "bures-flow: internal error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

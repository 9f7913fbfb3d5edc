#pragma once

// Property suite behind `bures-flow selftest` and the acceptance binary.
// Every check is seeded; a failing property reports the seed of its worst
// trial and the observed error.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace bures {

enum class ToleranceProfile { standard, strict };

struct SelftestOptions {
  ToleranceProfile profile = ToleranceProfile::standard;
  std::uint64_t seed = 20241019;
  std::size_t trials = 1000;     // random cases per numerical property
  std::size_t fd_trials = 100;   // finite-difference configurations
  std::size_t sim_seeds = 100;   // simulator seeds per mode
  bool run_simulation = true;
  bool inject_log_sign_flip = false;  // mutation hook: negate the log map
  unsigned threads = 1;
};

struct PropertyResult {
  int criterion = 0;
  std::string name;
  bool passed = false;
  double observed = 0.0;
  double threshold = 0.0;
  std::string relation;  // how observed compares to threshold when passing
  std::uint64_t seed = 0;  // seed of the worst trial
  std::size_t trials = 0;
  std::size_t failures = 0;
  double seconds = 0.0;
  std::string detail;
};

struct SelftestReport {
  std::vector<PropertyResult> properties;
  double seconds = 0.0;
  ToleranceProfile profile = ToleranceProfile::standard;

  bool passed() const;
  nlohmann::json to_json() const;
};

/// Tolerance multiplier: 1 for standard, 0.1 for strict (numerical
/// properties only; statistical thresholds never change).
double tolerance_scale(ToleranceProfile p);

std::vector<PropertyResult> check_metric_axioms(const SelftestOptions& o);          // 1
std::vector<PropertyResult> check_decomposition_consistency(const SelftestOptions& o);  // 2
std::vector<PropertyResult> check_exp_log_round_trip(const SelftestOptions& o);     // 3
std::vector<PropertyResult> check_metric_geometry(const SelftestOptions& o);        // 4
std::vector<PropertyResult> check_sylvester(const SelftestOptions& o);              // 5
std::vector<PropertyResult> check_filter_simulation(const SelftestOptions& o);      // 6, 7
std::vector<PropertyResult> check_gating(const SelftestOptions& o);                 // 8
std::vector<PropertyResult> check_loss_arithmetic(const SelftestOptions& o);        // 9
std::vector<PropertyResult> check_gradient(const SelftestOptions& o);               // 10

SelftestReport run_selftest(const SelftestOptions& o);

}  // namespace bures

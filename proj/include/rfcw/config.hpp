#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rfcw {

struct ModelSection {
  int N = 0;
  double beta = 0;
  std::string field = "discrete(0:1)";  // field law, ignored when `fields` is set
  std::vector<double> fields;           // explicit fields
  std::uint64_t seed = 0;
  double alpha_cap = 0.999;
  bool operator==(const ModelSection&) const = default;
};

struct CoarseSection {
  int n = 1;
  std::optional<double> C;  // interval width bound is C/n; default is the realized field range
  bool operator==(const CoarseSection&) const = default;
};

struct DynamicsSection {
  std::uint64_t cap = 10'000'000'000ULL;
  std::uint64_t trajectories = 100;
  int threads = 1;
  bool operator==(const DynamicsSection&) const = default;
};

struct CouplingSection {
  double kappa = 3.0;
  double c2 = 4.0;
  std::optional<double> nu_override;  // default nu = 3 eps(n)
  std::uint32_t cap_cycles = 1000;
  bool operator==(const CouplingSection&) const = default;
};

// A is the grid slice nearest a chosen minimum m*; B is either the region past
// the saddle or an L1 ball of radius 2*delta around the other minimum
struct TargetsSection {
  std::string mstar = "low";  // "low" | "high" | "deepest" | "shallowest"
  std::string B = "saddle";   // "saddle" | "well"
  double delta = 0.1;
  std::vector<int> A_sums;  // explicit anchor slice, overrides mstar
  bool operator==(const TargetsSection&) const = default;
};

struct StatsSection {
  double level = 0.01;
  double slack = 2.0;
  int starts = 4;
  std::vector<double> lambdas{0.5, 1.0, 2.0};
  bool operator==(const StatsSection&) const = default;
};

struct ExactSection {
  std::string check = "all";  // green | renewal | uphill | downhill | recurrence | all
  std::vector<double> lambdas{0.5, 1.0, 2.0};
  bool operator==(const ExactSection&) const = default;
};

struct OutputSection {
  std::string directory = "out";
  std::vector<std::string> formats{"csv", "json"};
  bool operator==(const OutputSection&) const = default;
};

struct ExperimentConfig {
  ModelSection model;
  CoarseSection coarse;
  DynamicsSection dynamics;
  CouplingSection coupling;
  TargetsSection targets;
  StatsSection stats;
  ExactSection exact;
  OutputSection output;
  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_string(const std::string& text, const std::string& source = "<string>");
// canonical text with every default spelled out; parse_config_string(emit_config(c)) == c
std::string emit_config(const ExperimentConfig& c);
void validate(const ExperimentConfig& c);
// SEED and THREADS environment variables take precedence over the file
void apply_env_overrides(ExperimentConfig& c);

}  // namespace rfcw

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rfcw/coarse_grain.hpp"
#include "rfcw/config.hpp"
#include "rfcw/dynamics.hpp"
#include "rfcw/landscape.hpp"
#include "rfcw/model.hpp"

namespace rfcw {

// everything derived from a config before any sampling
struct Setup {
  FieldEnvironment env;
  ModelParams params;
  Partition partition;
  std::unique_ptr<HeatBathRule> rule;
  std::unique_ptr<FreeEnergySurface> surface;
  std::vector<CriticalPoint> critical_points;
  double interval_bound = 0;  // C/n

  // filled by resolve_targets
  std::optional<CriticalPoint> mstar, saddle, other;
  MesoState anchor;
  StoppingSpec B;
  Target A_delta;  // L1 ball of radius 2 delta around m*

  double eps = 0;
  std::string eps_source;  // "a1_certificate" or "eps_surrogate"
  double nu = 0;
  std::string nu_source;  // "3eps" or "override"
};

Setup build_setup(const ExperimentConfig& c);
// picks m*, the saddle, the anchor slice and B; throws DomainError for a single well
void resolve_targets(Setup& s, const ExperimentConfig& c);
// nearest grid point with the right parities
MesoState nearest_grid_point(const std::vector<double>& x, const BlockLayout& layout);

// git blob hash: sha1("blob <len>\0" + bytes)
std::string git_blob_sha1(const std::string& bytes);
std::string sha1_hex(const std::string& bytes);
std::string format_double(double v);  // 17 significant digits

struct RunOptions {
  std::string subcommand;
  std::string config_path;
  std::string config_bytes;
  std::string exact_check;  // overrides the config for `exact`
  std::vector<std::string> argv;
};

// exit status: 0 ok, 1 hypothesis rejected, 2 config error, 3 numerical error, 4 inconclusive
int run_experiment(const ExperimentConfig& c, const RunOptions& opt);

}  // namespace rfcw

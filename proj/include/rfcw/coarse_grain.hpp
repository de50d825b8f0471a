#pragma once

#include <memory>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rfcw/model.hpp"

namespace rfcw {

class ExactChain;

struct Partition {
  int n = 0;
  int N = 0;
  std::vector<double> edges;  // n+1 interval edges
  std::shared_ptr<const BlockLayout> layout;
  std::vector<double> rho;
  std::vector<double> hbar;
  std::vector<double> htilde;  // per site
  double max_spread = 0;       // largest within-block field range

  int block_of(int x) const { return layout->block_of[x]; }
  int size(int l) const { return layout->sizes[l]; }
  bool empty(int l) const { return layout->sizes[l] == 0; }
  // beta * max within-block field spread, stand-in for the a1 certificate at large N
  double eps_surrogate(double beta) const { return beta * max_spread; }
};

Partition build_partition(const FieldEnvironment& env, int n);
// halves every interval; children nest inside their parents
Partition refine(const Partition& p, const FieldEnvironment& env);
bool is_refinement(const Partition& fine, const Partition& coarse);

nlohmann::json to_json(const Partition& p);

// block magnetizations kept as integer block sums; m_l = sums[l] / N
struct MesoState {
  std::vector<int> sums;
  int N = 0;

  int blocks() const { return static_cast<int>(sums.size()); }
  double operator[](int l) const { return static_cast<double>(sums[l]) / N; }
  std::vector<double> values() const;
  double total() const;
  bool operator==(const MesoState& o) const { return N == o.N && sums == o.sums; }
};

MesoState meso_map(const SpinConfig& s, const Partition& p);
MesoState meso_map(const SpinConfig& s);
bool on_grid(const MesoState& m, const BlockLayout& layout);
// coarse meso state obtained by summing fine blocks into their parents
MesoState coarsen(const MesoState& fine, const Partition& fine_p, const Partition& coarse_p);

// exact lumped kernel r_N(m, m') by enumeration
double lumped_rates_exact(const Partition& p, const MesoState& m, const MesoState& m2, const ExactChain& chain);
// block mean-field surrogate for m -> m + direction*(2/N) e_k
double lumped_rates_approx(const Partition& p, const MesoState& m, int k, int direction, double beta);
// max relative deviation of single-flip rates from the lumped rate, per adjacent slice pair
double a1_certificate(const ExactChain& chain, const Partition& p);
// smallest nu for which the coupling residual probabilities stay in [0,1]
double required_nu(const HeatBathRule& rule, const Partition& p);

}  // namespace rfcw

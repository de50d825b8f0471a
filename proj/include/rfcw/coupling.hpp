#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "rfcw/coarse_grain.hpp"
#include "rfcw/dynamics.hpp"
#include "rfcw/model.hpp"
#include "rfcw/rng.hpp"

namespace rfcw {

struct CouplingParams {
  double kappa = 3.0;
  double c2 = 4.0;
  double nu = 0.0;
  void validate() const;
};

std::uint64_t horizon(int N, double kappa);
int coin_count(int N, double c2);

class CoinStack {
 public:
  CoinStack(int M, double nu, RngStream& rng);
  CoinStack(std::vector<char> values, double nu);

  int size() const { return static_cast<int>(v_.size()); }
  bool operator[](int i) const { return v_[i] != 0; }
  bool all_ones() const;
  double nu() const { return nu_; }

 private:
  std::vector<char> v_;
  double nu_;
};

// sites where the two chains disagree, bucketed by block and by eta's spin
class MismatchSets {
 public:
  MismatchSets() = default;
  MismatchSets(const SpinConfig& sigma, const SpinConfig& eta);
  // call after site x changed in either chain
  void update(int x, int sigma_x, int eta_x);
  int size(int block, int eta_spin) const { return static_cast<int>(sets_[idx(block, eta_spin)].size()); }
  int pick(int block, int eta_spin, std::uint32_t r) const { return sets_[idx(block, eta_spin)][r]; }
  int total() const { return total_; }

 private:
  static int idx(int block, int eta_spin) { return 2 * block + (eta_spin > 0 ? 0 : 1); }
  std::vector<int> block_of_;
  std::vector<std::vector<int>> sets_;
  std::vector<int> pos_;  // position in its set, -1 if matched
  std::vector<int> where_;
  int total_ = 0;
};

enum class EventBVariant { Full, LocalProbe };

struct AttemptDiagnostics {
  std::uint64_t S = 0;  // time all of eta's spins had flipped (valid if all_flipped)
  bool all_flipped = false;
  std::uint64_t NN = 0;  // selections of not-yet-flipped sites up to S
  int coins_used = 0;
  std::uint64_t branch_b_steps = 0;
};

struct AttemptOutcome {
  bool success = false;
  bool eventA = false;
  bool eventB = false;
  std::optional<std::uint64_t> tauB_eta;    // first time eta in B, within the horizon
  std::optional<std::uint64_t> tauB_sigma;  // same for sigma
  std::optional<SpinConfig> merged_state;
  bool merged = false;  // sigma == eta at the horizon
  AttemptDiagnostics diag;
};

class CouplingAttempt {
 public:
  CouplingAttempt(SpinConfig sigma, SpinConfig eta, const CoinStack& coins, const HeatBathRule& rule,
                  std::uint64_t horizon, const StoppingSpec* B = nullptr);

  // eta_rng: site I_t and eta's spin; aux_rng: partner y and residual draws;
  // sigma_rng: sigma's own updates in branch (B)
  void advance(RngStream& eta_rng, RngStream& aux_rng, RngStream& sigma_rng);
  // runs to the horizon; stops early once sigma has entered B if stop_on_sigma_B
  void run(RngStream& eta_rng, RngStream& aux_rng, RngStream& sigma_rng, bool stop_on_sigma_B = false);

  bool finished() const { return t_ >= horizon_; }
  std::uint64_t time() const { return t_; }
  std::uint64_t horizon_steps() const { return horizon_; }
  const SpinConfig& sigma() const { return sigma_; }
  const SpinConfig& eta() const { return eta_; }
  SpinConfig& eta_mut() { return eta_; }
  int coins_used() const { return used_; }
  bool chi() const { return chi_; }
  int mismatches() const { return mis_.total(); }
  const AttemptDiagnostics& diagnostics() const { return diag_; }
  std::optional<std::uint64_t> tauB_eta() const { return tau_eta_; }
  std::optional<std::uint64_t> tauB_sigma() const { return tau_sigma_; }

  AttemptOutcome outcome(EventBVariant variant = EventBVariant::Full) const;

 private:
  SpinConfig sigma_, eta_;
  const CoinStack& coins_;
  const HeatBathRule& rule_;
  std::uint64_t horizon_;
  const StoppingSpec* B_;
  MismatchSets mis_;
  std::vector<std::int8_t> eta0_;
  std::vector<char> flipped_;
  int unflipped_;
  std::uint64_t t_ = 0;
  int used_ = 0;
  bool chi_ = false;
  AttemptDiagnostics diag_;
  std::optional<std::uint64_t> tau_eta_, tau_sigma_;
};

AttemptOutcome basic_coupling_attempt(const SpinConfig& sigma0, const SpinConfig& eta0, const CoinStack& coins,
                                      const CouplingParams& params, const HeatBathRule& rule, const StoppingSpec* B,
                                      RngStream& eta_rng, RngStream& aux_rng, RngStream& sigma_rng,
                                      EventBVariant variant = EventBVariant::Full);

// pure LLP step for block-constant fields; returns nothing, updates both in place
void llp_step(SpinConfig& sigma, SpinConfig& eta, const HeatBathRule& rule, RngStream& rng);

// exact distribution of sigma after one coupled step from (sigma, eta) in branch (A),
// averaged over I_t, eta's spin, the partner and the coin: entry x is the
// probability of flipping site x, entry N of staying put
std::vector<double> coupled_sigma_kernel(const SpinConfig& sigma, const SpinConfig& eta, const HeatBathRule& rule,
                                         double nu);

enum class Termination { Coupled, SigmaHitB, Truncated };
const char* to_string(Termination t);

struct CycleRecord {
  std::uint64_t start_time = 0;  // theta_{k-1}
  bool eventA = false, eventB = false, success = false;
  bool completed = true;  // false if sigma hit B before the horizon
  bool eventD = false;    // return to the anchor before B (failed attempts only)
  std::optional<std::uint64_t> tauB_eta;
  AttemptDiagnostics diag;
  bool lemma_violation = false;  // success without sigma == eta
};

struct CycleTrace {
  bool equal_start = true;
  bool initial_D = true;  // unequal start: anchor reached before B
  std::uint64_t initial_wait = 0;
  std::vector<CycleRecord> cycles;
  Termination termination = Termination::Truncated;
  std::uint64_t tau_B = 0;
  int success_cycle = -1;
  std::uint64_t coins_consumed_total = 0;
  std::uint64_t lemma_violations = 0;
};

struct CycleResult {
  std::uint64_t tau_B = 0;
  CycleTrace trace;
};

CycleResult cycle_run(SpinConfig sigma0, const MesoState& anchor, const StoppingSpec& B, const HeatBathRule& rule,
                      const CouplingParams& params, std::uint64_t seed, std::uint32_t trajectory,
                      std::uint32_t cap_cycles);

// number of terms of the cycle decomposition of tau_B that equal one
int decomposition_terms_fired(const CycleTrace& trace);

struct ProbeResult {
  bool hit = false;  // eta reached A u B_delta within the budget
  std::uint64_t time = 0;
  bool eventA = false, eventB = false;  // coupling attempt with the probe variant of event B
};

// eta0 in the ball; A is the anchor slice, B_delta the complement of the ball
ProbeResult local_coupling_time_probe(const SpinConfig& eta0, const MesoState& anchor, const BallTarget& ball,
                                      std::uint64_t budget, const HeatBathRule& rule, const CouplingParams& params,
                                      std::uint64_t seed, std::uint32_t trajectory);

}  // namespace rfcw

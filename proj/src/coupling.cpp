#include "rfcw/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rfcw/error.hpp"

namespace rfcw {

void CouplingParams::validate() const {
  if (!(kappa > 0)) throw ConfigError("kappa must be positive");
  if (!(c2 > 0)) throw ConfigError("c2 must be positive");
  if (!(nu >= 0 && nu <= 1)) throw ConfigError("nu must lie in [0,1]");
}

std::uint64_t horizon(int N, double kappa) {
  double v = std::pow(static_cast<double>(N), kappa);
  double r = std::round(v);
  if (std::abs(v - r) < 1e-9 * std::max(1.0, r)) return static_cast<std::uint64_t>(r);
  return static_cast<std::uint64_t>(std::ceil(v));
}

int coin_count(int N, double c2) { return static_cast<int>(std::ceil(c2 * N - 1e-9)); }

CoinStack::CoinStack(int M, double nu, RngStream& rng) : v_(M), nu_(nu) {
  for (auto& c : v_) c = rng.uniform() >= nu ? 1 : 0;
}

CoinStack::CoinStack(std::vector<char> values, double nu) : v_(std::move(values)), nu_(nu) {}

bool CoinStack::all_ones() const {
  return std::all_of(v_.begin(), v_.end(), [](char c) { return c != 0; });
}

MismatchSets::MismatchSets(const SpinConfig& sigma, const SpinConfig& eta) {
  if (sigma.N() != eta.N()) throw ContractViolation("MismatchSets: size mismatch");
  const int N = sigma.N();
  block_of_ = sigma.layout().block_of;
  sets_.assign(2 * sigma.layout().n, {});
  pos_.assign(N, -1);
  where_.assign(N, -1);
  for (int x = 0; x < N; ++x) update(x, sigma[x], eta[x]);
}

void MismatchSets::update(int x, int sigma_x, int eta_x) {
  int want = sigma_x == eta_x ? -1 : idx(block_of_[x], eta_x);
  int cur = where_[x];
  if (cur == want) return;
  if (cur >= 0) {
    auto& v = sets_[cur];
    int p = pos_[x];
    int last = v.back();
    v[p] = last;
    pos_[last] = p;
    v.pop_back();
    --total_;
  }
  if (want >= 0) {
    pos_[x] = static_cast<int>(sets_[want].size());
    sets_[want].push_back(x);
    ++total_;
  } else {
    pos_[x] = -1;
  }
  where_[x] = want;
}

CouplingAttempt::CouplingAttempt(SpinConfig sigma, SpinConfig eta, const CoinStack& coins, const HeatBathRule& rule,
                                 std::uint64_t horizon, const StoppingSpec* B)
    : sigma_(std::move(sigma)),
      eta_(std::move(eta)),
      coins_(coins),
      rule_(rule),
      horizon_(horizon),
      B_(B),
      mis_(sigma_, eta_),
      eta0_(eta_.spins()),
      flipped_(eta_.N(), 0),
      unflipped_(eta_.N()) {
  if (sigma_.block_sums() != eta_.block_sums())
    throw ContractViolation("coupling attempt needs equal block magnetizations");
  if (sigma_.N() != rule.N()) throw ContractViolation("coupling attempt: size mismatch");
}

void CouplingAttempt::advance(RngStream& eta_rng, RngStream& aux_rng, RngStream& sigma_rng) {
  const int N = eta_.N();
  // branch (A) also covers chains that have already merged with every coin used
  const bool branchA = !chi_ && (used_ < coins_.size() || mis_.total() == 0);
  const int I = static_cast<int>(eta_rng.index(static_cast<std::uint32_t>(N)));
  const double u = eta_rng.uniform();
  const int e_old = eta_[I];
  const double pe_plus = rule_.p_plus(I, eta_.total_sum() - e_old);
  const int e_new = u < pe_plus ? 1 : -1;
  if (!flipped_[I]) ++diag_.NN;
  bool eta_changed = e_new != e_old, sigma_changed = false;

  if (branchA) {
    if (sigma_.block_sums() != eta_.block_sums())
      throw ContractViolation("block magnetizations diverged inside branch (A)");
    if (sigma_[I] == e_old) {
      eta_.set(I, static_cast<std::int8_t>(e_new));
      sigma_.set(I, static_cast<std::int8_t>(e_new));
      sigma_changed = eta_changed;
    } else {
      const int k = eta_.block_of(I);
      const int cnt = mis_.size(k, -e_old);
      if (cnt == 0) throw ContractViolation("no partner site for the coupled update");
      const int y = mis_.pick(k, -e_old, aux_rng.index(static_cast<std::uint32_t>(cnt)));
      const bool V = coins_[used_++];
      int sy = e_new;
      if (!V) {
        chi_ = true;
        const double nu = coins_.nu();
        const double p_eta = e_new > 0 ? pe_plus : 1.0 - pe_plus;
        const double ps_plus = rule_.p_plus(y, sigma_.total_sum() - sigma_[y]);
        const double p_sig = e_new > 0 ? ps_plus : 1.0 - ps_plus;
        const double r = (std::min(p_eta, p_sig) - (1.0 - nu) * p_eta) / (nu * p_eta);
        if (r < -1e-12 || r > 1.0 + 1e-12) {
          std::ostringstream os;
          os.precision(17);
          os << "residual coupling probability " << r << " outside [0,1]: nu = " << nu
             << " is below the realized rate ratio bound";
          throw NuViolationError(os.str());
        }
        sy = aux_rng.uniform() < r ? e_new : -e_new;
      }
      eta_.set(I, static_cast<std::int8_t>(e_new));
      sigma_changed = sigma_[y] != sy;
      sigma_.set(y, static_cast<std::int8_t>(sy));
      mis_.update(I, sigma_[I], eta_[I]);
      mis_.update(y, sigma_[y], eta_[y]);
    }
  } else {
    eta_.set(I, static_cast<std::int8_t>(e_new));
    mis_.update(I, sigma_[I], eta_[I]);
    const int J = static_cast<int>(sigma_rng.index(static_cast<std::uint32_t>(N)));
    const double v = sigma_rng.uniform();
    const int sn = v < rule_.p_plus(J, sigma_.total_sum() - sigma_[J]) ? 1 : -1;
    sigma_changed = sigma_[J] != sn;
    sigma_.set(J, static_cast<std::int8_t>(sn));
    mis_.update(J, sigma_[J], eta_[J]);
    ++diag_.branch_b_steps;
  }

  if (!flipped_[I] && eta_[I] == -eta0_[I]) {
    flipped_[I] = 1;
    if (--unflipped_ == 0) {
      diag_.all_flipped = true;
      diag_.S = t_;
    }
  }
  ++t_;
  if (B_) {
    if (!tau_eta_ && (eta_changed || t_ == 1) && B_->any(meso_map(eta_))) tau_eta_ = t_;
    if (!tau_sigma_ && (sigma_changed || t_ == 1) && B_->any(meso_map(sigma_))) tau_sigma_ = t_;
  }
  diag_.coins_used = used_;
}

void CouplingAttempt::run(RngStream& eta_rng, RngStream& aux_rng, RngStream& sigma_rng, bool stop_on_sigma_B) {
  while (t_ < horizon_) {
    advance(eta_rng, aux_rng, sigma_rng);
    if (stop_on_sigma_B && tau_sigma_) break;
  }
}

AttemptOutcome CouplingAttempt::outcome(EventBVariant variant) const {
  AttemptOutcome o;
  o.diag = diag_;
  o.tauB_eta = tau_eta_;
  o.tauB_sigma = tau_sigma_;
  o.eventA = coins_.all_ones();
  const std::uint64_t M = static_cast<std::uint64_t>(coins_.size());
  const bool full_run = t_ >= horizon_;
  if (variant == EventBVariant::Full) {
    o.eventB = full_run && (!tau_eta_ || *tau_eta_ >= horizon_) && diag_.all_flipped && diag_.NN <= M;
  } else {
    o.eventB = full_run && diag_.all_flipped && diag_.NN < M;
  }
  o.success = o.eventA && o.eventB;
  o.merged = sigma_ == eta_;
  if (o.success && o.merged) o.merged_state = sigma_;
  return o;
}

AttemptOutcome basic_coupling_attempt(const SpinConfig& sigma0, const SpinConfig& eta0, const CoinStack& coins,
                                      const CouplingParams& params, const HeatBathRule& rule, const StoppingSpec* B,
                                      RngStream& eta_rng, RngStream& aux_rng, RngStream& sigma_rng,
                                      EventBVariant variant) {
  CouplingAttempt att(sigma0, eta0, coins, rule, horizon(sigma0.N(), params.kappa), B);
  att.run(eta_rng, aux_rng, sigma_rng);
  return att.outcome(variant);
}

void llp_step(SpinConfig& sigma, SpinConfig& eta, const HeatBathRule& rule, RngStream& rng) {
  if (sigma.block_sums() != eta.block_sums()) throw ContractViolation("llp_step needs equal block magnetizations");
  const int N = eta.N();
  const int I = static_cast<int>(rng.index(static_cast<std::uint32_t>(N)));
  const double u = rng.uniform();
  const int e_old = eta[I];
  const int e_new = u < rule.p_plus(I, eta.total_sum() - e_old) ? 1 : -1;
  if (sigma[I] == e_old) {
    eta.set(I, static_cast<std::int8_t>(e_new));
    sigma.set(I, static_cast<std::int8_t>(e_new));
    return;
  }
  const int k = eta.block_of(I);
  std::vector<int> cand;
  for (int z = 0; z < N; ++z)
    if (eta.block_of(z) == k && sigma[z] != eta[z] && eta[z] != e_old) cand.push_back(z);
  if (cand.empty()) throw ContractViolation("llp_step: empty partner set");
  int y = cand[rng.index(static_cast<std::uint32_t>(cand.size()))];
  eta.set(I, static_cast<std::int8_t>(e_new));
  sigma.set(y, static_cast<std::int8_t>(e_new));
}

std::vector<double> coupled_sigma_kernel(const SpinConfig& sigma, const SpinConfig& eta, const HeatBathRule& rule,
                                         double nu) {
  if (sigma.block_sums() != eta.block_sums()) throw ContractViolation("coupled kernel needs equal block magnetizations");
  const int N = sigma.N();
  std::vector<double> out(N + 1, 0.0);
  for (int I = 0; I < N; ++I) {
    const double pe_plus = rule.p_plus(I, eta.total_sum() - eta[I]);
    for (int e : {1, -1}) {
      const double pe = e > 0 ? pe_plus : 1.0 - pe_plus;
      const double w = pe / N;
      if (sigma[I] == eta[I]) {
        if (sigma[I] != e) out[I] += w; else out[N] += w;
        continue;
      }
      std::vector<int> D;
      for (int z = 0; z < N; ++z)
        if (eta.block_of(z) == eta.block_of(I) && sigma[z] == eta[I] && eta[z] == -eta[I]) D.push_back(z);
      for (int y : D) {
        const double ps_plus = rule.p_plus(y, sigma.total_sum() - sigma[y]);
        const double ps = e > 0 ? ps_plus : 1.0 - ps_plus;
        const double r = nu > 0 ? (std::min(pe, ps) - (1.0 - nu) * pe) / (nu * pe) : 1.0;
        const double to_e = (1.0 - nu) + nu * r;  // probability sigma_y becomes e
        const double wy = w / D.size();
        // sigma_y currently equals eta_I(t) = -e or +e
        if (sigma[y] != e) {
          out[y] += wy * to_e;
          out[N] += wy * (1.0 - to_e);
        } else {
          out[N] += wy * to_e;
          out[y] += wy * (1.0 - to_e);
        }
      }
    }
  }
  return out;
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::Coupled: return "coupled";
    case Termination::SigmaHitB: return "sigma_hit_B";
    default: return "truncated";
  }
}

CycleResult cycle_run(SpinConfig sigma, const MesoState& anchor, const StoppingSpec& B, const HeatBathRule& rule,
                      const CouplingParams& params, std::uint64_t seed, std::uint32_t trajectory,
                      std::uint32_t cap_cycles) {
  params.validate();
  const int N = sigma.N();
  const auto layout = sigma.layout_ptr();
  if (B.any(anchor)) throw ContractViolation("cycle_run: B meets the anchor slice");
  const std::uint64_t H = horizon(N, params.kappa);
  const int M = coin_count(N, params.c2);
  const std::uint64_t cap = B.cap;
  CycleResult res;
  auto& tr = res.trace;
  RngStream srng(seed, trajectory, substreams::kChain);
  std::uint64_t t = 0;
  auto in_anchor = [&](const SpinConfig& s) { return s.block_sums() == anchor.sums; };
  auto in_B = [&](const SpinConfig& s) { return B.first_hit(s.block_sums(), N) >= 0; };

  tr.equal_start = in_anchor(sigma);
  if (!tr.equal_start) {
    // wait for the first entry into the anchor slice
    for (;;) {
      if (t >= cap) {
        tr.termination = Termination::Truncated;
        res.tau_B = tr.tau_B = t;
        return res;
      }
      step(sigma, rule, srng);
      ++t;
      if (in_B(sigma)) {
        tr.initial_D = false;
        tr.initial_wait = t;
        tr.termination = Termination::SigmaHitB;
        res.tau_B = tr.tau_B = t;
        return res;
      }
      if (in_anchor(sigma)) break;
    }
    tr.initial_wait = t;
  }

  for (std::uint32_t k = 0; k < cap_cycles; ++k) {
    const std::uint32_t base = substreams::attempt_base(k);
    RngStream start_rng(seed, trajectory, base + substreams::kEtaStart);
    RngStream coin_rng(seed, trajectory, base + substreams::kCoins);
    RngStream eta_rng(seed, trajectory, base + substreams::kEtaPath);
    RngStream aux_rng(seed, trajectory, base + substreams::kAux);
    SpinConfig eta0 = sample_uniform_on_slice(anchor, layout, start_rng);
    CoinStack coins(M, params.nu, coin_rng);
    CycleRecord rec;
    rec.start_time = t;
    CouplingAttempt att(sigma, std::move(eta0), coins, rule, H, &B);
    // sigma hitting B strictly before the horizon rules out success
    while (!att.finished()) {
      att.advance(eta_rng, aux_rng, srng);
      if (att.tauB_sigma() && *att.tauB_sigma() < H) break;
      if (t + att.time() >= cap) break;
    }
    auto out = att.outcome(EventBVariant::Full);
    rec.completed = att.finished();
    rec.eventA = out.eventA;
    rec.eventB = out.eventB;
    rec.success = out.success;
    rec.tauB_eta = out.tauB_eta;
    rec.diag = out.diag;
    tr.coins_consumed_total += static_cast<std::uint64_t>(att.coins_used());
    sigma = att.sigma();
    const std::uint64_t local = att.time();

    if (rec.success && !out.merged) {
      rec.lemma_violation = true;
      ++tr.lemma_violations;
      rec.success = false;
    }
    if (rec.success) {
      // merged chain continues on eta's stream
      SpinConfig merged = att.eta();
      std::uint64_t tau = 0;
      if (out.tauB_eta) {
        tau = *out.tauB_eta;
      } else {
        tau = H;
        while (!in_B(merged)) {
          if (t + tau >= cap) {
            tr.cycles.push_back(rec);
            tr.termination = Termination::Truncated;
            res.tau_B = tr.tau_B = t + tau;
            return res;
          }
          step(merged, rule, eta_rng);
          ++tau;
        }
      }
      tr.cycles.push_back(rec);
      tr.success_cycle = static_cast<int>(k);
      tr.termination = Termination::Coupled;
      res.tau_B = tr.tau_B = t + tau;
      return res;
    }
    if (att.tauB_sigma()) {
      rec.eventD = false;
      tr.cycles.push_back(rec);
      tr.termination = Termination::SigmaHitB;
      res.tau_B = tr.tau_B = t + *att.tauB_sigma();
      return res;
    }
    if (t + local >= cap) {
      tr.cycles.push_back(rec);
      tr.termination = Termination::Truncated;
      res.tau_B = tr.tau_B = t + local;
      return res;
    }
    // wait for Delta: first return to the anchor strictly after the horizon
    std::uint64_t s = local;
    bool hitB = false;
    for (;;) {
      if (t + s >= cap) break;
      step(sigma, rule, srng);
      ++s;
      if (in_B(sigma)) {
        hitB = true;
        break;
      }
      if (in_anchor(sigma)) break;
    }
    if (t + s >= cap && !hitB && !in_anchor(sigma)) {
      tr.cycles.push_back(rec);
      tr.termination = Termination::Truncated;
      res.tau_B = tr.tau_B = t + s;
      return res;
    }
    rec.eventD = !hitB;
    tr.cycles.push_back(rec);
    if (hitB) {
      tr.termination = Termination::SigmaHitB;
      res.tau_B = tr.tau_B = t + s;
      return res;
    }
    t += s;
  }
  tr.termination = Termination::Truncated;
  res.tau_B = tr.tau_B = t;
  return res;
}

int decomposition_terms_fired(const CycleTrace& tr) {
  int fired = 0;
  // product of (1 - A^l B^l) D^l over earlier cycles
  int prefix = tr.equal_start ? 1 : (tr.initial_D ? 1 : 0);
  if (!tr.equal_start && !tr.initial_D) ++fired;
  for (const auto& c : tr.cycles) {
    int ab = c.success ? 1 : 0;
    int d = c.eventD ? 1 : 0;
    fired += prefix * ab;
    fired += prefix * (1 - ab) * (1 - d);
    prefix *= (1 - ab) * d;
  }
  return fired;
}

ProbeResult local_coupling_time_probe(const SpinConfig& eta0, const MesoState& anchor, const BallTarget& ball,
                                      std::uint64_t budget, const HeatBathRule& rule, const CouplingParams& params,
                                      std::uint64_t seed, std::uint32_t trajectory) {
  ProbeResult pr;
  const int N = eta0.N();
  auto in_ball = [&](const SpinConfig& s) { return contains(Target{ball}, s.block_sums(), N); };
  if (!in_ball(eta0)) throw ContractViolation("probe start outside the ball");
  BallTarget outside = ball;
  outside.outside = true;
  StoppingSpec target;
  target.targets = {SliceTarget{anchor.sums}, outside};
  target.cap = budget;

  // coupling attempt against a uniform partner on the same slice, driven by eta's path
  RngStream start_rng(seed, trajectory, substreams::attempt_base(0) + substreams::kEtaStart);
  RngStream coin_rng(seed, trajectory, substreams::attempt_base(0) + substreams::kCoins);
  RngStream aux_rng(seed, trajectory, substreams::attempt_base(0) + substreams::kAux);
  RngStream eta_rng(seed, trajectory, substreams::kChain);
  RngStream sig_rng(seed, trajectory, substreams::kStart);
  SpinConfig sigma0 = sample_uniform_on_slice(meso_map(eta0), eta0.layout_ptr(), start_rng);
  CoinStack coins(coin_count(N, params.c2), params.nu, coin_rng);
  const std::uint64_t H = std::min<std::uint64_t>(horizon(N, params.kappa), budget);
  CouplingAttempt att(sigma0, eta0, coins, rule, H, &target);
  att.run(eta_rng, aux_rng, sig_rng);
  auto out = att.outcome(EventBVariant::LocalProbe);
  pr.eventA = out.eventA;
  pr.eventB = out.eventB;
  if (out.tauB_eta) {
    pr.hit = true;
    pr.time = *out.tauB_eta;
    return pr;
  }
  // keep running eta alone on the same stream until the budget is spent
  SpinConfig eta = att.eta();
  std::uint64_t t = H;
  while (t < budget) {
    bool changed = step(eta, rule, eta_rng);
    ++t;
    if (changed && target.any(meso_map(eta))) {
      pr.hit = true;
      pr.time = t;
      return pr;
    }
  }
  pr.time = budget;
  return pr;
}

}  // namespace rfcw

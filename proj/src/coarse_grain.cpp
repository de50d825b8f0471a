#include "rfcw/coarse_grain.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "rfcw/error.hpp"
#include "rfcw/exact_oracle.hpp"

namespace rfcw {

namespace {

void fill_block_stats(Partition& p, const FieldEnvironment& env) {
  p.rho.assign(p.n, 0.0);
  p.hbar.assign(p.n, 0.0);
  p.htilde.assign(p.N, 0.0);
  std::vector<double> lo(p.n, INFINITY), hi(p.n, -INFINITY);
  for (int x = 0; x < p.N; ++x) {
    int b = p.layout->block_of[x];
    p.hbar[b] += env.h[x];
    lo[b] = std::min(lo[b], env.h[x]);
    hi[b] = std::max(hi[b], env.h[x]);
  }
  p.max_spread = 0;
  for (int b = 0; b < p.n; ++b) {
    int sz = p.layout->sizes[b];
    p.rho[b] = static_cast<double>(sz) / p.N;
    if (sz > 0) {
      p.hbar[b] /= sz;
      p.max_spread = std::max(p.max_spread, hi[b] - lo[b]);
    }
  }
  for (int x = 0; x < p.N; ++x) p.htilde[x] = env.h[x] - p.hbar[p.layout->block_of[x]];
}

}  // namespace

Partition build_partition(const FieldEnvironment& env, int n) {
  if (n < 1) throw ConfigError("build_partition: n must be >= 1");
  const Interval I = env.support;
  if (env.N < 1 || !(I.lo <= I.hi) || !std::isfinite(I.lo) || !std::isfinite(I.hi))
    throw ConfigError("build_partition: empty field support");
  if (static_cast<int>(env.h.size()) != env.N) throw ContractViolation("build_partition: length(h) != N");
  Partition p;
  p.n = n;
  p.N = env.N;
  double w = I.width();
  p.edges.resize(n + 1);
  for (int k = 0; k <= n; ++k) p.edges[k] = I.lo + w * k / n;
  p.edges[n] = I.hi;
  std::vector<int> block(env.N, 0);
  for (int x = 0; x < env.N; ++x) {
    if (!I.contains(env.h[x])) throw ContractViolation("build_partition: field outside support");
    int b = w > 0 ? static_cast<int>(std::floor((env.h[x] - I.lo) / w * n)) : 0;
    block[x] = std::clamp(b, 0, n - 1);
  }
  p.layout = BlockLayout::make(std::move(block), n);
  fill_block_stats(p, env);
  return p;
}

Partition refine(const Partition& p, const FieldEnvironment& env) {
  Partition q;
  q.n = 2 * p.n;
  q.N = p.N;
  q.edges.resize(q.n + 1);
  for (int k = 0; k < p.n; ++k) {
    q.edges[2 * k] = p.edges[k];
    q.edges[2 * k + 1] = 0.5 * (p.edges[k] + p.edges[k + 1]);
  }
  q.edges[q.n] = p.edges[p.n];
  std::vector<int> block(p.N);
  for (int x = 0; x < p.N; ++x) {
    int b = p.block_of(x);
    block[x] = 2 * b + (env.h[x] >= q.edges[2 * b + 1] && q.edges[2 * b + 1] > p.edges[b] ? 1 : 0);
  }
  q.layout = BlockLayout::make(std::move(block), q.n);
  fill_block_stats(q, env);
  return q;
}

bool is_refinement(const Partition& fine, const Partition& coarse) {
  if (fine.N != coarse.N) return false;
  std::vector<int> parent(fine.n, -1);
  for (int x = 0; x < fine.N; ++x) {
    int f = fine.block_of(x), c = coarse.block_of(x);
    if (parent[f] == -1) parent[f] = c;
    if (parent[f] != c) return false;
  }
  return true;
}

nlohmann::json to_json(const Partition& p) {
  return {{"n", p.n},
          {"interval_edges", p.edges},
          {"block_assignment", p.layout->block_of},
          {"rho", p.rho},
          {"hbar", p.hbar},
          {"max_spread", p.max_spread}};
}

std::vector<double> MesoState::values() const {
  std::vector<double> v(sums.size());
  for (std::size_t l = 0; l < sums.size(); ++l) v[l] = static_cast<double>(sums[l]) / N;
  return v;
}

double MesoState::total() const {
  int t = 0;
  for (int s : sums) t += s;
  return static_cast<double>(t) / N;
}

MesoState meso_map(const SpinConfig& s, const Partition& p) {
  if (s.N() != p.N) throw ContractViolation("meso_map: size mismatch");
  if (s.layout_ptr() == p.layout || s.layout().block_of == p.layout->block_of) return {s.block_sums(), s.N()};
  std::vector<int> sums(p.n, 0);
  for (int x = 0; x < s.N(); ++x) sums[p.block_of(x)] += s[x];
  return {std::move(sums), s.N()};
}

MesoState meso_map(const SpinConfig& s) { return {s.block_sums(), s.N()}; }

bool on_grid(const MesoState& m, const BlockLayout& layout) {
  if (m.N != layout.N || m.blocks() != layout.n) return false;
  for (int l = 0; l < layout.n; ++l) {
    int sz = layout.sizes[l];
    if (std::abs(m.sums[l]) > sz || ((m.sums[l] + sz) & 1)) return false;
  }
  return true;
}

MesoState coarsen(const MesoState& fine, const Partition& fine_p, const Partition& coarse_p) {
  if (!is_refinement(fine_p, coarse_p)) throw ContractViolation("coarsen: partitions are not nested");
  std::vector<int> parent(fine_p.n, -1);
  for (int x = 0; x < fine_p.N; ++x) parent[fine_p.block_of(x)] = coarse_p.block_of(x);
  MesoState c{std::vector<int>(coarse_p.n, 0), fine.N};
  for (int l = 0; l < fine_p.n; ++l)
    if (parent[l] >= 0) c.sums[parent[l]] += fine.sums[l];
  return c;
}

namespace {

void check_chain_partition(const ExactChain& chain, const Partition& p) {
  if (chain.N() != p.N || chain.layout().block_of != p.layout->block_of)
    throw ContractViolation("exact chain and partition disagree on blocks");
}

// block index and direction (+1 / -1) of a one-flip move, or k = -1 if none
std::pair<int, int> one_flip_move(const MesoState& m, const MesoState& m2) {
  int k = -1, dir = 0;
  for (int l = 0; l < m.blocks(); ++l) {
    int d = m2.sums[l] - m.sums[l];
    if (d == 0) continue;
    if ((d != 2 && d != -2) || k >= 0) return {-1, 0};
    k = l;
    dir = d / 2;
  }
  return {k, dir};
}

}  // namespace

double lumped_rates_exact(const Partition& p, const MesoState& m, const MesoState& m2, const ExactChain& chain) {
  check_chain_partition(chain, p);
  if (!on_grid(m, *p.layout) || !on_grid(m2, *p.layout)) throw DomainError("lumped_rates_exact: state off grid");
  int id = chain.slice_id(m);
  if (id < 0) throw DomainError("lumped_rates_exact: empty slice");
  const auto& states = chain.slice(id);
  double Q = 0, S = 0;
  if (m == m2) {
    for (auto s : states) {
      Q += chain.mu(s);
      S += chain.mu(s) * chain.hold(s);
    }
    return S / Q;
  }
  auto [k, dir] = one_flip_move(m, m2);
  if (k < 0) return 0.0;
  const int from = dir > 0 ? -1 : 1;  // spins that flip
  const auto& blk = chain.layout().block_of;
  for (auto s : states) {
    double R = 0;
    for (int x = 0; x < chain.N(); ++x) {
      if (blk[x] != k) continue;
      int sx = (s >> x) & 1 ? 1 : -1;
      if (sx == from) R += chain.flip(s, x);
    }
    Q += chain.mu(s);
    S += chain.mu(s) * R;
  }
  return S / Q;
}

double lumped_rates_approx(const Partition& p, const MesoState& m, int k, int direction, double beta) {
  if (k < 0 || k >= p.n || (direction != 1 && direction != -1))
    throw ContractViolation("lumped_rates_approx: bad move");
  int sz = p.size(k);
  if (std::abs(m.sums[k]) > sz || ((m.sums[k] + sz) & 1)) throw DomainError("lumped_rates_approx: state off grid");
  // spins pointing against the move direction; none left means rate 0
  int count = direction > 0 ? (sz - m.sums[k]) / 2 : (sz + m.sums[k]) / 2;
  if (count == 0) return 0.0;
  int total = 0;
  for (int s : m.sums) total += s;
  // the flipping spin is excluded from its own field
  double g = static_cast<double>(total + direction) / m.N + p.hbar[k];
  double pp = 0.5 * (1.0 + direction * std::tanh(beta * g));
  return static_cast<double>(count) / m.N * pp;
}

double a1_certificate(const ExactChain& chain, const Partition& p) {
  check_chain_partition(chain, p);
  const auto& blk = chain.layout().block_of;
  const int N = chain.N();
  double worst = 0;
  for (int id = 0; id < chain.num_slices(); ++id) {
    const auto& states = chain.slice(id);
    double Q = 0;
    for (auto s : states) Q += chain.mu(s);
    for (int k = 0; k < p.n; ++k) {
      for (int dir : {1, -1}) {
        const int from = -dir;
        double S = 0;
        for (auto s : states) {
          double R = 0;
          for (int x = 0; x < N; ++x)
            if (blk[x] == k && (((s >> x) & 1) ? 1 : -1) == from) R += chain.flip(s, x);
          S += chain.mu(s) * R;
        }
        if (S <= 0) continue;
        for (auto s : states) {
          int K = 0;
          for (int x = 0; x < N; ++x)
            if (blk[x] == k && (((s >> x) & 1) ? 1 : -1) == from) ++K;
          for (int x = 0; x < N; ++x) {
            if (blk[x] != k || (((s >> x) & 1) ? 1 : -1) != from) continue;
            double ratio = chain.flip(s, x) * K * Q / S;
            worst = std::max(worst, std::abs(ratio - 1.0));
          }
        }
      }
    }
  }
  return worst;
}

double required_nu(const HeatBathRule& rule, const Partition& p) {
  const int N = rule.N();
  std::vector<double> lo(p.n, INFINITY), hi(p.n, -INFINITY);
  for (int x = 0; x < N; ++x) {
    lo[p.block_of(x)] = std::min(lo[p.block_of(x)], rule.field(x));
    hi[p.block_of(x)] = std::max(hi[p.block_of(x)], rule.field(x));
  }
  // p+ is increasing in the field, so extreme ratios pair the block's extreme sites
  std::vector<int> xlo(p.n, -1), xhi(p.n, -1);
  for (int x = 0; x < N; ++x) {
    int b = p.block_of(x);
    if (rule.field(x) == lo[b] && xlo[b] < 0) xlo[b] = x;
    if (rule.field(x) == hi[b] && xhi[b] < 0) xhi[b] = x;
  }
  double nu = 0;
  for (int b = 0; b < p.n; ++b) {
    if (p.empty(b)) continue;
    for (int others = -(N - 1); others <= N - 1; others += 1) {
      double a = rule.p_plus(xhi[b], others), c = rule.p_plus(xlo[b], others);
      // residual r >= 0 iff p_target(y) / p_target(I) >= 1 - nu
      nu = std::max(nu, 1.0 - c / a);
      nu = std::max(nu, 1.0 - (1.0 - a) / (1.0 - c));
    }
  }
  return nu;
}

}  // namespace rfcw

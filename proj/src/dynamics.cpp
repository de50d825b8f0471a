#include "rfcw/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "rfcw/error.hpp"

namespace rfcw {

bool contains(const Target& t, std::span<const int> sums, int N) {
  if (auto* s = std::get_if<SliceTarget>(&t)) {
    return std::equal(s->sums.begin(), s->sums.end(), sums.begin(), sums.end());
  }
  if (auto* h = std::get_if<HalfSpaceTarget>(&t)) {
    double v = 0;
    for (std::size_t l = 0; l < sums.size(); ++l) v += h->weights[l] * sums[l];
    v /= N;
    return h->below ? v <= h->threshold : v >= h->threshold;
  }
  auto& b = std::get<BallTarget>(t);
  double d = 0;
  for (std::size_t l = 0; l < sums.size(); ++l) d += std::abs(static_cast<double>(sums[l]) / N - b.center[l]);
  bool in = d <= b.radius + 1e-12;
  return b.outside ? !in : in;
}

std::string describe(const Target& t) {
  std::ostringstream os;
  os.precision(17);
  if (auto* s = std::get_if<SliceTarget>(&t)) {
    os << "slice[";
    for (std::size_t i = 0; i < s->sums.size(); ++i) os << (i ? " " : "") << s->sums[i];
    os << "]";
  } else if (auto* h = std::get_if<HalfSpaceTarget>(&t)) {
    os << "halfspace[";
    for (std::size_t i = 0; i < h->weights.size(); ++i) os << (i ? " " : "") << h->weights[i];
    os << (h->below ? " <= " : " >= ") << h->threshold << "]";
  } else {
    auto& b = std::get<BallTarget>(t);
    os << (b.outside ? "outside_ball[" : "ball[");
    for (std::size_t i = 0; i < b.center.size(); ++i) os << (i ? " " : "") << b.center[i];
    os << " r=" << b.radius << "]";
  }
  return os.str();
}

HittingRecord run_until_hit(SpinConfig s, const StoppingSpec& spec, const HeatBathRule& rule, RngStream& rng) {
  if (spec.cap < 1) throw ContractViolation("run_until_hit: cap must be >= 1");
  if (s.N() != rule.N()) throw ContractViolation("run_until_hit: size mismatch");
  HittingRecord rec;
  const int N = s.N();
  step(s, rule, rng);
  std::uint64_t t = 1;
  int hit = spec.first_hit(s.block_sums(), N);
  // membership can only change when a spin does
  while (hit < 0 && t < spec.cap) {
    bool changed = step(s, rule, rng);
    ++t;
    if (changed) hit = spec.first_hit(s.block_sums(), N);
  }
  rec.hit_index = hit;
  rec.time = t;
  rec.truncated = hit < 0;
  rec.final_state = std::move(s);
  return rec;
}

SpinConfig sample_uniform_on_slice(const MesoState& m, const std::shared_ptr<const BlockLayout>& layout,
                                   RngStream& rng) {
  if (!on_grid(m, *layout)) throw DomainError("sample_uniform_on_slice: state off grid");
  std::vector<std::vector<int>> sites(layout->n);
  for (int x = 0; x < layout->N; ++x) sites[layout->block_of[x]].push_back(x);
  std::vector<std::int8_t> spins(layout->N, -1);
  for (int l = 0; l < layout->n; ++l) {
    auto& v = sites[l];
    int plus = (layout->sizes[l] + m.sums[l]) / 2;
    // partial Fisher-Yates: the first `plus` sites become +1
    for (int i = 0; i < plus; ++i) {
      int j = i + static_cast<int>(rng.index(static_cast<std::uint32_t>(v.size() - i)));
      std::swap(v[i], v[j]);
      spins[v[i]] = 1;
    }
  }
  return SpinConfig(std::move(spins), layout);
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

std::vector<HittingRecord> run_ensemble(const std::function<SpinConfig(std::uint32_t, RngStream&)>& start,
                                        const StoppingSpec& spec, const HeatBathRule& rule, const EnsembleSpec& ens) {
  std::function<HittingRecord(std::uint64_t)> one = [&](std::uint64_t i) {
    auto id = static_cast<std::uint32_t>(ens.first_trajectory + i);
    RngStream srng(ens.seed, id, substreams::kStart);
    SpinConfig s0 = start(id, srng);
    RngStream rng(ens.seed, id, substreams::kChain);
    return run_until_hit(std::move(s0), spec, rule, rng);
  };
  return parallel_map<HittingRecord>(ens.count, ens.threads, one);
}

}  // namespace rfcw

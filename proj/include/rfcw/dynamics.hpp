#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rfcw/coarse_grain.hpp"
#include "rfcw/model.hpp"
#include "rfcw/rng.hpp"

namespace rfcw {

// one grid point: block sums equal `sums`
struct SliceTarget {
  std::vector<int> sums;
};
// sum_l w_l m_l <= threshold (or >= when !below)
struct HalfSpaceTarget {
  std::vector<double> weights;
  double threshold = 0;
  bool below = true;
};
// ||m - center||_1 <= radius; with outside = true the complement
struct BallTarget {
  std::vector<double> center;
  double radius = 0;
  bool outside = false;
};
using Target = std::variant<SliceTarget, HalfSpaceTarget, BallTarget>;

bool contains(const Target& t, std::span<const int> sums, int N);
inline bool contains(const Target& t, const MesoState& m) { return contains(t, m.sums, m.N); }
std::string describe(const Target& t);

inline constexpr std::uint64_t kDefaultCap = 10'000'000'000ULL;

struct StoppingSpec {
  std::vector<Target> targets;
  std::uint64_t cap = kDefaultCap;

  // index of the first target containing the state, or -1
  int first_hit(std::span<const int> sums, int N) const {
    for (std::size_t i = 0; i < targets.size(); ++i)
      if (contains(targets[i], sums, N)) return static_cast<int>(i);
    return -1;
  }
  bool any(const MesoState& m) const { return first_hit(m.sums, m.N) >= 0; }
};

struct HittingRecord {
  int hit_index = -1;
  std::uint64_t time = 0;
  SpinConfig final_state;
  bool truncated = false;
};

// one heat-bath update; exactly two 64-bit draws (site, spin). Returns true if the spin changed.
inline bool step(SpinConfig& s, const HeatBathRule& rule, RngStream& rng) {
  int x = static_cast<int>(rng.index(static_cast<std::uint32_t>(s.N())));
  double u = rng.uniform();
  int v = u < rule.p_plus(x, s.total_sum() - s[x]) ? 1 : -1;
  if (s[x] == v) return false;
  s.set(x, static_cast<std::int8_t>(v));
  return true;
}

// targets are tested after every step, so the earliest possible hit is t = 1
HittingRecord run_until_hit(SpinConfig s, const StoppingSpec& spec, const HeatBathRule& rule, RngStream& rng);

// uniform configuration with the given block sums
SpinConfig sample_uniform_on_slice(const MesoState& m, const std::shared_ptr<const BlockLayout>& layout,
                                   RngStream& rng);

int resolve_threads(int requested);

// runs f(i) for i in [0, count) on a worker pool; results stay ordered by index
template <class R>
std::vector<R> parallel_map(std::uint64_t count, int threads, const std::function<R(std::uint64_t)>& f);

struct EnsembleSpec {
  std::uint64_t seed = 0;
  std::uint32_t first_trajectory = 0;
  std::uint64_t count = 0;
  int threads = 1;
};

// trajectory i draws its start from substream 1 and its path from substream 0 of stream i
std::vector<HittingRecord> run_ensemble(const std::function<SpinConfig(std::uint32_t, RngStream&)>& start,
                                        const StoppingSpec& spec, const HeatBathRule& rule, const EnsembleSpec& ens);

}  // namespace rfcw

#include "rfcw/detail/parallel.hpp"

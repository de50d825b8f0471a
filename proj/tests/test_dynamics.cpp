#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "rfcw/coarse_grain.hpp"
#include "rfcw/dynamics.hpp"
#include "rfcw/stats.hpp"
#include "testing.hpp"

using namespace rfcw;

TEST_CASE("a step uses exactly two draws and is reproducible") {
  auto env = sample_fields(parse_field_law("uniform(-0.2,0.2)"), 12, 1);
  HeatBathRule rule(env, ModelParams{1.2, 0.999});
  auto layout = BlockLayout::single(12);
  auto a = SpinConfig::constant(1, layout), b = a;
  RngStream ra(3, 5, 0), rb(3, 5, 0);
  for (int i = 0; i < 1000; ++i) {
    auto before = ra.draws();
    step(a, rule, ra);
    CHECK(ra.draws() == before + 2);
    step(b, rule, rb);
    REQUIRE(a == b);
  }
}

TEST_CASE("beta = 0: a freshly updated spin is a fair coin") {
  auto env = sample_fields(parse_field_law("uniform(-1,1)"), 5, 2);
  HeatBathRule rule(env, ModelParams{0.0, 0.999});
  auto layout = BlockLayout::single(5);
  RngStream rng(1, 0, 0);
  int plus = 0, trials = 0;
  for (int i = 0; i < 40000; ++i) {
    auto s = SpinConfig::constant(1, layout);
    RngStream peek = rng;
    int x = static_cast<int>(peek.index(5));
    step(s, rule, rng);
    if (x == 2) {
      ++trials;
      plus += s[2] > 0;
    }
  }
  CHECK(std::abs(plus - trials / 2.0) < 4 * std::sqrt(trials / 4.0));
}

TEST_CASE("one-step law matches the reference kernel at N = 4") {
  std::vector<double> h{0.3, -0.1, 0.2, -0.4};
  const double beta = 1.1;
  auto env = explicit_fields(h);
  HeatBathRule rule(env, ModelParams{beta, 0.999});
  auto P = ref::kernel(h, beta);
  auto layout = BlockLayout::single(4);
  for (std::uint32_t s0 : {0u, 5u, 14u}) {
    std::vector<double> obs(16, 0.0), prob(16);
    for (int t = 0; t < 16; ++t) prob[t] = P(s0, t);
    RngStream rng(11, s0, 0);
    for (int i = 0; i < 1000000; ++i) {
      auto s = SpinConfig::from_bits(s0, layout);
      step(s, rule, rng);
      obs[s.bits()] += 1;
    }
    auto chi = chi_square_gof(obs, prob);
    CHECK(chi.p_value > 0.01);
  }
}

TEST_CASE("hitting: t > 0 convention, whole space, truncation") {
  auto env = explicit_fields(std::vector<double>(6, 0.0));
  HeatBathRule rule(env, ModelParams{1.0, 0.999});
  auto layout = BlockLayout::single(6);
  auto s = SpinConfig::constant(-1, layout);
  StoppingSpec all{{HalfSpaceTarget{{1.0}, 2.0, true}}, 100};
  RngStream rng(1, 0, 0);
  auto r = run_until_hit(s, all, rule, rng);
  CHECK(r.time == 1);
  CHECK(r.hit_index == 0);
  CHECK_FALSE(r.truncated);
  // starting inside the target still takes a step
  StoppingSpec here{{SliceTarget{{-6}}}, 1000};
  RngStream rng2(2, 0, 0);
  auto r2 = run_until_hit(s, here, rule, rng2);
  CHECK(r2.time >= 1);
  CHECK(contains(here.targets[0], meso_map(r2.final_state)));
  StoppingSpec never{{SliceTarget{{6}}}, 5};
  auto r3 = run_until_hit(s, never, rule, rng);
  CHECK(r3.truncated);
  CHECK(r3.time == 5);
  CHECK(r3.hit_index == -1);
}

TEST_CASE("mean hitting time at N = 6 matches the linear-solve reference") {
  std::vector<double> h{0.05, -0.05, 0.02, -0.02, 0.0, 0.01};
  const double beta = 1.5;
  auto env = explicit_fields(h);
  HeatBathRule rule(env, ModelParams{beta, 0.999});
  auto layout = BlockLayout::single(6);
  auto P = ref::kernel(h, beta);
  std::vector<char> inB(64);
  for (int s = 0; s < 64; ++s) inB[s] = 2 * __builtin_popcount(s) - 6 >= 4;
  auto tau = ref::hitting(P, inB);
  StoppingSpec B{{HalfSpaceTarget{{1.0}, 4.0 / 6, false}}, 100000000};
  EnsembleSpec es{17, 0, 10000, 1};
  auto recs = run_ensemble([&](std::uint32_t, RngStream&) { return SpinConfig::constant(-1, layout); }, B, rule, es);
  auto res = summarize(recs, "all minus");
  CHECK(res.truncation_count == 0);
  CHECK(std::abs(res.mean - tau(0)) < 3 * res.standard_error);
}

TEST_CASE("ensembles do not depend on the worker count") {
  auto env = sample_fields(parse_field_law("uniform(-0.1,0.1)"), 10, 4);
  HeatBathRule rule(env, ModelParams{1.3, 0.999});
  auto layout = BlockLayout::single(10);
  StoppingSpec B{{HalfSpaceTarget{{1.0}, 0.4, false}}, 1000000};
  auto start = [&](std::uint32_t, RngStream& r) { return sample_uniform_on_slice(MesoState{{-6}, 10}, layout, r); };
  EnsembleSpec one{5, 0, 200, 1}, many{5, 0, 200, 3};
  auto a = run_ensemble(start, B, rule, one);
  auto b = run_ensemble(start, B, rule, many);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].time == b[i].time);
    CHECK(a[i].final_state == b[i].final_state);
  }
}

TEST_CASE("enlarging a target never delays the hit on a shared stream") {
  auto env = sample_fields(parse_field_law("uniform(-0.1,0.1)"), 10, 4);
  HeatBathRule rule(env, ModelParams{1.3, 0.999});
  auto layout = BlockLayout::single(10);
  StoppingSpec small{{HalfSpaceTarget{{1.0}, 0.6, false}}, 1000000};
  StoppingSpec big{{HalfSpaceTarget{{1.0}, 0.2, false}}, 1000000};
  for (std::uint32_t i = 0; i < 200; ++i) {
    RngStream r1(8, i, 0), r2(8, i, 0);
    auto s0 = SpinConfig::constant(-1, layout);
    CHECK(run_until_hit(s0, big, rule, r2).time <= run_until_hit(s0, small, rule, r1).time);
  }
}

TEST_CASE("uniform sampling on a slice") {
  std::vector<int> blk{0, 0, 0, 1, 1, 1};
  auto layout = BlockLayout::make(blk, 2);
  MesoState m{{1, -1}, 6};
  std::map<std::uint64_t, double> counts;
  RngStream rng(3, 0, 1);
  const int n = 90000;
  for (int i = 0; i < n; ++i) {
    auto s = sample_uniform_on_slice(m, layout, rng);
    REQUIRE(s.block_sums() == m.sums);
    counts[s.bits()] += 1;
  }
  CHECK(counts.size() == 9);
  std::vector<double> obs, prob;
  for (auto& [k, c] : counts) {
    obs.push_back(c);
    prob.push_back(1.0 / 9);
  }
  CHECK(chi_square_gof(obs, prob).p_value > 0.01);
}

TEST_CASE("target membership") {
  CHECK(contains(Target{SliceTarget{{2, -2}}}, MesoState{{2, -2}, 8}));
  CHECK_FALSE(contains(Target{SliceTarget{{2, -2}}}, MesoState{{2, 0}, 8}));
  CHECK(contains(Target{HalfSpaceTarget{{1, 1}, 0.0, true}}, MesoState{{2, -4}, 8}));
  CHECK(contains(Target{BallTarget{{0.25, -0.25}, 0.25, false}}, MesoState{{2, -4}, 8}));
  CHECK_FALSE(contains(Target{BallTarget{{0.25, -0.25}, 0.25, true}}, MesoState{{2, -4}, 8}));
  CHECK(describe(Target{SliceTarget{{1, 3}}}) == "slice[1 3]");
}

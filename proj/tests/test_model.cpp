#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <nlohmann/json.hpp>

#include "rfcw/error.hpp"
#include "rfcw/model.hpp"
#include "rfcw/rng.hpp"
#include "testing.hpp"

using namespace rfcw;

namespace {
SpinConfig make(std::vector<std::int8_t> s, std::shared_ptr<const BlockLayout> layout = nullptr) {
  if (!layout) layout = BlockLayout::single(static_cast<int>(s.size()));
  return SpinConfig(std::move(s), layout);
}
}  // namespace

TEST_CASE("degenerate discrete law gives zero fields") {
  auto env = sample_fields(parse_field_law("discrete(0:1)"), 8, 1);
  CHECK(env.h == std::vector<double>(8, 0.0));
  CHECK(env.support.lo == 0.0);
  CHECK(env.support.hi == 0.0);
}

TEST_CASE("field sampling is deterministic") {
  auto a = sample_fields(parse_field_law("uniform(-1,1)"), 4, 7);
  auto b = sample_fields(parse_field_law("uniform(-1,1)"), 4, 7);
  CHECK(a.h == b.h);
  for (double h : a.h) CHECK(a.support.contains(h));
  auto g = sample_fields(parse_field_law("gaussian(0.5,2)"), 50, 9);
  for (double h : g.h) CHECK(g.support.contains(h));
}

TEST_CASE("two-point field mean obeys the CLT bound across seeds") {
  const double eps = 0.1;
  const int N = 10000;
  const double bound = 4 * eps / std::sqrt(double(N));
  for (std::uint64_t seed = 3; seed < 103; ++seed) {
    auto env = sample_fields(parse_field_law("discrete(-0.1:1,0.1:1)"), N, seed);
    double m = 0;
    for (double h : env.h) m += h;
    CHECK(std::abs(m / N) <= bound);
  }
}

TEST_CASE("invalid field laws are configuration errors") {
  CHECK_THROWS_AS(parse_field_law("discrete()"), ConfigError);
  CHECK_THROWS_AS(parse_field_law("discrete(1:0)"), ConfigError);
  CHECK_THROWS_AS(parse_field_law("uniform(1,0)"), ConfigError);
  CHECK_THROWS_AS(parse_field_law("cauchy(0,1)"), ConfigError);
  CHECK_THROWS_AS(parse_field_law("gaussian(0,-1)"), ConfigError);
}

TEST_CASE("environment json round trip is bit exact") {
  auto env = sample_fields(parse_field_law("gaussian(0.1,0.3)"), 17, 12345);
  auto back = environment_from_json(nlohmann::json::parse(to_json(env).dump()));
  CHECK(back.N == env.N);
  CHECK(back.seed == env.seed);
  CHECK(back.h == env.h);
  CHECK(to_string(back.law) == to_string(env.law));
}

TEST_CASE("hamiltonian") {
  auto env = explicit_fields({0.1, -0.2, 0.3});
  CHECK(hamiltonian(make({1, 1, -1}), env) == doctest::Approx(-1.5 / 9 - (0.1 - 0.2 - 0.3)).epsilon(1e-14));
  CHECK(hamiltonian(make({1, 1, -1}), env) == doctest::Approx(0.2333333333333333).epsilon(1e-14));
  auto zero = explicit_fields(std::vector<double>(6, 0.0));
  auto up = SpinConfig::constant(1, BlockLayout::single(6));
  CHECK(hamiltonian(up, zero) == doctest::Approx(-3.0));
  auto s = make({1, -1, -1, 1, 1, 1});
  auto t = make({-1, 1, 1, -1, -1, -1});
  CHECK(hamiltonian(s, zero) == hamiltonian(t, zero));
  CHECK_THROWS_AS(hamiltonian(make({1, 1}), env), ContractViolation);
}

TEST_CASE("flip probabilities") {
  auto env = explicit_fields({0.3, -0.4, 0.2});
  for (int x = 0; x < 3; ++x) {
    auto fp = flip_prob(make({1, -1, 1}), x, env, ModelParams{0.0, 0.999});
    CHECK(fp.p_plus == 0.5);
    CHECK(fp.p_minus == 0.5);
  }
  // zero local field
  auto env2 = explicit_fields({0.0, 0.0, 0.0});
  auto fz = flip_prob(make({1, -1, 1}), 0, env2, ModelParams{2.0, 0.999});
  CHECK(fz.p_plus == 0.5);
  CHECK(fz.p_minus == 0.5);
  auto env3 = explicit_fields({0.0, 0.0});
  auto f3 = flip_prob(make({1, -1}), 0, env3, ModelParams{1.0, 0.999});
  CHECK(f3.p_plus == doctest::Approx((1 + std::tanh(-0.5)) / 2).epsilon(1e-15));
  CHECK(f3.p_plus == doctest::Approx(0.2689414213699951).epsilon(1e-14));
  CHECK(f3.p_plus + f3.p_minus == 1.0);
}

TEST_CASE("beta must be positive and alpha cap in range") {
  CHECK_THROWS_AS((ModelParams{-1.0, 0.9}.validate()), ConfigError);
  CHECK_THROWS_AS((ModelParams{1.0, 1.0}.validate()), ConfigError);
  CHECK_THROWS_AS((ModelParams{1.0, 0.4}.validate()), ConfigError);
}

TEST_CASE("alpha bound violation is detected at construction") {
  auto env = explicit_fields({2.0, -2.0, 0.0, 1.0});
  CHECK_THROWS_AS(HeatBathRule(env, ModelParams{3.0, 0.99}), AlphaBoundError);
  HeatBathRule ok(env, ModelParams{0.5, 0.99});
  CHECK(ok.alpha_bound() == doctest::Approx((1 + std::tanh(0.5 * 3.0)) / 2));
}

TEST_CASE("log gibbs weight") {
  auto zero = explicit_fields(std::vector<double>(4, 0.0));
  auto up = SpinConfig::constant(1, BlockLayout::single(4));
  CHECK(log_gibbs_weight(up, zero, ModelParams{1.0, 0.999}) == doctest::Approx(2.0));
  auto env = explicit_fields({0.1, 0.5, -0.3, 0.2});
  CHECK(log_gibbs_weight(make({1, -1, 1, 1}), env, ModelParams{0.0, 0.999}) == 0.0);
}

TEST_CASE("detailed balance and agreement with the reference kernel, N <= 10") {
  for (int N : {2, 5, 8, 10}) {
    auto env = sample_fields(parse_field_law("uniform(-0.5,0.5)"), N, 100 + N);
    ModelParams params{1.3, 0.999};
    HeatBathRule rule(env, params);
    auto layout = BlockLayout::single(N);
    double worst = 0;
    for (std::uint32_t s = 0; s < (1u << N); ++s) {
      auto sc = SpinConfig::from_bits(s, layout);
      double lw = log_gibbs_weight(sc, env, params);
      CHECK(lw == doctest::Approx(-params.beta * ref::energy(s, env.h)).epsilon(1e-12));
      for (int x = 0; x < N; ++x) {
        CHECK(rule.probs(sc, x).p_plus == doctest::Approx(ref::p_plus(s, x, env.h, params.beta)).epsilon(1e-14));
        auto t = sc;
        t.flip(x);
        double a = lw + std::log(rule.prob_to(sc, x, -sc[x]) / N);
        double b = log_gibbs_weight(t, env, params) + std::log(rule.prob_to(t, x, sc[x]) / N);
        worst = std::max(worst, std::abs(std::expm1(a - b)));
      }
    }
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("flip probabilities depend only on the site and the other spins' sum") {
  for (int N : {6, 9, 10}) {
    for (int n : {1, 2, 3}) {
      std::vector<int> blk(N);
      for (int x = 0; x < N; ++x) blk[x] = x % n;
      auto layout = BlockLayout::make(blk, n);
      auto env = sample_fields(parse_field_law("uniform(-1,1)"), N, 11 * N + n);
      HeatBathRule rule(env, ModelParams{0.7, 0.999});
      std::vector<std::vector<std::uint32_t>> by_meso;
      std::map<std::vector<int>, std::vector<std::uint32_t>> groups;
      for (std::uint32_t s = 0; s < (1u << N); ++s)
        groups[SpinConfig::from_bits(s, layout).block_sums()].push_back(s);
      bool ok = true;
      for (auto& [k, v] : groups) {
        auto a = SpinConfig::from_bits(v.front(), layout);
        for (auto s : v) {
          auto b = SpinConfig::from_bits(s, layout);
          for (int x = 0; x < N; ++x)
            if (a[x] == b[x] && rule.probs(a, x).p_plus != rule.probs(b, x).p_plus) ok = false;
        }
      }
      CHECK(ok);
    }
  }
}

TEST_CASE("probabilities are monotone in the local field") {
  auto env = explicit_fields({-0.3, 0.0, 0.3, 0.1, 0.2});
  HeatBathRule rule(env, ModelParams{1.1, 0.999});
  for (int x = 0; x < 5; ++x)
    for (int o = -4; o < 4; o += 2) {
      double a = rule.p_plus(x, o), b = rule.p_plus(x, o + 2);
      CHECK(a > 0);
      CHECK(b < 1);
      CHECK(a < b);
    }
}

TEST_CASE("incremental block sums stay consistent") {
  std::vector<int> blk{0, 1, 2, 0, 1, 2, 0, 0, 1, 2, 2};
  auto layout = BlockLayout::make(blk, 3);
  auto s = SpinConfig::constant(-1, layout);
  RngStream rng(5, 0, 0);
  for (int i = 0; i < 5000; ++i) {
    int x = rng.index(11);
    if (rng.uniform() < 0.5) s.flip(x);
    else s.set(x, rng.uniform() < 0.5 ? 1 : -1);
  }
  CHECK(s.caches_consistent());
  int tot = 0;
  for (int l = 0; l < 3; ++l) {
    tot += s.block_sums()[l];
    CHECK(std::abs(s.block_sums()[l]) <= layout->sizes[l]);
    CHECK(((s.block_sums()[l] - layout->sizes[l]) % 2 + 2) % 2 == 0);
  }
  CHECK(tot == s.total_sum());
  CHECK(SpinConfig::from_bits(s.bits(), layout) == s);
}

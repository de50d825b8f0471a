#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rfcw/coarse_grain.hpp"
#include "rfcw/error.hpp"
#include "rfcw/exact_oracle.hpp"
#include "rfcw/rng.hpp"
#include "rfcw/stats.hpp"

using namespace rfcw;

namespace {

std::vector<double> exp1(std::size_t n, std::uint64_t seed) {
  RngStream r(seed, 0, 0);
  std::vector<double> v(n);
  for (auto& x : v) x = r.exponential();
  return v;
}

std::vector<double> unif02(std::size_t n, std::uint64_t seed) {
  RngStream r(seed, 0, 0);
  std::vector<double> v(n);
  for (auto& x : v) x = 2 * r.uniform();
  return v;
}

// sup_x |F(x) - (1 - e^{-x})| for U(0,2), scanned on a fine grid
double uniform_exp_distance() {
  double best = 0;
  for (int i = 0; i <= 4000000; ++i) {
    double x = i * 1e-6;
    double F = std::min(1.0, x / 2);
    best = std::max(best, std::abs(F - (1 - std::exp(-x))));
  }
  return best;
}

}  // namespace

TEST_CASE("summary statistics") {
  auto e = summarize({1.0, 2.0, 3.0, 6.0}, 1, "x");
  CHECK(e.mean == doctest::Approx(3.0));
  CHECK(e.variance == doctest::Approx(14.0 / 3));
  CHECK(e.standard_error == doctest::Approx(std::sqrt(14.0 / 3 / 4)));
  CHECK(e.truncation_rate() == doctest::Approx(0.2));
  CHECK(e.ks_statistic >= 0);
  CHECK(e.ks_statistic <= 1);
}

TEST_CASE("Kolmogorov distribution and critical value") {
  CHECK(ks_critical(0.01) == doctest::Approx(1.6276).epsilon(1e-4));
  CHECK(ks_critical(0.05) == doctest::Approx(1.3581).epsilon(1e-4));
  CHECK(kolmogorov_cdf(1.6276) == doctest::Approx(0.99).epsilon(1e-3));
  CHECK(kolmogorov_cdf(0.5) == doctest::Approx(0.036055).epsilon(1e-4));
  CHECK(kolmogorov_cdf(1.0) == doctest::Approx(0.730000).epsilon(1e-3));
  CHECK(kolmogorov_cdf(0.0) == 0.0);
}

TEST_CASE("exponential-law harness") {
  SUBCASE("Exp(1) passes") {
    auto r = exponential_law_test(exp1(10000, 1));
    CHECK(r.verdict == Verdict::Pass);
    CHECK(r.critical == doctest::Approx(ks_critical(0.01) / 100));
  }
  SUBCASE("Uniform(0,2) fails, with the predicted distance") {
    const double d = uniform_exp_distance();
    CHECK(d == doctest::Approx(0.5 - 0.5 * std::log(2.0)).epsilon(1e-6));
    auto r = exponential_law_test(unif02(10000, 2));
    CHECK(r.verdict == Verdict::Fail);
    CHECK(std::abs(r.ks - d) < 0.02);
  }
  SUBCASE("a two-rate mixture is rejected") {
    RngStream g(3, 0, 0);
    std::vector<double> v(10000);
    for (auto& x : v) x = g.uniform() < 0.5 ? 2.0 * g.exponential() : 0.5 * g.exponential();
    CHECK(exponential_law_test(v).verdict == Verdict::Fail);
  }
  SUBCASE("heavy truncation makes the verdict inconclusive") {
    auto r = exponential_law_test(exp1(1000, 4), 50);
    CHECK(r.verdict == Verdict::Inconclusive);
  }
  SUBCASE("too few samples") { CHECK_THROWS_AS(exponential_law_test(exp1(50, 5)), ContractViolation); }
  SUBCASE("scale invariance") {
    auto v = exp1(2000, 6);
    auto w = v;
    for (auto& x : w) x *= 1234.5;
    CHECK(exponential_law_test(v).ks == doctest::Approx(exponential_law_test(w).ks).epsilon(1e-12));
  }
}

TEST_CASE("two-sample KS and chi-square") {
  auto a = exp1(5000, 7), b = exp1(5000, 8);
  CHECK(two_sample_ks(a, b).p_value > 0.01);
  CHECK(two_sample_ks(a, unif02(5000, 9)).p_value < 1e-6);
  std::vector<double> obs{250, 260, 240, 250}, probs{0.25, 0.25, 0.25, 0.25};
  auto c = chi_square_gof(obs, probs);
  CHECK(c.statistic == doctest::Approx(0.8));
  CHECK(c.dof == 3);
  CHECK(c.p_value > 0.8);
  std::vector<double> bad{400, 200, 200, 200};
  CHECK(chi_square_gof(bad, probs).p_value < 1e-10);
}

TEST_CASE("Kramers regression") {
  SUBCASE("synthetic log tau = a + b N + noise recovers b") {
    RngStream g(10, 0, 0);
    std::vector<int> Ns;
    std::vector<double> means;
    for (int N = 40; N <= 100; N += 10) {
      double noise = 0.05 * std::sqrt(-2 * std::log(g.uniform())) * std::cos(2 * M_PI * g.uniform());
      Ns.push_back(N);
      means.push_back(N * std::exp(1.5 + 0.08 * N + noise));
    }
    auto k = kramers_regression(Ns, means, 0.08);
    CHECK(k.fit.r2 >= 0.99);
    CHECK(k.relative_error < 0.1);
  }
  SUBCASE("too few sizes and nonpositive means are refused") {
    CHECK_THROWS_AS(kramers_regression({10, 20, 30}, {1, 2, 3}, 1.0), ContractViolation);
    CHECK_THROWS_AS(kramers_regression({10, 20, 30, 40}, {1, 2, 0, 3}, 1.0), DomainError);
  }
  SUBCASE("ols on exact data") {
    auto f = ols({1, 2, 3, 4}, {3, 5, 7, 9});
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
    CHECK(f.r2 == doctest::Approx(1.0));
  }
}

TEST_CASE("flatness") {
  auto env = sample_fields(parse_field_law("uniform(-0.1,0.1)"), 8, 2);
  HeatBathRule rule(env, ModelParams{1.2, 0.999});
  auto layout = BlockLayout::single(8);
  StoppingSpec B;
  B.targets = {HalfSpaceTarget{{1.0}, 0.5, false}};
  FlatnessOptions opt;
  opt.trajectories = 2000;
  opt.seed = 4;

  SUBCASE("the same start twice with the same streams gives deviation 0") {
    auto s = SpinConfig::from_bits(0b00000011, layout);
    auto e = flatness_test({s, s}, B, rule, opt);
    // distinct stream ranges, so only the reuse of one ensemble is exact
    CHECK(e.max_deviation > 0);
    auto again = flatness_test({s, s}, B, rule, opt);
    CHECK(again.max_deviation == e.max_deviation);
    auto twice = flatness_from({e.ensembles[0], e.ensembles[0]});
    CHECK(twice.max_deviation == 0.0);
  }

  SUBCASE("Laplace transforms: lambda = 0 gives 1, Jensen lower bound, exact agreement") {
    auto s1 = SpinConfig::from_bits(0b00000001, layout), s2 = SpinConfig::from_bits(0b00100100, layout);
    auto rep = flatness_test({s1, s2}, B, rule, opt);
    auto lap = laplace_flatness(rep.ensembles, {0.0, 0.5, 1.0, 2.0});
    CHECK(lap.grid[0].max_deviation == 0.0);
    for (double R : lap.grid[0].R) CHECK(R == 1.0);
    for (const auto& g : lap.grid)
      for (std::size_t i = 0; i < 2; ++i)
        CHECK(g.R[i] >= std::exp(-g.lambda * rep.ensembles[i].mean / lap.T) * (1 - 1e-12));

    ExactChain chain(env, ModelParams{1.2, 0.999}, layout);
    auto Bset = chain.states_where([](const MesoState& m) { return m.total() >= 0.5; });
    for (std::size_t i = 0; i < 2; ++i) {
      auto start = i == 0 ? s1 : s2;
      // hitting counted from t = 1: one step, then the Laplace transform
      double z = std::exp(-1.0 / lap.T);
      auto u = laplace_transform_all(chain, Bset, 1.0, lap.T);
      auto x = ExactChain::index(start);
      double exact = z * chain.hold(x) * u[x];
      for (int k = 0; k < 8; ++k) exact += z * chain.flip(x, k) * u[x ^ (1u << k)];
      CHECK(std::abs(lap.grid[2].R[i] - exact) <= 3 * lap.grid[2].se[i]);
    }
  }
}

TEST_CASE("bootstrap, survival curve and Wilson interval") {
  auto v = exp1(2000, 11);
  auto e = summarize(v, 0, "exp");
  auto bm = bootstrap_means(v, 500, 3);
  double m = std::accumulate(bm.begin(), bm.end(), 0.0) / bm.size();
  CHECK(std::abs(m - e.mean) <= e.standard_error);
  CHECK(bootstrap_means(v, 500, 3) == bm);

  auto sc = survival_curve(v);
  REQUIRE(sc.size() == v.size());
  for (std::size_t i = 1; i < sc.size(); ++i) {
    CHECK(sc[i].t >= sc[i - 1].t);
    CHECK(sc[i].empirical <= sc[i - 1].empirical);
  }

  auto w = wilson_interval(50, 100);
  CHECK(w.lo < 0.5);
  CHECK(w.hi > 0.5);
  auto z = wilson_interval(0, 100);
  CHECK(z.lo == 0.0);
  CHECK(z.hi > 0);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "rfcw/coarse_grain.hpp"
#include "rfcw/error.hpp"
#include "rfcw/exact_oracle.hpp"
#include "rfcw/rng.hpp"
#include "testing.hpp"

using namespace rfcw;

namespace {

// sum over slice pairs of mu(s) P(s,s') straight from the dense reference
double lumped_reference(const std::vector<double>& h, double beta, const BlockLayout& L, const std::vector<int>& m,
                        const std::vector<int>& m2) {
  auto P = ref::kernel(h, beta);
  auto mu = ref::gibbs(h, beta);
  auto sums = [&](std::uint32_t s) {
    std::vector<int> v(L.n, 0);
    for (int x = 0; x < L.N; ++x) v[L.block_of[x]] += ref::spin(s, x);
    return v;
  };
  double Q = 0, S = 0;
  for (std::uint32_t s = 0; s < (1u << L.N); ++s) {
    if (sums(s) != m) continue;
    Q += mu(s);
    for (std::uint32_t t = 0; t < (1u << L.N); ++t)
      if (sums(t) == m2) S += mu(s) * P(s, t);
  }
  return S / Q;
}

}  // namespace

TEST_CASE("equal-width intervals over the support") {
  auto env = sample_fields(parse_field_law("uniform(0,1)"), 40, 2);
  auto p = build_partition(env, 4);
  for (int k = 0; k < 4; ++k) CHECK(p.edges[k + 1] - p.edges[k] == doctest::Approx(0.25).epsilon(1e-15));
  double rho = 0;
  for (double r : p.rho) rho += r;
  CHECK(rho == doctest::Approx(1.0).epsilon(1e-15));
  for (int l = 0; l < p.n; ++l) {
    double s = 0;
    for (int x = 0; x < p.N; ++x)
      if (p.block_of(x) == l) {
        s += p.htilde[x];
        CHECK(env.h[x] >= p.edges[l]);
        CHECK(env.h[x] <= p.edges[l + 1]);
      }
    CHECK(std::abs(s) < 1e-12);
  }
  auto j = to_json(p);
  CHECK(j["interval_edges"].size() == 5);
  CHECK(j["block_assignment"].size() == 40);
  CHECK(j["rho"].size() == 4);
  CHECK(j["hbar"].size() == 4);
}

TEST_CASE("constant field gives one nonempty block") {
  auto env = explicit_fields(std::vector<double>(9, 0.3));
  for (int n : {1, 2, 5}) {
    auto p = build_partition(env, n);
    int nonempty = 0;
    for (int l = 0; l < n; ++l) nonempty += !p.empty(l);
    CHECK(nonempty == 1);
    CHECK(p.max_spread == 0.0);
  }
}

TEST_CASE("meso map") {
  // sites 0,1 in block 0 and 2,3 in block 1
  auto env = explicit_fields({0.0, 0.1, 0.9, 1.0});
  auto p = build_partition(env, 2);
  REQUIRE(p.layout->block_of == std::vector<int>{0, 0, 1, 1});
  SpinConfig s({1, 1, -1, 1}, p.layout);
  auto m = meso_map(s, p);
  CHECK(m[0] == 0.5);
  CHECK(m[1] == 0.0);
  auto up = SpinConfig::constant(1, p.layout);
  auto mu = meso_map(up, p);
  for (int l = 0; l < 2; ++l) CHECK(mu[l] == p.rho[l]);
  auto p1 = build_partition(env, 1);
  CHECK(meso_map(s, p1).total() == 0.5);
  CHECK(meso_map(s, p1)[0] == 0.5);
}

TEST_CASE("refinement nests and coarsening telescopes") {
  auto env = sample_fields(parse_field_law("uniform(-1,1)"), 30, 4);
  auto p1 = build_partition(env, 1);
  auto p2 = refine(p1, env);
  auto p4 = refine(p2, env);
  CHECK(is_refinement(p2, p1));
  CHECK(is_refinement(p4, p2));
  CHECK(is_refinement(p4, p1));
  CHECK_FALSE(is_refinement(p1, p4));
  RngStream rng(1, 0, 0);
  std::vector<std::int8_t> v(30);
  for (auto& x : v) x = rng.uniform() < 0.5 ? 1 : -1;
  SpinConfig s4(v, p4.layout);
  auto m4 = meso_map(s4, p4);
  CHECK(coarsen(m4, p4, p2) == meso_map(s4, p2));
  CHECK(coarsen(m4, p4, p1) == meso_map(s4, p1));
  // the one-flip image of a grid point is a grid point
  for (int x = 0; x < 30; ++x) {
    auto t = s4;
    t.flip(x);
    CHECK(on_grid(meso_map(t, p4), *p4.layout));
  }
}

TEST_CASE("exact lumped rates") {
  auto env = sample_fields(parse_field_law("uniform(-0.6,0.6)"), 8, 21);
  const double beta = 1.2;
  auto p = build_partition(env, 2);
  ExactChain chain(env, ModelParams{beta, 0.999}, p.layout);
  double worst_row = 0, worst_db = 0;
  for (int a = 0; a < chain.num_slices(); ++a) {
    const auto& m = chain.slice_meso(a);
    double row = 0, Qa = 0;
    for (auto s : chain.slice(a)) Qa += chain.mu(s);
    for (int b = 0; b < chain.num_slices(); ++b) {
      const auto& m2 = chain.slice_meso(b);
      double r = lumped_rates_exact(p, m, m2, chain);
      row += r;
      int dist = 0;
      for (int l = 0; l < 2; ++l) dist += std::abs(m.sums[l] - m2.sums[l]);
      if (dist != 0 && dist != 2) CHECK(r == 0.0);
      double Qb = 0;
      for (auto s : chain.slice(b)) Qb += chain.mu(s);
      double back = lumped_rates_exact(p, m2, m, chain);
      if (r > 0) worst_db = std::max(worst_db, std::abs(Qa * r - Qb * back) / (Qa * r));
    }
    worst_row = std::max(worst_row, std::abs(row - 1.0));
  }
  CHECK(worst_row <= 1e-12);
  CHECK(worst_db <= 1e-12);
  // one pair against the dense reference
  const auto& m = chain.slice_meso(3);
  for (int b = 0; b < chain.num_slices(); ++b) {
    double r = lumped_rates_exact(p, m, chain.slice_meso(b), chain);
    double e = lumped_reference(env.h, beta, *p.layout, m.sums, chain.slice_meso(b).sums);
    CHECK(r == doctest::Approx(e).epsilon(1e-12));
  }
  CHECK_THROWS_AS(lumped_rates_exact(p, MesoState{{99, 0}, 8}, m, chain), DomainError);
}

TEST_CASE("approximate lumped rates") {
  auto env = sample_fields(parse_field_law("uniform(-0.5,0.5)"), 8, 5);
  auto p = build_partition(env, 2);
  MesoState top{{p.size(0), -p.size(1)}, 8};
  CHECK(lumped_rates_approx(p, top, 0, +1, 1.0) == 0.0);
  MesoState mid{{p.size(0) - 2, p.size(1) - 2}, 8};
  CHECK(lumped_rates_approx(p, mid, 0, +1, 0.0) == doctest::Approx(1.0 / 8 / 2));
  CHECK(lumped_rates_approx(p, mid, 1, -1, 0.0) == doctest::Approx((p.size(1) - 1) / 8.0 / 2));
  CHECK(lumped_rates_approx(p, top, 1, -1, 1.0) == 0.0);
  CHECK_THROWS_AS(lumped_rates_approx(p, MesoState{{p.size(0) + 2, 0}, 8}, 0, -1, 1.0), DomainError);
}

TEST_CASE("surrogate rates are close to exact ones at N=8, n=2") {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto env = sample_fields(parse_field_law("uniform(-0.3,0.3)"), 8, seed);
    const double beta = 1.0;
    auto p = build_partition(env, 2);
    ExactChain chain(env, ModelParams{beta, 0.999}, p.layout);
    double worst = 0;
    for (int a = 0; a < chain.num_slices(); ++a) {
      const auto& m = chain.slice_meso(a);
      for (int k = 0; k < 2; ++k)
        for (int d : {1, -1}) {
          MesoState m2 = m;
          m2.sums[k] += 2 * d;
          if (std::abs(m2.sums[k]) > p.size(k)) continue;
          double ex = lumped_rates_exact(p, m, m2, chain);
          double ap = lumped_rates_approx(p, m, k, d, beta);
          if (ex > 0) worst = std::max(worst, std::abs(ap / ex - 1.0));
        }
    }
    CHECK(worst <= 3 * p.eps_surrogate(beta));
  }
}

TEST_CASE("a1 certificate") {
  // evenly spaced distinct fields: n = N intervals isolate every site
  std::vector<double> h;
  for (int i = 0; i < 8; ++i) h.push_back(0.05 * i);
  auto env = explicit_fields(h);
  auto p = build_partition(env, 8);
  for (int l = 0; l < 8; ++l) CHECK(p.size(l) == 1);
  ExactChain chain(env, ModelParams{1.0, 0.999}, p.layout);
  CHECK(a1_certificate(chain, p) == 0.0);

  auto c = explicit_fields(std::vector<double>(8, 0.2));
  auto pc = build_partition(c, 1);
  ExactChain cc(c, ModelParams{1.5, 0.999}, pc.layout);
  CHECK(a1_certificate(cc, pc) <= 1e-12);

  auto u = sample_fields(parse_field_law("uniform(-1,1)"), 10, 77);
  auto p1 = build_partition(u, 1);
  auto p2 = refine(p1, u);
  auto p4 = refine(p2, u);
  ModelParams mp{0.8, 0.999};
  double e1 = a1_certificate(ExactChain(u, mp, p1.layout), p1);
  double e2 = a1_certificate(ExactChain(u, mp, p2.layout), p2);
  double e4 = a1_certificate(ExactChain(u, mp, p4.layout), p4);
  CHECK(e1 >= e2);
  CHECK(e2 >= e4);
}

TEST_CASE("three eps bounds the coupling ratio") {
  for (std::uint64_t seed : {1, 2, 3, 4}) {
    for (int n : {1, 2}) {
      auto env = sample_fields(parse_field_law("uniform(-0.4,0.4)"), 10, seed);
      auto p = build_partition(env, n);
      ModelParams mp{1.2, 0.999};
      ExactChain chain(env, mp, p.layout);
      double eps = a1_certificate(chain, p);
      CHECK(required_nu(chain.rule(), p) <= 3 * eps);
    }
  }
}

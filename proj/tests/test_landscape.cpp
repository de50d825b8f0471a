#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "rfcw/error.hpp"
#include "rfcw/exact_oracle.hpp"
#include "rfcw/landscape.hpp"
#include "rfcw/rng.hpp"

using namespace rfcw;

namespace {

struct Fixture {
  FieldEnvironment env;
  Partition p;
  FreeEnergySurface s;
  Fixture(std::vector<double> h, int n, double beta)
      : env(explicit_fields(std::move(h))), p(build_partition(env, n)), s(env, p, beta) {}
};

// root of m = tanh(beta m) on (0,1) by plain bisection
double cw_root(double beta) {
  double lo = 1e-6, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (std::tanh(beta * mid) - mid > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> pm(int N, double a) {
  std::vector<double> h;
  for (int i = 0; i < N; ++i) h.push_back(i % 2 ? a : -a);
  return h;
}

double log_binom(int n, int k) { return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0); }

}  // namespace

TEST_CASE("Legendre consistency") {
  Fixture f(pm(20, 0.3), 1, 1.4);
  Fixture g({-0.5, -0.2, 0.1, 0.3, 0.35, 0.6, 0.7, 0.9}, 2, 0.9);
  for (auto* fx : {&f, &g}) {
    for (int l = 0; l < fx->s.blocks(); ++l) {
      if (fx->s.empty(l)) continue;
      for (double t = -4; t <= 4; t += 0.25) {
        double y = fx->s.cumulant_d1(l, t);
        auto L = fx->s.legendre(l, y);
        CHECK(L.value + fx->s.cumulant(l, t) == doctest::Approx(t * y).epsilon(1e-10).scale(1.0));
        CHECK(L.value >= -1e-14);
        CHECK(L.t == doctest::Approx(t).epsilon(1e-8));
      }
      auto zero = fx->s.legendre(l, fx->s.cumulant_d1(l, 0.0));
      CHECK(std::abs(zero.value) < 1e-14);
    }
  }
}

TEST_CASE("zero field, one block: critical points solve m = tanh(beta m)") {
  Fixture f(std::vector<double>(10, 0.0), 1, 2.0);
  auto cps = find_critical_points(f.s);
  REQUIRE(cps.size() == 3);
  const double r = cw_root(2.0);
  CHECK(r == doctest::Approx(0.957504).epsilon(1e-6));
  CHECK(cps[0].total_mag == doctest::Approx(-r).epsilon(1e-9));
  CHECK(cps[1].total_mag == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  CHECK(cps[2].total_mag == doctest::Approx(r).epsilon(1e-9));
  CHECK(cps[0].kind == CriticalPoint::Kind::Minimum);
  CHECK(cps[1].kind == CriticalPoint::Kind::Saddle);
  CHECK(cps[2].kind == CriticalPoint::Kind::Minimum);
  for (const auto& c : cps) {
    CHECK(c.gradient_norm < 1e-10);
    CHECK(c.hessian_signature == (c.kind == CriticalPoint::Kind::Saddle ? 1 : 0));
  }
  CHECK(kramers_exponent(cps[2], cps[1], f.s) > 0);
  auto fake = cps[2];
  fake.kind = CriticalPoint::Kind::Saddle;
  CHECK_THROWS_AS(kramers_exponent(cps[2], fake, f.s), LandscapeOrderError);

  Fixture hot(std::vector<double>(10, 0.0), 1, 0.5);
  auto one = find_critical_points(hot.s);
  REQUIRE(one.size() == 1);
  CHECK(std::abs(one[0].total_mag) < 1e-12);
  CHECK(one[0].kind == CriticalPoint::Kind::Minimum);
  CHECK_THROWS_AS(well_and_barrier(one, 0.0), DomainError);
}

TEST_CASE("two-point fields at beta 2") {
  Fixture f(pm(40, 0.05), 2, 2.0);
  auto cps = find_critical_points(f.s);
  REQUIRE(cps.size() == 3);
  auto [mn, sad] = well_and_barrier(cps, 0.9);
  CHECK(sad.free_energy > std::max(cps[0].free_energy, cps[2].free_energy));
  for (const auto& c : cps) {
    auto lifted = f.s.lift(c.total_mag);
    for (int l = 0; l < 2; ++l) CHECK(c.x[l] == doctest::Approx(lifted[l]).epsilon(1e-9));
    CHECK(c.gradient_norm < 1e-10);
    CHECK(c.hessian_signature == (c.kind == CriticalPoint::Kind::Saddle ? 1 : 0));
  }
  // symmetric fields in one block: the gradient vanishes at the origin
  Fixture one(pm(40, 0.05), 1, 2.0);
  CHECK(std::abs(one.s.gradient({0.0})[0]) < 1e-12);
}

TEST_CASE("finite-difference gradient") {
  auto env = sample_fields(parse_field_law("uniform(-0.4,0.6)"), 60, 3);
  auto p = build_partition(env, 3);
  FreeEnergySurface s(env, p, 1.3);
  RngStream rng(9, 0, 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(3);
    for (int l = 0; l < 3; ++l) x[l] = p.empty(l) ? 0 : p.rho[l] * (1.6 * rng.uniform() - 0.8);
    auto g = s.gradient(x);
    for (int l = 0; l < 3; ++l) {
      if (p.empty(l)) continue;
      auto a = x, b = x;
      a[l] += 1e-5;
      b[l] -= 1e-5;
      double fd = (s.free_energy(a) - s.free_energy(b)) / 2e-5;
      CHECK(fd == doctest::Approx(g[l]).epsilon(1e-6).scale(1.0));
    }
  }
  std::vector<double> edge(p.rho.begin(), p.rho.end());
  CHECK_THROWS_AS(s.free_energy(edge), DomainError);
}

TEST_CASE("exponent is invariant under permuting the fields") {
  auto env = sample_fields(parse_field_law("uniform(-0.1,0.1)"), 50, 8);
  auto h = env.h;
  std::reverse(h.begin(), h.end());
  std::rotate(h.begin(), h.begin() + 7, h.end());
  auto env2 = explicit_fields(h);
  env2.support = env.support;
  auto p1 = build_partition(env, 2), p2 = build_partition(env2, 2);
  FreeEnergySurface s1(env, p1, 1.6), s2(env2, p2, 1.6);
  auto c1 = find_critical_points(s1), c2 = find_critical_points(s2);
  REQUIRE(c1.size() == 3);
  REQUIRE(c2.size() == 3);
  auto [m1, z1] = well_and_barrier(c1, 1.0);
  auto [m2, z2] = well_and_barrier(c2, 1.0);
  CHECK(kramers_exponent(m1, z1, s1) == doctest::Approx(kramers_exponent(m2, z2, s2)).epsilon(1e-9));
}

TEST_CASE("constant field shift moves the exponent consistently") {
  std::vector<double> h = pm(40, 0.05), hs;
  for (double v : h) hs.push_back(v + 0.02);
  Fixture a(h, 1, 1.5), b(hs, 1, 1.5);
  auto ca = find_critical_points(a.s), cb = find_critical_points(b.s);
  REQUIRE(ca.size() == 3);
  REQUIRE(cb.size() == 3);
  auto [ma, za] = well_and_barrier(ca, -1.0);
  auto [mb, zb] = well_and_barrier(cb, -1.0);
  // a positive shift makes the negative well shallower
  CHECK(kramers_exponent(mb, zb, b.s) < kramers_exponent(ma, za, a.s));
  CHECK(mb.free_energy > cb[2].free_energy);
}

TEST_CASE("sharp slice asymptotics against exact slice masses") {
  const int N = 14;
  const double beta = 1.5;
  Fixture f(std::vector<double>(N, 0.0), 1, beta);
  // Q(k up-spins) proportional to binom(N,k) exp(beta N m^2 / 2)
  auto logQ = [&](int k) {
    double m = (2.0 * k - N) / N;
    return log_binom(N, k) + beta * N * m * m / 2;
  };
  const int ref_k = 10;
  double worst = 0;
  for (int k = 2; k <= N - 2; ++k) {
    MesoState m{{2 * k - N}, N}, mr{{2 * ref_k - N}, N};
    double asym = f.s.lumped_measure_asymptotic(m) - f.s.lumped_measure_asymptotic(mr);
    double exact = logQ(k) - logQ(ref_k);
    worst = std::max(worst, std::abs(std::exp(asym - exact) - 1.0));
  }
  CHECK(worst <= 5.0 / N);

  // cross-check the same masses against the enumerated chain
  ExactChain chain(f.env, ModelParams{beta, 0.999}, f.p.layout);
  for (int id = 0; id < chain.num_slices(); ++id) {
    double q = 0;
    for (auto s : chain.slice(id)) q += chain.mu(s);
    int k = (chain.slice_meso(id).sums[0] + N) / 2;
    CHECK(std::log(q) == doctest::Approx(logQ(k) - chain.log_Z()).epsilon(1e-10).scale(1.0));
  }
  MesoState edge{{N}, N};
  CHECK_THROWS_AS(f.s.lumped_measure_asymptotic(edge), DomainError);
}

TEST_CASE("slice asymptotics: symmetry and maximizer") {
  const int N = 40;
  Fixture f(pm(N, 0.1), 2, 1.4);
  auto cps = find_critical_points(f.s);
  const CriticalPoint* best = nullptr;
  for (const auto& c : cps)
    if (c.kind == CriticalPoint::Kind::Minimum && (!best || c.free_energy < best->free_energy)) best = &c;
  REQUIRE(best);
  double top = -1e300;
  MesoState arg;
  const int s0 = f.p.size(0), s1 = f.p.size(1);
  for (int a = -s0 + 2; a <= s0 - 2; a += 2)
    for (int b = -s1 + 2; b <= s1 - 2; b += 2) {
      // h -> -h swaps the two equal-size blocks
      MesoState m{{a, b}, N}, neg{{-b, -a}, N};
      double v = f.s.lumped_measure_asymptotic(m);
      CHECK(v == doctest::Approx(f.s.lumped_measure_asymptotic(neg)).epsilon(1e-10).scale(1.0));
      if (v > top + 1e-12) {
        top = v;
        arg = m;
      }
    }
  // maximizer is a grid neighbour of one of the symmetric global minima
  double d = 0;
  for (int l = 0; l < 2; ++l) d = std::max(d, std::abs(arg[l] - best->x[l]));
  double dneg = std::max(std::abs(arg[0] + best->x[1]), std::abs(arg[1] + best->x[0]));
  CHECK(std::min(d, dneg) <= 2.0 / N + 1e-12);
}

TEST_CASE("gradient descent lands on a found minimum") {
  auto env = sample_fields(parse_field_law("uniform(-0.2,0.2)"), 80, 12);
  auto p = build_partition(env, 2);
  FreeEnergySurface s(env, p, 1.5);
  auto cps = find_critical_points(s);
  RngStream rng(4, 0, 0);
  for (int trial = 0; trial < 6; ++trial) {
    std::vector<double> x(2);
    for (int l = 0; l < 2; ++l) x[l] = p.rho[l] * (1.8 * rng.uniform() - 0.9);
    double F = s.free_energy(x);
    bool monotone = true;
    for (int it = 0; it < 20000; ++it) {
      auto g = s.gradient(x);
      double step = 0.1;
      std::vector<double> y(2);
      for (;;) {
        bool inside = true;
        for (int l = 0; l < 2; ++l) {
          y[l] = x[l] - step * g[l];
          inside = inside && std::abs(y[l]) < p.rho[l];
        }
        if (inside && s.free_energy(y) <= F) break;
        step /= 2;
        if (step < 1e-16) break;
      }
      double Fy = s.free_energy(y);
      if (Fy > F) monotone = false;
      F = Fy;
      x = y;
      if (std::hypot(g[0], g[1]) < 1e-12) break;
    }
    CHECK(monotone);
    double best = 1e300;
    for (const auto& c : cps)
      if (c.kind == CriticalPoint::Kind::Minimum) best = std::min(best, std::hypot(c.x[0] - x[0], c.x[1] - x[1]));
    CHECK(best < 1e-8);
  }
}

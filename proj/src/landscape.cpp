#include "rfcw/landscape.hpp"

#include <algorithm>
#include <cmath>

#include "rfcw/error.hpp"

namespace rfcw {

double logcosh(double u) {
  double a = std::abs(u);
  return a + std::log1p(std::exp(-2.0 * a)) - M_LN2;
}

namespace {
// sech^2 without cancellation at large |u|
double sech2(double u) {
  double e = std::exp(-2.0 * std::abs(u));
  return 4.0 * e / ((1.0 + e) * (1.0 + e));
}
}  // namespace

FreeEnergySurface::FreeEnergySurface(const FieldEnvironment& env, const Partition& p, double beta)
    : h_(env.h), beta_(beta), N_(env.N) {
  if (p.N != env.N) throw ContractViolation("FreeEnergySurface: partition size mismatch");
  if (!(beta > 0)) throw ConfigError("FreeEnergySurface: beta must be positive");
  blocks_.resize(p.n);
  for (int l = 0; l < p.n; ++l) {
    blocks_[l].rho = p.rho[l];
    blocks_[l].hbar = p.hbar[l];
  }
  for (int x = 0; x < env.N; ++x) blocks_[p.block_of(x)].a.push_back(beta * p.htilde[x]);
  for (auto& b : blocks_) {
    double s = 0;
    for (double a : b.a) s += logcosh(a);
    if (!b.a.empty()) b.lambda0 = s / b.a.size();
  }
}

double FreeEnergySurface::cumulant(int l, double t) const {
  const auto& b = blocks_[l];
  double s = 0;
  for (double a : b.a) s += logcosh(t + a);
  return s / b.a.size() - b.lambda0;
}

double FreeEnergySurface::cumulant_d1(int l, double t) const {
  const auto& b = blocks_[l];
  double s = 0;
  for (double a : b.a) s += std::tanh(t + a);
  return s / b.a.size();
}

double FreeEnergySurface::cumulant_d2(int l, double t) const {
  const auto& b = blocks_[l];
  double s = 0;
  for (double a : b.a) s += sech2(t + a);
  return s / b.a.size();
}

LegendrePoint FreeEnergySurface::legendre(int l, double y) const {
  if (empty(l)) throw DomainError("legendre: empty block");
  if (!(std::abs(y) < 1.0)) throw DomainError("legendre: argument outside (-1,1)");
  double t = std::atanh(std::clamp(y, -1.0 + 1e-15, 1.0 - 1e-15));
  bool ok = false;
  for (int it = 0; it < 100; ++it) {
    double f = cumulant_d1(l, t) - y;
    double d = cumulant_d2(l, t);
    if (!(d > 0)) break;
    double step = f / d;
    t -= step;
    if (std::abs(step) <= 1e-12 * std::max(1.0, std::abs(t)) && std::abs(f) <= 1e-12) {
      ok = true;
      break;
    }
  }
  if (!ok || !std::isfinite(t)) {
    // bisection on the monotone map t -> Lambda'(t)
    double lo = -1, hi = 1;
    while (cumulant_d1(l, lo) > y) lo *= 2;
    while (cumulant_d1(l, hi) < y) hi *= 2;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
      double mid = 0.5 * (lo + hi);
      (cumulant_d1(l, mid) < y ? lo : hi) = mid;
    }
    t = 0.5 * (lo + hi);
  }
  return {t * y - cumulant(l, t), t, 1.0 / cumulant_d2(l, t)};
}

double FreeEnergySurface::free_energy(const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != blocks()) throw ContractViolation("free_energy: dimension mismatch");
  double m = 0, lin = 0, ent = 0;
  for (int l = 0; l < blocks(); ++l) {
    m += x[l];
    if (empty(l)) {
      if (x[l] != 0) throw DomainError("free_energy: nonzero coordinate on an empty block");
      continue;
    }
    lin += x[l] * blocks_[l].hbar;
    ent += blocks_[l].rho * legendre(l, x[l] / blocks_[l].rho).value;
  }
  return -0.5 * m * m - lin + ent / beta_;
}

std::vector<double> FreeEnergySurface::gradient(const std::vector<double>& x) const {
  double m = 0;
  for (double v : x) m += v;
  std::vector<double> g(blocks(), 0.0);
  for (int l = 0; l < blocks(); ++l) {
    if (empty(l)) continue;
    g[l] = -m - blocks_[l].hbar + legendre(l, x[l] / blocks_[l].rho).t / beta_;
  }
  return g;
}

Eigen::MatrixXd FreeEnergySurface::hessian(const std::vector<double>& x) const {
  std::vector<int> idx;
  for (int l = 0; l < blocks(); ++l)
    if (!empty(l)) idx.push_back(l);
  const int k = static_cast<int>(idx.size());
  Eigen::MatrixXd H = Eigen::MatrixXd::Constant(k, k, -1.0);
  for (int i = 0; i < k; ++i) {
    int l = idx[i];
    H(i, i) += legendre(l, x[l] / blocks_[l].rho).second / (beta_ * blocks_[l].rho);
  }
  return H;
}

int FreeEnergySurface::hessian_signature(const std::vector<double>& x) const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hessian(x), Eigen::EigenvaluesOnly);
  int neg = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) neg += es.eigenvalues()[i] < 0;
  return neg;
}

double FreeEnergySurface::mean_field_residual(double m) const {
  double s = 0;
  for (double h : h_) s += std::tanh(beta_ * (m + h));
  return s / N_ - m;
}

double FreeEnergySurface::mean_field_residual_d1(double m) const {
  double s = 0;
  for (double h : h_) s += sech2(beta_ * (m + h));
  return beta_ * s / N_ - 1.0;
}

std::vector<double> FreeEnergySurface::lift(double m) const {
  std::vector<double> x(blocks(), 0.0);
  for (int l = 0; l < blocks(); ++l) {
    if (empty(l)) continue;
    // mean of tanh(beta(m + h_i)) over the block, via the centred cumulant
    x[l] = blocks_[l].rho * cumulant_d1(l, beta_ * (m + blocks_[l].hbar));
  }
  return x;
}

double FreeEnergySurface::x_sum_at(double c, std::vector<double>* x) const {
  double s = 0;
  if (x) x->assign(blocks(), 0.0);
  for (int l = 0; l < blocks(); ++l) {
    if (empty(l)) continue;
    double v = blocks_[l].rho * cumulant_d1(l, beta_ * (c + blocks_[l].hbar));
    if (x) (*x)[l] = v;
    s += v;
  }
  return s;
}

FreeEnergySurface::Reduced FreeEnergySurface::reduce(double m) const {
  if (!(std::abs(m) < 1.0)) throw DomainError("reduce: total magnetization outside (-1,1)");
  // common multiplier c with sum_l rho_l Lambda_l'(beta(c + hbar_l)) = m
  double lo = -1, hi = 1;
  while (x_sum_at(lo, nullptr) > m) lo *= 2;
  while (x_sum_at(hi, nullptr) < m) hi *= 2;
  double c = 0.5 * (lo + hi);
  for (int it = 0; it < 300; ++it) {
    c = 0.5 * (lo + hi);
    if (hi - lo <= 1e-15 * std::max(1.0, std::abs(c))) break;
    (x_sum_at(c, nullptr) < m ? lo : hi) = c;
  }
  Reduced r;
  x_sum_at(c, &r.x);
  r.F = free_energy(r.x);
  r.dF = c - m;
  return r;
}

double FreeEnergySurface::lumped_measure_asymptotic(const MesoState& m) const {
  if (m.blocks() != blocks() || m.N != N_) throw ContractViolation("lumped_measure_asymptotic: shape mismatch");
  std::vector<double> x = m.values();
  double pref = 0;
  for (int l = 0; l < blocks(); ++l) {
    if (empty(l)) continue;
    double y = x[l] / blocks_[l].rho;
    if (!(std::abs(y) < 1.0)) throw DomainError("lumped_measure_asymptotic: boundary grid point");
    double I2 = legendre(l, y).second;
    pref += 0.5 * std::log(I2 / (blocks_[l].rho * N_ * M_PI / 2.0));
  }
  return pref - N_ * beta_ * free_energy(x);
}

const char* to_string(CriticalPoint::Kind k) { return k == CriticalPoint::Kind::Minimum ? "minimum" : "saddle"; }

std::vector<CriticalPoint> find_critical_points(const FreeEnergySurface& s) {
  const int grid = 40000;
  std::vector<double> roots;
  auto G = [&](double m) { return s.mean_field_residual(m); };
  double a = -1.0, ga = G(a);
  for (int i = 1; i <= grid; ++i) {
    double b = -1.0 + 2.0 * i / grid;
    double gb = G(b);
    if (gb == 0.0) {
      roots.push_back(b);
    } else if ((ga < 0) != (gb < 0) && ga != 0.0) {
      double lo = a, hi = b, glo = ga;
      for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
        double mid = 0.5 * (lo + hi);
        double gm = G(mid);
        if (gm == 0.0) {
          lo = hi = mid;
          break;
        }
        if ((gm < 0) == (glo < 0)) {
          lo = mid;
          glo = gm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    a = b;
    ga = gb;
  }
  std::vector<CriticalPoint> out;
  for (double m : roots) {
    if (!(std::abs(m) < 1.0)) continue;
    CriticalPoint cp;
    cp.total_mag = m;
    cp.x = s.lift(m);
    cp.kind = s.mean_field_residual_d1(m) < 0 ? CriticalPoint::Kind::Minimum : CriticalPoint::Kind::Saddle;
    cp.free_energy = s.free_energy(cp.x);
    cp.hessian_signature = s.hessian_signature(cp.x);
    for (double g : s.gradient(cp.x)) cp.gradient_norm = std::max(cp.gradient_norm, std::abs(g));
    out.push_back(std::move(cp));
  }
  if (out.empty()) {
    // no sign change resolved on the grid: report the global minimizer of the reduction
    double best = 0, bestF = INFINITY;
    for (int i = 1; i < 2000; ++i) {
      double m = -1.0 + 2.0 * i / 2000;
      double F = s.reduce(m).F;
      if (F < bestF) bestF = F, best = m;
    }
    CriticalPoint cp;
    cp.total_mag = best;
    cp.x = s.lift(best);
    cp.free_energy = s.free_energy(cp.x);
    cp.hessian_signature = s.hessian_signature(cp.x);
    out.push_back(std::move(cp));
  }
  return out;
}

double kramers_exponent(const CriticalPoint& minimum, const CriticalPoint& saddle, const FreeEnergySurface& s) {
  if (minimum.kind != CriticalPoint::Kind::Minimum || saddle.kind != CriticalPoint::Kind::Saddle)
    throw ContractViolation("kramers_exponent: needs a minimum and a saddle");
  double d = saddle.free_energy - minimum.free_energy;
  if (!(d > 0)) throw LandscapeOrderError("kramers_exponent: saddle not above the minimum");
  return s.beta() * d;
}

std::pair<CriticalPoint, CriticalPoint> well_and_barrier(const std::vector<CriticalPoint>& cps, double m0) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(cps.size()); ++i) {
    if (cps[i].kind != CriticalPoint::Kind::Minimum) continue;
    if (best < 0 || std::abs(cps[i].total_mag - m0) < std::abs(cps[best].total_mag - m0)) best = i;
  }
  if (best < 0) throw DomainError("well_and_barrier: no minimum");
  int sad = -1;
  auto consider = [&](int i, int dir) {
    // a saddle counts only if another minimum lies beyond it
    bool beyond = false;
    for (int j = i + dir; j >= 0 && j < static_cast<int>(cps.size()); j += dir)
      if (cps[j].kind == CriticalPoint::Kind::Minimum) beyond = true;
    if (!beyond || cps[i].kind != CriticalPoint::Kind::Saddle) return;
    if (sad < 0 || cps[i].free_energy < cps[sad].free_energy) sad = i;
  };
  if (best > 0) consider(best - 1, -1);
  if (best + 1 < static_cast<int>(cps.size())) consider(best + 1, +1);
  if (sad < 0) throw DomainError("well_and_barrier: single well, no saddle");
  return {cps[best], cps[sad]};
}

}  // namespace rfcw

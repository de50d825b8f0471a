#pragma once

#include <vector>

#include <Eigen/Dense>

#include "rfcw/coarse_grain.hpp"
#include "rfcw/model.hpp"

namespace rfcw {

struct LegendrePoint {
  double value;   // I(y)
  double t;       // I'(y), the conjugate variable
  double second;  // I''(y) = 1 / Lambda''(t)
};

// Mesoscopic free energy over block magnetizations x_l in (-rho_l, rho_l).
// Per-block cumulants use centred fields so that I_l >= 0 and the block
// mean field enters only through the linear term.
class FreeEnergySurface {
 public:
  FreeEnergySurface(const FieldEnvironment& env, const Partition& p, double beta);

  int blocks() const { return static_cast<int>(blocks_.size()); }
  double beta() const { return beta_; }
  int N() const { return N_; }
  double rho(int l) const { return blocks_[l].rho; }
  double hbar(int l) const { return blocks_[l].hbar; }
  bool empty(int l) const { return blocks_[l].a.empty(); }

  double cumulant(int l, double t) const;
  double cumulant_d1(int l, double t) const;
  double cumulant_d2(int l, double t) const;
  LegendrePoint legendre(int l, double y) const;

  double free_energy(const std::vector<double>& x) const;
  std::vector<double> gradient(const std::vector<double>& x) const;
  // restricted to nonempty blocks, in their order
  Eigen::MatrixXd hessian(const std::vector<double>& x) const;
  int hessian_signature(const std::vector<double>& x) const;

  // G(m) = mean_i tanh(beta (m + h_i)) - m
  double mean_field_residual(double m) const;
  double mean_field_residual_d1(double m) const;
  // x_l = (1/N) sum_{i in block l} tanh(beta (m + h_i))
  std::vector<double> lift(double m) const;

  // minimum of F over {sum x = m}: the constrained minimizer, F there and dF/dm
  struct Reduced {
    std::vector<double> x;
    double F;
    double dF;
  };
  Reduced reduce(double m) const;

  // log of the sharp slice-measure asymptotic, up to the partition function
  double lumped_measure_asymptotic(const MesoState& m) const;

 private:
  struct Block {
    double rho = 0, hbar = 0;
    std::vector<double> a;  // beta * centred fields
    double lambda0 = 0;     // mean logcosh(a_i), subtracted so Lambda(0) = 0
  };
  double x_sum_at(double c, std::vector<double>* x) const;

  std::vector<Block> blocks_;
  std::vector<double> h_;
  double beta_;
  int N_;
};

struct CriticalPoint {
  enum class Kind { Minimum, Saddle };
  std::vector<double> x;
  double total_mag = 0;
  Kind kind = Kind::Minimum;
  double free_energy = 0;
  int hessian_signature = 0;
  double gradient_norm = 0;  // max |dF/dx_l|
};

const char* to_string(CriticalPoint::Kind k);

// sorted by total magnetization
std::vector<CriticalPoint> find_critical_points(const FreeEnergySurface& s);
double kramers_exponent(const CriticalPoint& minimum, const CriticalPoint& saddle, const FreeEnergySurface& s);

// the lowest saddle on the path from the minimum nearest m0 to the other well;
// returns {minimum, saddle}
std::pair<CriticalPoint, CriticalPoint> well_and_barrier(const std::vector<CriticalPoint>& cps, double m0);

double logcosh(double u);

}  // namespace rfcw

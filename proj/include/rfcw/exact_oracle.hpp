#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/SparseCore>

#include "rfcw/coarse_grain.hpp"
#include "rfcw/model.hpp"

namespace rfcw {

// subset of the enumerated state space
struct StateSet {
  std::vector<char> mask;
  std::vector<std::uint32_t> list;

  static StateSet from_list(std::uint32_t size, std::vector<std::uint32_t> states);
  bool contains(std::uint32_t s) const { return mask[s] != 0; }
  std::size_t count() const { return list.size(); }
  bool empty() const { return list.empty(); }
};

StateSet set_union(const StateSet& a, const StateSet& b);
StateSet set_minus(const StateSet& a, const StateSet& b);
StateSet complement(const StateSet& a);

enum class SolverKind { Auto, ConjugateGradient, Direct };

struct SolveOptions {
  SolverKind kind = SolverKind::Auto;
  double tol = 1e-14;  // relative residual
  int max_iter = 0;    // 0 picks a size-based default
};

// Full enumeration of {-1,+1}^N, bit x set = spin +1. Kernel rows are
// implicit: N flip targets plus holding mass, read from heat-bath tables.
class ExactChain {
 public:
  static constexpr int kMaxN = 20;

  ExactChain(const FieldEnvironment& env, const ModelParams& params,
             std::shared_ptr<const BlockLayout> layout = nullptr);

  int N() const { return N_; }
  std::uint32_t size() const { return size_; }
  const BlockLayout& layout() const { return *layout_; }
  const std::shared_ptr<const BlockLayout>& layout_ptr() const { return layout_; }
  const HeatBathRule& rule() const { return rule_; }
  double beta() const { return rule_.beta(); }

  double mu(std::uint32_t s) const { return mu_[s]; }
  const std::vector<double>& mu() const { return mu_; }
  double log_weight(std::uint32_t s) const { return logw_[s]; }
  double log_Z() const { return logZ_; }

  // P(s, s ^ (1 << x))
  double flip(std::uint32_t s, int x) const {
    int sx = (s >> x) & 1 ? 1 : -1;
    int others = total(s) - sx;
    double p = rule_.p_plus(x, others);
    return (sx > 0 ? 1.0 - p : p) / N_;
  }
  double hold(std::uint32_t s) const;
  double P(std::uint32_t s, std::uint32_t t) const;
  int total(std::uint32_t s) const { return 2 * __builtin_popcount(s) - N_; }

  SpinConfig config(std::uint32_t s) const { return SpinConfig::from_bits(s, layout_); }
  static std::uint32_t index(const SpinConfig& s) { return static_cast<std::uint32_t>(s.bits()); }
  MesoState meso(std::uint32_t s) const;

  int num_slices() const { return static_cast<int>(slices_.size()); }
  int slice_id(std::uint32_t s) const { return slice_of_[s]; }
  int slice_id(const MesoState& m) const;  // -1 if off the grid
  const MesoState& slice_meso(int id) const { return slice_meso_[id]; }
  const std::vector<std::uint32_t>& slice(int id) const { return slices_[id]; }
  StateSet slice_set(int id) const;
  StateSet states_where(const std::function<bool(const MesoState&)>& pred) const;

  double reversibility_error() const;  // max relative edge mismatch
  double row_sum_error() const;
  Eigen::SparseMatrix<double, Eigen::RowMajor> kernel_matrix() const;

 private:
  int N_;
  std::uint32_t size_;
  std::shared_ptr<const BlockLayout> layout_;
  HeatBathRule rule_;
  std::vector<double> logw_, mu_;
  double logZ_ = 0;
  std::vector<int> slice_of_;
  std::vector<std::vector<std::uint32_t>> slices_;
  std::vector<MesoState> slice_meso_;
  std::vector<int> block_mask_;  // bitmask of sites per block
};

// Dirichlet problem on the free set for the z-discounted kernel. Factorizes
// once (direct) so many right-hand sides are cheap. With transpose the
// adjoint system (I - zP)^T is solved instead.
class DirichletSolver {
 public:
  DirichletSolver(const ExactChain& chain, std::vector<char> is_free, double z, const SolveOptions& opt = {},
                  bool transpose = false);
  ~DirichletSolver();
  DirichletSolver(const DirichletSolver&) = delete;
  DirichletSolver& operator=(const DirichletSolver&) = delete;

  // boundary and source are full-length; the result is full-length
  std::vector<double> solve(const std::vector<double>& boundary, const std::vector<double>& source) const;
  bool direct() const { return direct_; }
  std::size_t free_count() const { return free_.size(); }

 private:
  struct Factor;
  const ExactChain& chain_;
  std::vector<char> is_free_;
  std::vector<std::uint32_t> free_;
  std::vector<std::int32_t> local_;
  double z_;
  SolveOptions opt_;
  bool transpose_;
  bool direct_;
  std::unique_ptr<Factor> factor_;
};

// Solves u = z P u + f on the free set, u = g elsewhere (g read from `boundary`,
// f from `source`; both full-length). Returns the full vector.
std::vector<double> solve_dirichlet(const ExactChain& chain, const std::vector<char>& is_free,
                                    const std::vector<double>& boundary, const std::vector<double>& source,
                                    double z, const SolveOptions& opt = {});

struct PotentialSolution {
  std::vector<double> h;  // P(tau_A < tau_B), 1 on A, 0 on B
  double cap = 0;         // sum_A mu (L h)
  double cap_dirichlet = 0;
  std::vector<double> nuA;  // equilibrium measure on A, parallel to A.list
  // w solves L w = h off A u B, w = 0 on A u B (filled by uphill_identities)
  std::vector<double> w;
};

PotentialSolution equilibrium_potential(const ExactChain& chain, const StateSet& A, const StateSet& B,
                                        const SolveOptions& opt = {});
// (L f)(s) = f(s) - sum_t P(s,t) f(t)
double apply_L(const ExactChain& chain, const std::vector<double>& f, std::uint32_t s);
double dirichlet_form(const ExactChain& chain, const std::vector<double>& f);

// Green's function g_B(x, .) : expected visits before tau_B
std::vector<double> green_function(const ExactChain& chain, std::uint32_t x, const StateSet& B,
                                   const SolveOptions& opt = {});

struct GreenCheck {
  double ratio_residual = 0;  // max |g / (mu h / cap) - 1|
  double reversibility_residual = 0;
};
GreenCheck green_function_identity_check(const ExactChain& chain, std::uint32_t x, const StateSet& B,
                                         const SolveOptions& opt = {});

// E_s tau_B for every s (0 on B)
std::vector<double> hitting_times(const ExactChain& chain, const StateSet& B, const SolveOptions& opt = {});
double mean_hitting(const ExactChain& chain, std::uint32_t start, const StateSet& B, const SolveOptions& opt = {});
double mean_hitting(const ExactChain& chain, const std::vector<std::pair<std::uint32_t, double>>& start,
                    const StateSet& B, const SolveOptions& opt = {});

struct MeanHittingFormula {
  double lhs = 0;  // E_{nu_A} tau_B by direct solve
  double rhs = 0;  // sum_y mu(y) h(y) / cap
  double residual = 0;
};
MeanHittingFormula mean_hitting_formula(const ExactChain& chain, const StateSet& A, const StateSet& B,
                                        const SolveOptions& opt = {});

// nu_{A,B}(s) proportional to mu(s) P_s(tau_B < tau_A), parallel to A.list
std::vector<double> last_exit_biased(const ExactChain& chain, const StateSet& A, const StateSet& B,
                                     const SolveOptions& opt = {});

struct RhoLambda {
  std::vector<double> rho;  // parallel to A.list
  double C = 0;             // Perron eigenvalue of K_lambda
  Eigen::MatrixXd K;        // K(s,s') = E_s[z^tau_A; tau_A < tau_B; s(tau_A) = s']
  int iterations = 0;
};
RhoLambda rho_lambda(const ExactChain& chain, const StateSet& A, const StateSet& B, double lambda, double T,
                     const SolveOptions& opt = {});

// u(s) = E_s z^{tau_B}, z = exp(-lambda/T), full vector
std::vector<double> laplace_transform_all(const ExactChain& chain, const StateSet& B, double lambda, double T,
                                          const SolveOptions& opt = {});
double laplace_transform(const ExactChain& chain, std::uint32_t start, const StateSet& B, double lambda, double T,
                         const SolveOptions& opt = {});

struct RenewalCheck {
  double lhs = 0, rhs = 0, residual = 0;
  double C = 0;
};
RenewalCheck renewal_identity(const ExactChain& chain, const StateSet& A, const StateSet& B, double lambda,
                              double T, const SolveOptions& opt = {});

struct IdentitySides {
  double lhs = 0, rhs = 0, residual = 0;
};

struct UphillReport {
  IdentitySides rev7, rev8, rev9;
  double uphill_ratio = 0;  // E_rho[tau_B; tau_B<tau_A] / E_rho[tau_A; tau_A<tau_B]
  // E_rho tau_B vs E_rho tau_{AuB} + E_rho tau_B P_rho(tau_A<tau_B) + correction
  double t_lambda_residual = 0;
  // the same decomposition with its correction term computed exactly
  double t_lambda_exact_residual = 0;
};
UphillReport uphill_identities(const ExactChain& chain, const StateSet& A, const StateSet& B, double lambda = 0.0,
                               double T = 1.0, const SolveOptions& opt = {});

struct DownhillReport {
  double lhs = 0, rhs = 0;
  bool holds = false;
  double rhs_with_ball = 0;  // rhs plus the mu^h mass of B_delta
  bool holds_with_ball = false;
  double row_sum_error = 0;        // p^h rows off A u B
  double reversibility_error = 0;  // mu^h p^h symmetric
  double flip_identity_residual = 0;
};
DownhillReport h_transform_downhill(const ExactChain& chain, const StateSet& A, const StateSet& B,
                                    const StateSet& A_delta, const StateSet& B_delta, const SolveOptions& opt = {});

// max over slices s, s' in A_delta of P_{sigma}(tau_B < tau_{slice s'}), sigma in slice s
double local_recurrence_probe(const ExactChain& chain, const std::vector<int>& delta_slices, const StateSet& B,
                              const SolveOptions& opt = {});

}  // namespace rfcw

#include "rfcw/exact_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>

#include <Eigen/SparseLU>

#include "rfcw/error.hpp"
#include "rfcw/linsolve.hpp"

namespace rfcw {

StateSet StateSet::from_list(std::uint32_t size, std::vector<std::uint32_t> states) {
  StateSet S;
  S.mask.assign(size, 0);
  std::sort(states.begin(), states.end());
  states.erase(std::unique(states.begin(), states.end()), states.end());
  for (auto s : states) {
    if (s >= size) throw ContractViolation("StateSet: state out of range");
    S.mask[s] = 1;
  }
  S.list = std::move(states);
  return S;
}

namespace {
StateSet from_mask(std::vector<char> mask) {
  StateSet S;
  for (std::uint32_t s = 0; s < mask.size(); ++s)
    if (mask[s]) S.list.push_back(s);
  S.mask = std::move(mask);
  return S;
}
}  // namespace

StateSet set_union(const StateSet& a, const StateSet& b) {
  std::vector<char> m(a.mask.size());
  for (std::size_t s = 0; s < m.size(); ++s) m[s] = a.mask[s] || b.mask[s];
  return from_mask(std::move(m));
}

StateSet set_minus(const StateSet& a, const StateSet& b) {
  std::vector<char> m(a.mask.size());
  for (std::size_t s = 0; s < m.size(); ++s) m[s] = a.mask[s] && !b.mask[s];
  return from_mask(std::move(m));
}

StateSet complement(const StateSet& a) {
  std::vector<char> m(a.mask.size());
  for (std::size_t s = 0; s < m.size(); ++s) m[s] = !a.mask[s];
  return from_mask(std::move(m));
}

ExactChain::ExactChain(const FieldEnvironment& env, const ModelParams& params,
                       std::shared_ptr<const BlockLayout> layout)
    : N_(env.N), size_(0), layout_(layout ? std::move(layout) : BlockLayout::single(env.N)), rule_(env, params) {
  if (N_ > kMaxN) throw CapacityError("ExactChain: N = " + std::to_string(N_) + " exceeds 20");
  if (N_ < 1) throw ContractViolation("ExactChain: N must be >= 1");
  if (layout_->N != N_) throw ContractViolation("ExactChain: layout size mismatch");
  size_ = 1u << N_;
  logw_.resize(size_);
  double Nd = N_;
  for (std::uint32_t s = 0; s < size_; ++s) {
    double hs = 0;
    for (int x = 0; x < N_; ++x) hs += (s >> x) & 1 ? env.h[x] : -env.h[x];
    double m = total(s) / Nd;
    logw_[s] = -params.beta * (-(Nd / 2.0) * m * m - hs);
  }
  double mx = *std::max_element(logw_.begin(), logw_.end());
  double acc = 0;
  for (double l : logw_) acc += std::exp(l - mx);
  logZ_ = mx + std::log(acc);
  mu_.resize(size_);
  for (std::uint32_t s = 0; s < size_; ++s) mu_[s] = std::exp(logw_[s] - logZ_);

  block_mask_.assign(layout_->n, 0);
  for (int x = 0; x < N_; ++x) block_mask_[layout_->block_of[x]] |= 1 << x;
  std::map<std::vector<int>, std::vector<std::uint32_t>> by_key;
  for (std::uint32_t s = 0; s < size_; ++s) by_key[meso(s).sums].push_back(s);
  slice_of_.resize(size_);
  for (auto& [key, states] : by_key) {
    int id = static_cast<int>(slices_.size());
    for (auto s : states) slice_of_[s] = id;
    slice_meso_.push_back(MesoState{key, N_});
    slices_.push_back(std::move(states));
  }
}

double ExactChain::hold(std::uint32_t s) const {
  double keep = 0;
  int t = total(s);
  for (int x = 0; x < N_; ++x) {
    int sx = (s >> x) & 1 ? 1 : -1;
    double p = rule_.p_plus(x, t - sx);
    keep += sx > 0 ? p : 1.0 - p;
  }
  return keep / N_;
}

double ExactChain::P(std::uint32_t s, std::uint32_t t) const {
  if (s == t) return hold(s);
  std::uint32_t d = s ^ t;
  if (__builtin_popcount(d) != 1) return 0.0;
  return flip(s, __builtin_ctz(d));
}

MesoState ExactChain::meso(std::uint32_t s) const {
  MesoState m{std::vector<int>(layout_->n), N_};
  for (int l = 0; l < layout_->n; ++l) m.sums[l] = 2 * __builtin_popcount(s & block_mask_[l]) - layout_->sizes[l];
  return m;
}

int ExactChain::slice_id(const MesoState& m) const {
  auto it = std::lower_bound(slice_meso_.begin(), slice_meso_.end(), m,
                             [](const MesoState& a, const MesoState& b) { return a.sums < b.sums; });
  if (it == slice_meso_.end() || !(it->sums == m.sums)) return -1;
  return static_cast<int>(it - slice_meso_.begin());
}

StateSet ExactChain::slice_set(int id) const { return StateSet::from_list(size_, slices_.at(id)); }

StateSet ExactChain::states_where(const std::function<bool(const MesoState&)>& pred) const {
  std::vector<char> in_slice(slices_.size());
  for (std::size_t i = 0; i < slices_.size(); ++i) in_slice[i] = pred(slice_meso_[i]);
  std::vector<char> m(size_);
  for (std::uint32_t s = 0; s < size_; ++s) m[s] = in_slice[slice_of_[s]];
  return from_mask(std::move(m));
}

double ExactChain::reversibility_error() const {
  double worst = 0;
  for (std::uint32_t s = 0; s < size_; ++s)
    for (int x = 0; x < N_; ++x) {
      std::uint32_t t = s ^ (1u << x);
      if (t < s) continue;
      double a = mu_[s] * flip(s, x), b = mu_[t] * flip(t, x);
      double den = std::max(a, b);
      if (den > 0) worst = std::max(worst, std::abs(a - b) / den);
    }
  return worst;
}

double ExactChain::row_sum_error() const {
  double worst = 0;
  for (std::uint32_t s = 0; s < size_; ++s) {
    double r = hold(s);
    for (int x = 0; x < N_; ++x) r += flip(s, x);
    worst = std::max(worst, std::abs(r - 1.0));
  }
  return worst;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> ExactChain::kernel_matrix() const {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(size_) * (N_ + 1));
  for (std::uint32_t s = 0; s < size_; ++s) {
    trip.emplace_back(s, s, hold(s));
    for (int x = 0; x < N_; ++x) trip.emplace_back(s, s ^ (1u << x), flip(s, x));
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> P(size_, size_);
  P.setFromTriplets(trip.begin(), trip.end());
  return P;
}

// ---------------------------------------------------------------------------

struct DirichletSolver::Factor {
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
};

DirichletSolver::DirichletSolver(const ExactChain& chain, std::vector<char> is_free, double z,
                                 const SolveOptions& opt, bool transpose)
    : chain_(chain), is_free_(std::move(is_free)), z_(z), opt_(opt), transpose_(transpose) {
  const std::uint32_t n = chain.size();
  if (is_free_.size() != n) throw ContractViolation("DirichletSolver: mask size mismatch");
  if (!(z >= 0 && z <= 1)) throw ContractViolation("DirichletSolver: z must lie in [0,1]");
  local_.assign(n, -1);
  for (std::uint32_t s = 0; s < n; ++s)
    if (is_free_[s]) {
      local_[s] = static_cast<std::int32_t>(free_.size());
      free_.push_back(s);
    }
  if (z == 1.0 && !free_.empty()) {
    // every free state must reach the boundary, otherwise I - P is singular there
    std::vector<char> seen(n, 0);
    std::deque<std::uint32_t> q;
    for (std::uint32_t s = 0; s < n; ++s)
      if (!is_free_[s]) {
        seen[s] = 1;
        q.push_back(s);
      }
    if (q.empty()) throw ConnectivityError("Dirichlet problem without boundary");
    while (!q.empty()) {
      auto s = q.front();
      q.pop_front();
      for (int x = 0; x < chain.N(); ++x) {
        std::uint32_t t = s ^ (1u << x);
        if (!seen[t] && chain.flip(t, x) > 0) {
          seen[t] = 1;
          q.push_back(t);
        }
      }
    }
    for (auto s : free_)
      if (!seen[s]) throw ConnectivityError("boundary unreachable from some free state");
  }
  SolverKind kind = opt_.kind;
  if (kind == SolverKind::Auto) kind = free_.size() <= 1024 ? SolverKind::Direct : SolverKind::ConjugateGradient;
  direct_ = kind == SolverKind::Direct;
  if (direct_ && !free_.empty()) {
    const int N = chain.N();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(free_.size() * (N + 1));
    for (std::size_t i = 0; i < free_.size(); ++i) {
      auto s = free_[i];
      trip.emplace_back(i, i, 1.0 - z * chain.hold(s));
      for (int x = 0; x < N; ++x) {
        auto t = s ^ (1u << x);
        if (local_[t] < 0) continue;
        // row s of (I - zP) or of its transpose
        double p = transpose ? chain.flip(t, x) : chain.flip(s, x);
        trip.emplace_back(i, local_[t], -z * p);
      }
    }
    Eigen::SparseMatrix<double> A(free_.size(), free_.size());
    A.setFromTriplets(trip.begin(), trip.end());
    factor_ = std::make_unique<Factor>();
    factor_->lu.compute(A);
    if (factor_->lu.info() != Eigen::Success) throw NumericalError("sparse LU factorization failed");
  }
}

DirichletSolver::~DirichletSolver() = default;

std::vector<double> DirichletSolver::solve(const std::vector<double>& boundary,
                                           const std::vector<double>& source) const {
  const std::uint32_t n = chain_.size();
  const int N = chain_.N();
  if (boundary.size() != n || source.size() != n) throw ContractViolation("DirichletSolver: vector size mismatch");
  std::vector<double> u(n);
  for (std::uint32_t s = 0; s < n; ++s) u[s] = is_free_[s] ? 0.0 : boundary[s];
  if (free_.empty()) return u;
  const std::size_t m = free_.size();
  std::vector<double> rhs(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto s = free_[i];
    double r = source[s];
    for (int x = 0; x < N; ++x) {
      auto t = s ^ (1u << x);
      if (local_[t] >= 0) continue;
      double p = transpose_ ? chain_.flip(t, x) : chain_.flip(s, x);
      r += z_ * p * boundary[t];
    }
    rhs[i] = r;
  }
  std::vector<double> sol(m);
  if (direct_) {
    Eigen::Map<const Eigen::VectorXd> b(rhs.data(), m);
    Eigen::VectorXd x = factor_->lu.solve(b);
    for (std::size_t i = 0; i < m; ++i) sol[i] = x[i];
  } else {
    // D^{1/2} (I - zP) D^{-1/2} is symmetric by reversibility. For the
    // adjoint, (I - zP)^T = D (I - zP) D^{-1} reduces to the same operator.
    const auto& mu = chain_.mu();
    std::vector<double> sq(m), diag(m), b(m);
    for (std::size_t i = 0; i < m; ++i) {
      sq[i] = std::sqrt(mu[free_[i]]);
      diag[i] = 1.0 - z_ * chain_.hold(free_[i]);
      b[i] = transpose_ ? rhs[i] / sq[i] : rhs[i] * sq[i];
    }
    auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
      for (std::size_t i = 0; i < m; ++i) {
        auto s = free_[i];
        double acc = diag[i] * v[i];
        for (int x = 0; x < N; ++x) {
          auto t = s ^ (1u << x);
          auto j = local_[t];
          if (j < 0) continue;
          acc -= z_ * std::sqrt(chain_.flip(s, x) * chain_.flip(t, x)) * v[j];
        }
        out[i] = acc;
      }
    };
    std::vector<double> v(m, 0.0);
    int max_iter = opt_.max_iter > 0 ? opt_.max_iter : 200000;
    auto res = conjugate_gradient(apply, diag, b, v, opt_.tol, max_iter);
    if (!res.converged && !(res.rel_residual <= 1e-10))
      throw NumericalError("conjugate gradient stalled at relative residual " + std::to_string(res.rel_residual));
    for (std::size_t i = 0; i < m; ++i) sol[i] = transpose_ ? v[i] * sq[i] : v[i] / sq[i];
  }
  for (std::size_t i = 0; i < m; ++i) u[free_[i]] = sol[i];
  return u;
}

std::vector<double> solve_dirichlet(const ExactChain& chain, const std::vector<char>& is_free,
                                    const std::vector<double>& boundary, const std::vector<double>& source,
                                    double z, const SolveOptions& opt) {
  DirichletSolver solver(chain, is_free, z, opt);
  return solver.solve(boundary, source);
}

// ---------------------------------------------------------------------------

namespace {

void require_disjoint(const StateSet& A, const StateSet& B) {
  if (A.empty() || B.empty()) throw ContractViolation("sets must be nonempty");
  for (auto s : A.list)
    if (B.contains(s)) throw ContractViolation("sets must be disjoint");
}

std::vector<char> free_mask(const ExactChain& chain, const StateSet& A, const StateSet& B) {
  std::vector<char> f(chain.size());
  for (std::uint32_t s = 0; s < chain.size(); ++s) f[s] = !A.contains(s) && !B.contains(s);
  return f;
}

std::vector<char> free_mask(const ExactChain& chain, const StateSet& B) {
  std::vector<char> f(chain.size());
  for (std::uint32_t s = 0; s < chain.size(); ++s) f[s] = !B.contains(s);
  return f;
}

std::vector<double> indicator(const ExactChain& chain, const StateSet& A) {
  std::vector<double> v(chain.size(), 0.0);
  for (auto s : A.list) v[s] = 1.0;
  return v;
}

// sum_t P(s,t) f(t), holding term included
double expect_next(const ExactChain& chain, const std::vector<double>& f, std::uint32_t s) {
  double acc = chain.hold(s) * f[s];
  for (int x = 0; x < chain.N(); ++x) acc += chain.flip(s, x) * f[s ^ (1u << x)];
  return acc;
}

// potential with value 1 on A, 0 on B
std::vector<double> potential(const ExactChain& chain, const StateSet& A, const StateSet& B, const SolveOptions& opt) {
  return solve_dirichlet(chain, free_mask(chain, A, B), indicator(chain, A), std::vector<double>(chain.size(), 0.0),
                         1.0, opt);
}

// E_s[tau_A 1{tau_A < tau_B}] for every s (t > 0 convention), from
// w solving L w = h_{A,B} off A u B
std::vector<double> conditional_time(const ExactChain& chain, const StateSet& A, const StateSet& B,
                                     const std::vector<double>& h, std::vector<double>* w_out,
                                     const SolveOptions& opt) {
  auto fm = free_mask(chain, A, B);
  std::vector<double> src(chain.size(), 0.0);
  for (std::uint32_t s = 0; s < chain.size(); ++s)
    if (fm[s]) src[s] = h[s];
  auto w = solve_dirichlet(chain, fm, std::vector<double>(chain.size(), 0.0), src, 1.0, opt);
  // one step then either stop in A (time 1), die in B, or continue: h + w
  std::vector<double> next(chain.size());
  for (std::uint32_t s = 0; s < chain.size(); ++s) next[s] = A.contains(s) ? 1.0 : B.contains(s) ? 0.0 : h[s] + w[s];
  std::vector<double> out(chain.size());
  for (std::uint32_t s = 0; s < chain.size(); ++s) out[s] = expect_next(chain, next, s);
  if (w_out) *w_out = std::move(w);
  return out;
}

}  // namespace

double apply_L(const ExactChain& chain, const std::vector<double>& f, std::uint32_t s) {
  return f[s] - expect_next(chain, f, s);
}

double dirichlet_form(const ExactChain& chain, const std::vector<double>& f) {
  double acc = 0;
  for (std::uint32_t s = 0; s < chain.size(); ++s)
    for (int x = 0; x < chain.N(); ++x) {
      std::uint32_t t = s ^ (1u << x);
      if (t < s) continue;
      double d = f[s] - f[t];
      acc += chain.mu(s) * chain.flip(s, x) * d * d;
    }
  return acc;
}

PotentialSolution equilibrium_potential(const ExactChain& chain, const StateSet& A, const StateSet& B,
                                        const SolveOptions& opt) {
  require_disjoint(A, B);
  PotentialSolution sol;
  sol.h = potential(chain, A, B, opt);
  std::vector<double> one_minus_h(chain.size());
  for (std::uint32_t s = 0; s < chain.size(); ++s) one_minus_h[s] = 1.0 - sol.h[s];
  std::vector<double> esc(A.count());
  for (std::size_t i = 0; i < A.count(); ++i) {
    esc[i] = expect_next(chain, one_minus_h, A.list[i]);
    sol.cap += chain.mu(A.list[i]) * esc[i];
  }
  sol.cap_dirichlet = dirichlet_form(chain, sol.h);
  if (!(sol.cap > 0)) throw ConnectivityError("zero capacity");
  sol.nuA.resize(A.count());
  for (std::size_t i = 0; i < A.count(); ++i) sol.nuA[i] = chain.mu(A.list[i]) * esc[i] / sol.cap;
  return sol;
}

std::vector<double> green_function(const ExactChain& chain, std::uint32_t x, const StateSet& B,
                                   const SolveOptions& opt) {
  if (B.contains(x)) throw ContractViolation("green_function: x lies in B");
  // row g_B(x, .) solves (I - P)^T g = delta_x off B
  DirichletSolver solver(chain, free_mask(chain, B), 1.0, opt, /*transpose=*/true);
  std::vector<double> src(chain.size(), 0.0);
  src[x] = 1.0;
  return solver.solve(std::vector<double>(chain.size(), 0.0), src);
}

GreenCheck green_function_identity_check(const ExactChain& chain, std::uint32_t x, const StateSet& B,
                                         const SolveOptions& opt) {
  GreenCheck out;
  auto row = green_function(chain, x, B, opt);
  auto X = StateSet::from_list(chain.size(), {x});
  auto pot = equilibrium_potential(chain, X, B, opt);
  // column g_B(., x) from the forward system
  std::vector<double> src(chain.size(), 0.0);
  src[x] = 1.0;
  auto col = solve_dirichlet(chain, free_mask(chain, B), std::vector<double>(chain.size(), 0.0), src, 1.0, opt);
  for (std::uint32_t y = 0; y < chain.size(); ++y) {
    if (B.contains(y)) {
      if (row[y] != 0.0) out.ratio_residual = INFINITY;
      continue;
    }
    double rep = chain.mu(y) * pot.h[y] / pot.cap;
    out.ratio_residual = std::max(out.ratio_residual, std::abs(row[y] / rep - 1.0));
    double a = chain.mu(y) * col[y], b = chain.mu(x) * row[y];
    out.reversibility_residual = std::max(out.reversibility_residual, std::abs(a - b) / std::max(a, b));
  }
  return out;
}

std::vector<double> hitting_times(const ExactChain& chain, const StateSet& B, const SolveOptions& opt) {
  if (B.empty()) throw ContractViolation("hitting_times: empty target");
  std::vector<double> src(chain.size(), 1.0);
  return solve_dirichlet(chain, free_mask(chain, B), std::vector<double>(chain.size(), 0.0), src, 1.0, opt);
}

double mean_hitting(const ExactChain& chain, std::uint32_t start, const StateSet& B, const SolveOptions& opt) {
  return mean_hitting(chain, std::vector<std::pair<std::uint32_t, double>>{{start, 1.0}}, B, opt);
}

double mean_hitting(const ExactChain& chain, const std::vector<std::pair<std::uint32_t, double>>& start,
                    const StateSet& B, const SolveOptions& opt) {
  for (auto& [s, w] : start)
    if (B.contains(s) && w > 0) throw ContractViolation("mean_hitting: start charges the target");
  auto u = hitting_times(chain, B, opt);
  double acc = 0;
  for (auto& [s, w] : start) acc += w * u[s];
  return acc;
}

MeanHittingFormula mean_hitting_formula(const ExactChain& chain, const StateSet& A, const StateSet& B,
                                        const SolveOptions& opt) {
  auto pot = equilibrium_potential(chain, A, B, opt);
  auto u = hitting_times(chain, B, opt);
  MeanHittingFormula r;
  for (std::size_t i = 0; i < A.count(); ++i) r.lhs += pot.nuA[i] * u[A.list[i]];
  for (std::uint32_t y = 0; y < chain.size(); ++y) r.rhs += chain.mu(y) * pot.h[y];
  r.rhs /= pot.cap;
  r.residual = std::abs(r.lhs - r.rhs) / std::abs(r.rhs);
  return r;
}

std::vector<double> last_exit_biased(const ExactChain& chain, const StateSet& A, const StateSet& B,
                                     const SolveOptions& opt) {
  require_disjoint(A, B);
  auto hBA = potential(chain, B, A, opt);
  std::vector<double> nu(A.count());
  double tot = 0;
  for (std::size_t i = 0; i < A.count(); ++i) {
    nu[i] = chain.mu(A.list[i]) * expect_next(chain, hBA, A.list[i]);
    tot += nu[i];
  }
  if (!(tot > 0)) throw DomainError("last_exit_biased: all escape probabilities vanish");
  for (auto& v : nu) v /= tot;
  return nu;
}

RhoLambda rho_lambda(const ExactChain& chain, const StateSet& A, const StateSet& B, double lambda, double T,
                     const SolveOptions& opt) {
  require_disjoint(A, B);
  if (!(lambda >= 0) || !(T > 0)) throw ContractViolation("rho_lambda: need lambda >= 0, T > 0");
  const double z = std::exp(-lambda / T);
  const std::size_t a = A.count();
  RhoLambda out;
  out.K.setZero(a, a);
  DirichletSolver solver(chain, free_mask(chain, A, B), z, opt);
  std::vector<double> zero(chain.size(), 0.0);
  std::vector<double> bnd(chain.size(), 0.0);
  for (std::size_t j = 0; j < a; ++j) {
    bnd[A.list[j]] = 1.0;
    auto g = solver.solve(bnd, zero);
    bnd[A.list[j]] = 0.0;
    for (std::size_t i = 0; i < a; ++i) out.K(i, j) = z * expect_next(chain, g, A.list[i]);
  }
  Eigen::VectorXd rho = Eigen::VectorXd::Constant(a, 1.0 / a);
  const int max_it = 100000;
  for (int it = 1; it <= max_it; ++it) {
    Eigen::VectorXd next = out.K.transpose() * rho;
    double c = next.sum();
    if (!(c > 0)) throw NumericalError("rho_lambda: return kernel vanishes");
    next /= c;
    double diff = (next - rho).lpNorm<1>();
    rho = next;
    if (diff <= 1e-14) {
      out.iterations = it;
      out.C = (out.K.transpose() * rho).sum();
      out.rho.assign(rho.data(), rho.data() + a);
      return out;
    }
  }
  throw NumericalError("rho_lambda: power iteration did not converge");
}

std::vector<double> laplace_transform_all(const ExactChain& chain, const StateSet& B, double lambda, double T,
                                          const SolveOptions& opt) {
  if (!(lambda >= 0) || !(T > 0)) throw ContractViolation("laplace_transform: need lambda >= 0, T > 0");
  if (lambda == 0) return std::vector<double>(chain.size(), 1.0);
  const double z = std::exp(-lambda / T);
  return solve_dirichlet(chain, free_mask(chain, B), indicator(chain, B), std::vector<double>(chain.size(), 0.0), z,
                         opt);
}

double laplace_transform(const ExactChain& chain, std::uint32_t start, const StateSet& B, double lambda, double T,
                         const SolveOptions& opt) {
  return laplace_transform_all(chain, B, lambda, T, opt)[start];
}

RenewalCheck renewal_identity(const ExactChain& chain, const StateSet& A, const StateSet& B, double lambda, double T,
                              const SolveOptions& opt) {
  auto rl = rho_lambda(chain, A, B, lambda, T, opt);
  const double z = std::exp(-lambda / T);
  RenewalCheck r;
  r.C = rl.C;
  auto u = laplace_transform_all(chain, B, lambda, T, opt);
  auto v = solve_dirichlet(chain, free_mask(chain, A, B), indicator(chain, B), std::vector<double>(chain.size(), 0.0),
                           z, opt);
  double num = 0;
  for (std::size_t i = 0; i < A.count(); ++i) {
    r.lhs += rl.rho[i] * u[A.list[i]];
    num += rl.rho[i] * z * expect_next(chain, v, A.list[i]);
  }
  r.rhs = num / (1.0 - rl.C);
  r.residual = std::abs(r.lhs - r.rhs) / std::abs(r.lhs);
  return r;
}

UphillReport uphill_identities(const ExactChain& chain, const StateSet& A, const StateSet& B, double lambda, double T,
                               const SolveOptions& opt) {
  require_disjoint(A, B);
  UphillReport rep;
  auto hAB = potential(chain, A, B, opt);
  auto hBA = potential(chain, B, A, opt);
  auto fm = free_mask(chain, A, B);

  // left sides by direct solves
  auto tA = conditional_time(chain, A, B, hAB, nullptr, opt);  // E[tau_A; tau_A < tau_B]
  auto tB = conditional_time(chain, B, A, hBA, nullptr, opt);  // E[tau_B; tau_B < tau_A]
  StateSet AB = set_union(A, B);
  auto uAB = hitting_times(chain, AB, opt);

  std::vector<double> ret_A(chain.size()), ret_B(chain.size());
  for (std::uint32_t s = 0; s < chain.size(); ++s) {
    ret_A[s] = A.contains(s) ? 1.0 : B.contains(s) ? 0.0 : hAB[s];
    ret_B[s] = B.contains(s) ? 1.0 : A.contains(s) ? 0.0 : hBA[s];
  }

  double l7 = 0, l8 = 0, l9 = 0, pa = 0, pb = 0, muA = 0;
  for (auto s : A.list) {
    double mu = chain.mu(s);
    l7 += mu * tA[s];
    l8 += mu * (1.0 + expect_next(chain, uAB, s));
    l9 += mu * tB[s];
    pa += mu * expect_next(chain, ret_A, s);
    pb += mu * expect_next(chain, ret_B, s);
    muA += mu;
  }
  double h2 = 0, h1 = 0, hh = 0;
  for (std::uint32_t s = 0; s < chain.size(); ++s) {
    if (!fm[s]) continue;
    double mu = chain.mu(s);
    h2 += mu * hAB[s] * hAB[s];
    h1 += mu * hAB[s];
    hh += mu * hAB[s] * hBA[s];
  }
  auto side = [](double l, double r) { return IdentitySides{l, r, std::abs(l - r) / std::max(std::abs(l), std::abs(r))}; };
  rep.rev7 = side(l7, pa + h2);
  rep.rev8 = side(l8, muA + h1);
  rep.rev9 = side(l9, pb + hh);

  auto rl = rho_lambda(chain, A, B, lambda, T, opt);
  auto u = hitting_times(chain, B, opt);
  double eB = 0, eA = 0, Trho = 0, tAB = 0, pAB = 0;
  for (std::size_t i = 0; i < A.count(); ++i) {
    auto s = A.list[i];
    eB += rl.rho[i] * tB[s];
    eA += rl.rho[i] * tA[s];
    Trho += rl.rho[i] * u[s];
    tAB += rl.rho[i] * (1.0 + expect_next(chain, uAB, s));
    pAB += rl.rho[i] * expect_next(chain, ret_A, s);
  }
  rep.uphill_ratio = eB / eA;
  rep.t_lambda_residual = std::abs(Trho - tAB / (1.0 - pAB)) / Trho;
  // exact correction: E_rho[1{tau_A<tau_B} (E_{s(tau_A)} tau_B - T)] through the undiscounted return kernel
  auto rl0 = lambda == 0 ? rl : rho_lambda(chain, A, B, 0.0, T, opt);
  Eigen::Map<const Eigen::VectorXd> rho(rl.rho.data(), A.count());
  Eigen::VectorXd arrive = rl0.K.transpose() * rho;
  double corr = 0;
  for (std::size_t j = 0; j < A.count(); ++j) corr += arrive[j] * (u[A.list[j]] - Trho);
  double rhs = tAB + Trho * pAB + corr;
  rep.t_lambda_exact_residual = std::abs(Trho - rhs) / Trho;
  return rep;
}

DownhillReport h_transform_downhill(const ExactChain& chain, const StateSet& A, const StateSet& B,
                                    const StateSet& A_delta, const StateSet& B_delta, const SolveOptions& opt) {
  require_disjoint(A, B);
  require_disjoint(A, B_delta);
  for (auto s : A.list)
    if (!A_delta.contains(s)) throw ContractViolation("downhill: A must lie inside A_delta");
  for (auto s : B.list)
    if (!B_delta.contains(s)) throw ContractViolation("downhill: B must lie inside B_delta");
  DownhillReport rep;
  const std::uint32_t n = chain.size();
  auto h = potential(chain, A, B, opt);
  for (auto s : A_delta.list)
    if (!(h[s] > 0)) throw DomainError("downhill: h vanishes on A_delta");

  // p^h on {h > 0}: rows off A u B sum to one, mu^h = h^2 mu makes it reversible
  for (std::uint32_t s = 0; s < n; ++s) {
    if (!(h[s] > 0)) continue;
    double row = chain.hold(s) * h[s];
    for (int x = 0; x < chain.N(); ++x) {
      auto t = s ^ (1u << x);
      double pst = chain.flip(s, x) * h[t] / h[s];
      row += chain.flip(s, x) * h[t];
      if (h[t] > 0) {
        double a = h[s] * h[s] * chain.mu(s) * pst;
        double b = h[t] * h[t] * chain.mu(t) * chain.flip(t, x) * h[s] / h[t];
        rep.reversibility_error = std::max(rep.reversibility_error, std::abs(a - b) / std::max(a, b));
      }
    }
    if (!A.contains(s) && !B.contains(s)) rep.row_sum_error = std::max(rep.row_sum_error, std::abs(row / h[s] - 1.0));
  }

  // W(s) = E_s[tau_A; tau_A < tau_B]
  auto W = conditional_time(chain, A, B, h, nullptr, opt);

  // lhs: sum_A mu E[1{tau_Bd < tau_A} W(s(tau_Bd))]
  std::vector<char> fm(n);
  for (std::uint32_t s = 0; s < n; ++s) fm[s] = !A.contains(s) && !B_delta.contains(s);
  std::vector<double> bndW(n, 0.0), bndH(n, 0.0);
  for (auto s : B_delta.list) {
    bndW[s] = W[s];
    bndH[s] = h[s];
  }
  DirichletSolver solver(chain, fm, 1.0, opt);
  std::vector<double> zero(n, 0.0);
  auto g = solver.solve(bndW, zero);
  for (auto s : A.list) rep.lhs += chain.mu(s) * expect_next(chain, g, s);

  // the same quantity after path reversal: sum_{B_delta} mu P[tau_A < tau_Bd] W
  std::vector<double> toA(n, 0.0);
  {
    std::vector<double> bnd(n, 0.0);
    for (auto s : A.list) bnd[s] = 1.0;
    auto q = solver.solve(bnd, zero);
    double flipped = 0;
    for (auto s : B_delta.list) flipped += chain.mu(s) * expect_next(chain, q, s) * W[s];
    rep.flip_identity_residual = std::abs(flipped - rep.lhs) / std::max(std::abs(rep.lhs), 1e-300);
  }

  // rhs: sum_{A_delta \ A} mu^h P^h[tau_Bd < tau_A] = sum mu h E[h(s(tau_Bd)); tau_Bd < tau_A]
  auto k = solver.solve(bndH, zero);
  double ball = 0;
  for (auto s : A_delta.list) {
    if (A.contains(s)) continue;
    rep.rhs += chain.mu(s) * h[s] * k[s];
  }
  for (auto s : B_delta.list) ball += chain.mu(s) * h[s] * h[s];
  rep.rhs_with_ball = rep.rhs + ball;
  rep.holds = rep.lhs <= rep.rhs;
  rep.holds_with_ball = rep.lhs <= rep.rhs_with_ball * (1 + 1e-12);
  return rep;
}

double local_recurrence_probe(const ExactChain& chain, const std::vector<int>& delta_slices, const StateSet& B,
                              const SolveOptions& opt) {
  if (delta_slices.empty()) throw ContractViolation("local_recurrence_probe: empty neighbourhood");
  for (int id : delta_slices)
    for (auto s : chain.slice(id))
      if (B.contains(s)) throw ContractViolation("local_recurrence_probe: neighbourhood meets B");
  double worst = 0;
  for (int target : delta_slices) {
    auto T = chain.slice_set(target);
    auto hB = potential(chain, B, T, opt);  // P(tau_B < tau_T), 1 on B, 0 on T
    for (int src : delta_slices)
      for (auto s : chain.slice(src)) {
        double p = T.contains(s) ? expect_next(chain, hB, s) : hB[s];
        worst = std::max(worst, p);
      }
  }
  return worst;
}

}  // namespace rfcw

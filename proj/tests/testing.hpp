#pragma once

// Brute-force references built from the model definition alone: dense
// kernels, Gibbs weights and linear solves on the full state space.

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "rfcw/model.hpp"

namespace ref {

inline int spin(std::uint32_t s, int x) { return (s >> x) & 1 ? 1 : -1; }

inline double energy(std::uint32_t s, const std::vector<double>& h) {
  const int N = static_cast<int>(h.size());
  double m = 0, f = 0;
  for (int x = 0; x < N; ++x) {
    m += spin(s, x);
    f += h[x] * spin(s, x);
  }
  m /= N;
  return -0.5 * N * m * m - f;
}

// probability that an update at x sets +1
inline double p_plus(std::uint32_t s, int x, const std::vector<double>& h, double beta) {
  const int N = static_cast<int>(h.size());
  double g = h[x];
  for (int j = 0; j < N; ++j)
    if (j != x) g += double(spin(s, j)) / N;
  return 0.5 * (1.0 + std::tanh(beta * g));
}

inline Eigen::MatrixXd kernel(const std::vector<double>& h, double beta) {
  const int N = static_cast<int>(h.size());
  const int S = 1 << N;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(S, S);
  for (int s = 0; s < S; ++s)
    for (int x = 0; x < N; ++x) {
      double pp = p_plus(s, x, h, beta);
      int up = s | (1 << x), dn = s & ~(1 << x);
      P(s, up) += pp / N;
      P(s, dn) += (1 - pp) / N;
    }
  return P;
}

inline Eigen::VectorXd gibbs(const std::vector<double>& h, double beta) {
  const int S = 1 << h.size();
  Eigen::VectorXd w(S);
  double mx = -1e300;
  for (int s = 0; s < S; ++s) mx = std::max(mx, -beta * energy(s, h));
  for (int s = 0; s < S; ++s) w(s) = std::exp(-beta * energy(s, h) - mx);
  return w / w.sum();
}

// E_s tau_B (t > 0 convention handled by the caller: this is 0 on B)
inline Eigen::VectorXd hitting(const Eigen::MatrixXd& P, const std::vector<char>& inB) {
  const int S = static_cast<int>(P.rows());
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(S, S);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(S);
  for (int s = 0; s < S; ++s) {
    if (inB[s]) continue;
    M.row(s) -= P.row(s);
    b(s) = 1;
  }
  return M.fullPivLu().solve(b);
}

// P_s(tau_A < tau_B), 1 on A and 0 on B
inline Eigen::VectorXd potential(const Eigen::MatrixXd& P, const std::vector<char>& inA, const std::vector<char>& inB) {
  const int S = static_cast<int>(P.rows());
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(S, S);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(S);
  for (int s = 0; s < S; ++s) {
    if (inA[s]) b(s) = 1;
    if (inA[s] || inB[s]) continue;
    M.row(s) -= P.row(s);
  }
  return M.fullPivLu().solve(b);
}

// E_s z^{tau_B}, 1 on B
inline Eigen::VectorXd laplace(const Eigen::MatrixXd& P, const std::vector<char>& inB, double z) {
  const int S = static_cast<int>(P.rows());
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(S, S);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(S);
  for (int s = 0; s < S; ++s) {
    if (inB[s]) {
      b(s) = 1;
      continue;
    }
    M.row(s) -= z * P.row(s);
  }
  return M.fullPivLu().solve(b);
}

}  // namespace ref

#include "rfcw/linsolve.hpp"

#include <cmath>

namespace rfcw {

namespace {
double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
}  // namespace

CgResult conjugate_gradient(const std::function<void(const std::vector<double>&, std::vector<double>&)>& apply,
                            const std::vector<double>& diag, const std::vector<double>& b, std::vector<double>& x,
                            double tol, int max_iter) {
  const std::size_t n = b.size();
  CgResult res;
  x.resize(n, 0.0);
  double bnorm = std::sqrt(dot(b, b));
  if (bnorm == 0) {
    std::fill(x.begin(), x.end(), 0.0);
    res.converged = true;
    return res;
  }
  std::vector<double> r(n), z(n), p(n), q(n);
  apply(x, q);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
  for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
  p = z;
  double rz = dot(r, z);
  double best = INFINITY;
  int since_best = 0;
  for (int it = 0; it < max_iter; ++it) {
    double rnorm = std::sqrt(dot(r, r));
    res.iterations = it;
    res.rel_residual = rnorm / bnorm;
    if (res.rel_residual <= tol) {
      res.converged = true;
      return res;
    }
    // stagnation at the rounding floor: stop rather than wander
    if (rnorm < best * 0.999) {
      best = rnorm;
      since_best = 0;
    } else if (++since_best > 200) {
      break;
    }
    apply(p, q);
    double alpha = rz / dot(p, q);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    // periodic true residual to limit drift
    if ((it + 1) % 50 == 0) {
      apply(x, q);
      for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    double rz_new = dot(r, z);
    double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  apply(x, q);
  double rn = 0;
  for (std::size_t i = 0; i < n; ++i) rn += (b[i] - q[i]) * (b[i] - q[i]);
  res.rel_residual = std::sqrt(rn) / bnorm;
  res.converged = res.rel_residual <= tol;
  return res;
}

}  // namespace rfcw

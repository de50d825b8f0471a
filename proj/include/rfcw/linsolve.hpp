#pragma once

#include <functional>
#include <vector>

namespace rfcw {

struct CgResult {
  int iterations = 0;
  double rel_residual = 0;
  bool converged = false;
};

// Jacobi-preconditioned conjugate gradient for a symmetric positive definite
// operator given matrix-free. x holds the initial guess on entry.
CgResult conjugate_gradient(const std::function<void(const std::vector<double>&, std::vector<double>&)>& apply,
                            const std::vector<double>& diag, const std::vector<double>& b, std::vector<double>& x,
                            double tol, int max_iter);

}  // namespace rfcw

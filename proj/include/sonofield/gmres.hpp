#pragma once

#include <functional>

#include <Eigen/Core>

namespace sonofield {

struct GmresResult {
    Eigen::VectorXcd x;
    int iterations = 0;
    double residual = 0.0;  // true relative residual |Ax - b| / |b|
    bool converged = false;
};

/// Full (unrestarted) GMRES from a zero initial guess, at most max_iter
/// Arnoldi steps. The returned iterate minimizes the residual over the
/// final Krylov space; `converged` is false when the tolerance was not met.
GmresResult gmres(const std::function<void(const Eigen::VectorXcd&, Eigen::VectorXcd&)>& apply,
                  const Eigen::VectorXcd& rhs, double tol, int max_iter);

}  // namespace sonofield

#include "sonofield/gmres.hpp"

#include <cmath>
#include <complex>
#include <vector>

#include "sonofield/error.hpp"

namespace sonofield {

namespace {

using Complex = std::complex<double>;

// Complex Givens rotation zeroing b in (a, b).
void make_rotation(Complex a, Complex b, double& c, Complex& s) {
    const double na = std::abs(a);
    if (na == 0.0) {
        c = 0.0;
        s = 1.0;
        return;
    }
    const double norm = std::hypot(na, std::abs(b));
    c = na / norm;
    s = (a / na) * std::conj(b) / norm;
}

void check_finite(const Eigen::VectorXcd& v) {
    if (!v.allFinite()) throw NumericError("non-finite value encountered in GMRES");
}

}  // namespace

GmresResult gmres(const std::function<void(const Eigen::VectorXcd&, Eigen::VectorXcd&)>& apply,
                  const Eigen::VectorXcd& rhs, double tol, int max_iter) {
    const Eigen::Index n = rhs.size();
    check_finite(rhs);
    GmresResult result;
    result.x = Eigen::VectorXcd::Zero(n);
    const double beta = rhs.norm();
    if (beta == 0.0) {
        result.converged = true;
        return result;
    }

    const int m = std::max(1, max_iter);
    std::vector<Eigen::VectorXcd> basis;
    basis.reserve(m + 1);
    basis.push_back(rhs / beta);
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(m + 1, m);
    std::vector<double> cs(m);
    std::vector<Complex> sn(m);
    Eigen::VectorXcd g = Eigen::VectorXcd::Zero(m + 1);
    g(0) = beta;

    Eigen::VectorXcd w(n);
    int steps = 0;
    for (int j = 0; j < m; ++j) {
        apply(basis[j], w);
        check_finite(w);
        for (int i = 0; i <= j; ++i) {
            h(i, j) = basis[i].dot(w);  // conjugates basis[i]
            w -= h(i, j) * basis[i];
        }
        const double hn = w.norm();
        h(j + 1, j) = hn;
        for (int i = 0; i < j; ++i) {
            const Complex t = cs[i] * h(i, j) + sn[i] * h(i + 1, j);
            h(i + 1, j) = -std::conj(sn[i]) * h(i, j) + cs[i] * h(i + 1, j);
            h(i, j) = t;
        }
        make_rotation(h(j, j), h(j + 1, j), cs[j], sn[j]);
        h(j, j) = cs[j] * h(j, j) + sn[j] * h(j + 1, j);
        h(j + 1, j) = 0.0;
        g(j + 1) = -std::conj(sn[j]) * g(j);
        g(j) = cs[j] * g(j);
        steps = j + 1;
        if (std::abs(g(j + 1)) / beta <= tol || hn == 0.0) break;
        basis.push_back(w / hn);
    }

    // Back substitution on the rotated upper-triangular Hessenberg block.
    Eigen::VectorXcd y(steps);
    for (int i = steps - 1; i >= 0; --i) {
        Complex acc = g(i);
        for (int k = i + 1; k < steps; ++k) acc -= h(i, k) * y(k);
        y(i) = acc / h(i, i);
    }
    for (int i = 0; i < steps; ++i) result.x += y(i) * basis[i];
    check_finite(result.x);

    apply(result.x, w);
    result.residual = (rhs - w).norm() / beta;
    result.iterations = steps;
    result.converged = result.residual <= tol;
    return result;
}

}  // namespace sonofield

#pragma once

// Sparse factorizations of the discrete Dirichlet Laplacian shared by the
// elliptic solvers: the H^1 preconditioner and the leading eigenpairs.

#include <cmath>
#include <utility>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "pmelab/errors.hpp"
#include "pmelab/grid.hpp"

namespace pmelab {

/// Factorized -Delta_h. `solve` applies the inverse, i.e. maps an L^2
/// gradient to the corresponding W^{1,2}_0 (Sobolev) gradient.
class LaplaceSolver {
public:
    explicit LaplaceSolver(DomainHandle d) : domain_(std::move(d)), A_(negative_laplacian_matrix(*domain_)) {
        ldlt_.compute(A_);
        if (ldlt_.info() != Eigen::Success) throw NumericalFailure("LaplaceSolver: factorization failed");
    }

    const DomainHandle& domain() const noexcept { return domain_; }
    const Eigen::SparseMatrix<double>& matrix() const noexcept { return A_; }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return ldlt_.solve(rhs); }
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return A_ * x; }

private:
    DomainHandle domain_;
    Eigen::SparseMatrix<double> A_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

struct Eigenpair {
    double value = 0.0;
    Eigen::VectorXd vector;  // unit Euclidean norm
};

/// Smallest eigenpair of -Delta_h by inverse power iteration. `deflate` holds
/// previously found (Euclidean-orthonormal) eigenvectors to project out.
inline Eigenpair inverse_power_iteration(const LaplaceSolver& lap, const std::vector<Eigen::VectorXd>& deflate = {},
                                         double rtol = 1e-13, int max_iters = 20000) {
    const auto n = static_cast<Eigen::Index>(lap.domain()->size());
    Eigen::VectorXd x(n);
    // Deterministic start with components along the low modes.
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto c = lap.domain()->coordinates(static_cast<std::size_t>(k));
        x[k] = 1.0 + 0.5 * std::sin(1.7 * c[0] + 0.3) + 0.25 * std::cos(2.3 * c[1] + 0.1 * c[0]);
    }
    auto project = [&](Eigen::VectorXd& v) {
        for (const auto& e : deflate) v -= e.dot(v) * e;
    };
    project(x);
    x.normalize();
    double lambda = x.dot(lap.apply(x));
    for (int it = 0; it < max_iters; ++it) {
        Eigen::VectorXd y = lap.solve(x);
        project(y);
        y.normalize();
        const double next = y.dot(lap.apply(y));
        const double change = std::fabs(next - lambda);
        x = std::move(y);
        lambda = next;
        const double resid = (lap.apply(x) - lambda * x).norm();
        if (change <= rtol * lambda && resid <= 1e-9 * lambda) {
            if (x.sum() < 0.0) x = -x;
            return {lambda, x};
        }
    }
    throw NumericalFailure("inverse_power_iteration: no convergence");
}

}  // namespace pmelab

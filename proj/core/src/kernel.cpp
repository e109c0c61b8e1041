#include "cdt/kernel.hpp"

#include <cmath>
#include <limits>

#include "cdt/errors.hpp"

namespace cdt {

Kernel build_kernel(const NetworkState& state, const Matrix& inputs, int step) {
    const Matrix J = jacobian(state, inputs);
    const Eigen::Index n = J.rows();
    // rankUpdate fills one triangle; mirroring it makes the result exactly symmetric.
    Matrix theta = Matrix::Zero(n, n);
    theta.selfadjointView<Eigen::Lower>().rankUpdate(J);
    theta.triangularView<Eigen::StrictlyUpper>() = theta.transpose();
    return Kernel{std::move(theta), state.spec.output_dim, step};
}

Kernel kernel_from_matrix(Matrix theta, int output_dim) {
    if (theta.rows() != theta.cols()) throw DimensionError("kernel must be square");
    if (output_dim < 1 || theta.rows() % output_dim != 0)
        throw DimensionError("kernel size must be a multiple of output_dim");
    if (!theta.allFinite()) throw DomainError("kernel contains non-finite entries");
    const double norm = theta.norm();
    if (norm > 0.0 && (theta - theta.transpose()).norm() > 1e-10 * norm) throw DomainError("kernel is not symmetric");
    return Kernel{std::move(theta), output_dim, 0};
}

double rank_tolerance(double scale, Eigen::Index n) {
    return scale * static_cast<double>(n) * std::numeric_limits<double>::epsilon() * 1e3;
}

KernelDiagnostics kernel_diagnostics(const Kernel& kernel) {
    const Matrix& T = kernel.theta_matrix;
    Eigen::SelfAdjointEigenSolver<Matrix> es(T, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw DiagnosticError("symmetric eigendecomposition of the kernel failed");

    KernelDiagnostics d;
    d.eigenvalues = es.eigenvalues();
    d.min_eig = d.eigenvalues.minCoeff();
    d.max_eig = d.eigenvalues.maxCoeff();
    const double scale = d.eigenvalues.cwiseAbs().maxCoeff();
    d.rank_tolerance = rank_tolerance(scale, T.rows());
    d.rank = static_cast<int>((d.eigenvalues.array() > d.rank_tolerance).count());
    d.condition_estimate = d.min_eig > d.rank_tolerance ? d.max_eig / d.min_eig
                                                        : std::numeric_limits<double>::infinity();
    const double norm = T.norm();
    d.symmetry_error = norm > 0.0 ? (T - T.transpose()).norm() / norm : 0.0;
    return d;
}

} // namespace cdt

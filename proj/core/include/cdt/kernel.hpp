#pragma once

#include "cdt/network.hpp"

namespace cdt {

/// Empirical neural tangent kernel Theta(k0) = J J^T over a batch, with the
/// same data-major block layout as the stacked outputs: block (i, j) of size
/// n_L x n_L couples sample i with sample j.
struct Kernel {
    Matrix theta_matrix;
    int output_dim = 1;
    int built_at_step = 0;

    Eigen::Index dim() const { return theta_matrix.rows(); }
    Eigen::Index num_samples() const { return theta_matrix.rows() / output_dim; }
};

Kernel build_kernel(const NetworkState& state, const Matrix& inputs, int step = 0);
inline Kernel build_kernel(const NetworkState& state, const Batch& batch, int step = 0) {
    return build_kernel(state, batch.inputs, step);
}

/// Wraps an explicit symmetric matrix (tests, externally computed kernels).
Kernel kernel_from_matrix(Matrix theta, int output_dim = 1);

struct KernelDiagnostics {
    Vector eigenvalues; // ascending
    double min_eig = 0.0;
    double max_eig = 0.0;
    int rank = 0;
    double rank_tolerance = 0.0;
    double condition_estimate = 0.0; // max/min over the numerical range; +inf when singular
    double symmetry_error = 0.0;     // ||T - T^T||_F / ||T||_F
};

/// Numerical rank tolerance shared by kernel diagnostics and the PBH test:
/// scale * n * machine-epsilon * 1e3.
double rank_tolerance(double scale, Eigen::Index n);

/// Symmetric eigendecomposition of Theta; throws DiagnosticError on failure.
KernelDiagnostics kernel_diagnostics(const Kernel& kernel);

} // namespace cdt

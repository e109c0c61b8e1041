#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cdt/kernel.hpp"
#include "cdt/loss.hpp"

namespace cdt {

/// Evaluation point for losses whose Hessian depends on the outputs.
struct OutputPoint {
    Vector y_hat;
    Vector y;
};

inline constexpr double kStabilityTol = 1e-9;

struct StabilityReport {
    LossKind loss_kind = LossKind::sse;
    double alpha = 0.0;
    Eigen::VectorXcd eigenvalues;   // of I - alpha * Theta * H_L
    double spectral_radius_open_loop = 0.0;
    bool stable = false;            // all |lambda| <= 1 + tol
    bool strictly_stable = false;   // all |lambda| <  1 - tol
    double safe_alpha_bound = 0.0;  // 2 / lambda_max(Theta * H_L)
    std::string note;
};

struct UnreachableMode {
    std::complex<double> eigenvalue;
    int defect = 0;
    /// ||W^H e0|| / ||e0|| for the initial output error e0 over the left null
    /// space W of [zI - A, B]; NaN when no error vector was supplied.
    double excitation = std::numeric_limits<double>::quiet_NaN();
};

struct ReachabilityReport {
    double alpha = 0.0;
    bool reachable = false;
    bool stabilizable = false;
    /// Every unreachable mode is either asymptotically stable or not excited
    /// by the supplied initial error (duplicate samples carrying equal labels).
    bool stabilizable_along_labels = false;
    std::vector<UnreachableMode> unreachable_modes;
};

struct AnalysisReport {
    StabilityReport stability;
    ReachabilityReport reachability;
    double gamma = 1.0; // exponential-bound constants for validity monitoring
    double kappa = 1.0;
};

/// Generic PBH test for x+ = A x + B u: rank [zI - A, B] = n at each eigenvalue
/// z of A, decided by singular-value thresholding with rank_tolerance().
/// `initial_error`, when given, is used to grade unreachable modes.
ReachabilityReport pbh_test(const Matrix& A, const Matrix& B,
                            const std::optional<Vector>& initial_error = std::nullopt);

/// Eigenvalue test of the local dynamics I - alpha * Theta * H_L. For mse/sse
/// H_L is constant; cross-entropy needs `point`; mae is reported unstable.
StabilityReport stability_check(const Kernel& kernel, double alpha, const LossModel& loss,
                                const std::optional<OutputPoint>& point = std::nullopt);

/// PBH test on (I - alpha * c * Theta, alpha * c * Theta) with c the constant
/// Hessian scale of `loss` (1 for sse, 1/(r n_L) for mse).
ReachabilityReport reachability_check(const Kernel& kernel, double alpha,
                                      const LossModel& loss = LossModel(LossKind::sse),
                                      const std::optional<Vector>& initial_error = std::nullopt);

AnalysisReport analyze(const Kernel& kernel, double alpha, const LossModel& loss,
                       const std::optional<OutputPoint>& point = std::nullopt);

/// Default witnesses for ||x(k) - x_e|| <= gamma * kappa^(k-k0) * ||x(k0) - x_e||:
/// kappa = spectral radius of A, gamma = condition number of A's eigenvector basis.
struct BoundConstants {
    double gamma = 1.0;
    double kappa = 1.0;
};
BoundConstants default_bound_constants(const Matrix& A);

struct EquilibriumConditions {
    bool loss_minimum = false;          // dL/dy_hat = 0
    bool frozen = false;                // alpha = 0
    bool null_kernel = false;           // Theta = 0
    bool gradient_in_nullspace = false; // Theta * dL/dy_hat = 0 with both nonzero

    bool any() const { return loss_minimum || frozen || null_kernel || gradient_in_nullspace; }
    std::vector<std::string> names() const;
};

inline constexpr double kEquilibriumTol = 1e-10;

EquilibriumConditions equilibrium_classify(const Kernel& kernel, double alpha, const LossModel& loss,
                                           const Vector& y_hat, const Vector& y);

struct LagrangeOptions {
    int num_directions = 16;  // random unit probes per segment point
    int segment_points = 5;   // points along theta0 -> theta0 + displacement
    double fd_step = 1e-4;    // central-difference step for J(theta +- h u) u
    std::uint64_t seed = 0x5eed;
};

/// Heuristic estimate of max ||d^2 y_hat / d theta^2||_2 over the segment
/// theta0 -> theta0 + displacement. Combines central-difference curvature along
/// random unit directions with secant probes along the displacement itself.
/// A sampled maximum, so it can under-estimate the true supremum.
double estimate_output_curvature(const NetworkState& state, const Matrix& inputs, const Vector& displacement,
                                 const LagrangeOptions& opts = {});

/// 1/2 * curvature * ||displacement||^2, bounding ||y_hat(theta0 + d) - (y_hat(theta0) + J0 d)||.
double lagrange_bound(const NetworkState& state, const Matrix& inputs, const Vector& displacement,
                      const LagrangeOptions& opts = {});

struct ValidityReport {
    /// First k where ||y_lin(k) - y_e|| > gamma kappa^(k-k0) ||y_lin(k0) - y_e|| - bound(k).
    std::optional<int> violation_step;
    /// First k where the observed ||y_hat(k) - y_lin(k)|| exceeds bound(k).
    std::optional<int> gap_exceeds_bound_step;
    std::vector<double> gap;
};

/// Online check of the local model's exponential bound. Traces are indexed from
/// k0 (entry 0); `bound_series[k]` is the Lagrange term at step k.
ValidityReport validity_monitor(const std::vector<Vector>& global_trace, const std::vector<Vector>& local_trace,
                                const Vector& equilibrium, double gamma, double kappa,
                                const std::vector<double>& bound_series);

enum class LyapunovVerdict { holds, boundary, violated };

struct BoundednessVerdict {
    LossKind kind = LossKind::sse;
    std::optional<bool> exponentially_bounded; // unset for cross-entropy (pointwise only)
    double spectral_radius = std::numeric_limits<double>::quiet_NaN();
    double mae_radius = std::numeric_limits<double>::quiet_NaN();
    /// alpha^2 y^T Yc^T T^T T Yc y - 2 alpha y_hat^T T Yc y with Yc = diag(1 / y_hat).
    double lyapunov_lhs = std::numeric_limits<double>::quiet_NaN();
    /// V(f(y_hat)) - V(y_hat) for V(x) = x^T x under y_hat+ = y_hat + alpha T Yc y.
    double lyapunov_delta = std::numeric_limits<double>::quiet_NaN();
    std::optional<LyapunovVerdict> lyapunov;
    std::string note;
};

BoundednessVerdict loss_boundedness(const LossModel& loss, const Kernel& kernel, double alpha,
                                    const Vector& y_hat, const Vector& y);

std::string_view to_string(LyapunovVerdict v);

} // namespace cdt

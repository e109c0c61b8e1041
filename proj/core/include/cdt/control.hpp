#pragma once

#include <complex>
#include <vector>

#include "cdt/kernel.hpp"
#include "cdt/loss.hpp"

namespace cdt {

/// LQR problem on the augmented output state x = [y_hat; 1]:
///
///   x(k+1) = A x(k) + B y_u(k)
///   A = [[I - a T, a T y], [0, 1]],  B = [[a T], [0]],  a T = alpha * c * Theta
///   Q_tilde = M^T Q M with M = [I, -y],  R = p I
///
/// c is the constant Hessian scale of the trained loss (1 for sse, 1/(r n_L)
/// for mse) so the model matches the trainer's actual update.
struct AugmentedSystem {
    Matrix A;
    Matrix B;
    Matrix Q;       // output weight (n x n)
    Matrix Q_tilde; // (n+1) x (n+1)
    Matrix R;       // n x n
    double alpha = 0.0;
    Vector y;
    LossKind loss_kind = LossKind::sse;
    double loss_scale = 1.0;

    Eigen::Index output_size() const { return y.size(); }
    /// [y; 1], the A-invariant target direction.
    Vector target_state() const;
    /// [y_hat; 1]
    Vector augment(const Vector& y_hat) const;
};

AugmentedSystem build_augmented_system(const Kernel& kernel, double alpha, const Vector& y, const Matrix& q_weight,
                                       double p, LossKind loss = LossKind::sse);
AugmentedSystem build_augmented_system(const Kernel& kernel, double alpha, const Vector& y, double q_scale, double p,
                                       LossKind loss = LossKind::sse);

enum class DareMethod {
    /// P_{t+1} = A'P_tA + Q - A'P_tB (R + B'P_tB)^{-1} B'P_tA from P_0 = Q.
    fixed_point,
    /// Structure-preserving doubling: visits the same iterate sequence at
    /// horizons 2^t, so slow modes converge in O(log) sweeps.
    doubling,
};

std::string_view to_string(DareMethod m);
DareMethod parse_dare_method(std::string_view name);

struct DareOptions {
    int max_iters = 100000;
    double tol = 1e-10;
    DareMethod method = DareMethod::fixed_point;
    bool record_history = false;
};

struct RiccatiSolution {
    Matrix P;
    Matrix K;
    double residual = 0.0; // ||P - Ric(P)||_F / (1 + ||P||_F)
    int iterations = 0;
    bool converged = false;          // relative increment dropped below tol
    std::vector<double> increments; // ||P_{t+1} - P_t||_F per sweep, when recorded
};

/// Solves P = A'PA + Q - A'PB (R + B'PB)^{-1} B'PA and K = (R + B'PB)^{-1} B'PA.
/// Throws SolverError when the relative increment never drops below tol and the
/// final residual exceeds tol; ConditioningError when R + B'PB is singular.
RiccatiSolution solve_riccati(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                              const DareOptions& opts = {});

double riccati_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, const Matrix& P);
Matrix lqr_gain(const Matrix& A, const Matrix& B, const Matrix& R, const Matrix& P);

/// Riccati solution and gain for an augmented system. P solves the equation
/// without the 1/2 factor, so the optimal infinite-horizon value of
/// sum_k x'Q_tilde x + y_u'R y_u is x0'P x0; the 1/2-weighted cost is half that.
struct FeedbackLaw {
    Matrix P;
    Matrix K; // n x (n+1); y_u = -K [y_hat; 1]
    double dare_residual = 0.0;
    double closed_loop_radius_deflated = 0.0;
    int iterations = 0;
    std::vector<double> increments;
    DareMethod method = DareMethod::fixed_point;

    /// x0'P x0 for x0 = [y0; 1] (unweighted convention).
    double optimal_cost(const Vector& y0) const;
    /// 1/2 x0'P x0, the value of the 1/2-weighted objective.
    double optimal_cost_half(const Vector& y0) const { return 0.5 * optimal_cost(y0); }
};

inline constexpr const char* kCostConvention =
    "P solves P = A'PA + Q - A'PB(R+B'PB)^-1 B'PA; optimal sum x'Qx + u'Ru = x0'P x0 (the 1/2-weighted cost is x0'P x0 / 2)";

FeedbackLaw solve_dare(const AugmentedSystem& sys, const DareOptions& opts = {});

/// Independent route: solve the Riccati equation of the error system
/// (I - aT, aT, Q, R), then rebuild P and K on [y_hat; 1] with K [y; 1] = 0.
FeedbackLaw solve_dare_reduced(const AugmentedSystem& sys, const DareOptions& opts = {});

struct ClosedLoop {
    Matrix matrix;                        // A - B K
    Eigen::VectorXcd eigenvalues;         // all n+1
    Eigen::VectorXcd deflated_eigenvalues; // the n eigenvalues off span{[y;1]}
    std::complex<double> structural_eigenvalue{1.0, 0.0};
    double deflated_radius = 0.0;
    double target_residual = 0.0;         // ||(A - BK)[y;1] - [y;1]||
};

ClosedLoop closed_loop(const AugmentedSystem& sys, const FeedbackLaw& law);

/// Local trajectory y_lin(0..steps) from y_lin(0) = y0 (open loop).
std::vector<Vector> simulate_local(const AugmentedSystem& sys, const Vector& y0, int steps);
/// Closed-loop variant x(k+1) = (A - BK) x(k).
std::vector<Vector> simulate_local(const AugmentedSystem& sys, const FeedbackLaw& law, const Vector& y0, int steps);

/// sum_{k < steps} x'Q x + u'R u along x(k+1) = (A - B K) x(k), u = -K x.
double closed_loop_cost(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, const Matrix& K,
                        const Vector& x0, int steps);

} // namespace cdt

#include "cdt/control.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "cdt/errors.hpp"

namespace cdt {

namespace {

void symmetrize(Matrix& P) { P = 0.5 * (P + P.transpose()).eval(); }

Eigen::LDLT<Matrix> factor_gain_denominator(const Matrix& B, const Matrix& R, const Matrix& P) {
    const Matrix S = R + B.transpose() * P * B;
    Eigen::LDLT<Matrix> ldlt(S);
    if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-15))
        throw ConditioningError("R + B'PB is numerically singular");
    return ldlt;
}

Matrix riccati_map(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, const Matrix& P) {
    const Matrix PA = P * A;
    const Matrix G = B.transpose() * PA;
    const auto ldlt = factor_gain_denominator(B, R, P);
    Matrix next = A.transpose() * PA + Q - G.transpose() * ldlt.solve(G);
    symmetrize(next);
    return next;
}

double relative_change(const Matrix& next, const Matrix& prev) {
    const double diff = (next - prev).norm();
    if (diff == 0.0) return 0.0;
    return diff / std::max(next.norm(), std::numeric_limits<double>::min());
}

void check_problem(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
    const Eigen::Index n = A.rows();
    if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != B.cols() ||
        R.cols() != B.cols())
        throw DimensionError("inconsistent Riccati problem dimensions");
}

RiccatiSolution iterate_fixed_point(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                                    const DareOptions& opts) {
    RiccatiSolution sol;
    Matrix P = Q;
    symmetrize(P);
    for (int it = 1; it <= opts.max_iters; ++it) {
        Matrix next = riccati_map(A, B, Q, R, P);
        if (!next.allFinite()) throw SolverError("Riccati iteration produced non-finite values", std::numeric_limits<double>::infinity(), it);
        const double change = relative_change(next, P);
        if (opts.record_history) sol.increments.push_back((next - P).norm());
        P = std::move(next);
        sol.iterations = it;
        if (change < opts.tol) {
            sol.converged = true;
            break;
        }
    }
    sol.P = std::move(P);
    return sol;
}

RiccatiSolution iterate_doubling(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                                 const DareOptions& opts) {
    const Eigen::Index n = A.rows();
    RiccatiSolution sol;
    Eigen::LDLT<Matrix> r_ldlt(R);
    if (r_ldlt.info() != Eigen::Success || !(r_ldlt.rcond() > 1e-15)) throw ConditioningError("R is singular");

    Matrix Ak = A;
    Matrix Gk = B * r_ldlt.solve(B.transpose());
    symmetrize(Gk);
    Matrix Hk = Q;
    symmetrize(Hk);
    const Matrix I = Matrix::Identity(n, n);
    for (int it = 1; it <= opts.max_iters; ++it) {
        Eigen::PartialPivLU<Matrix> lu(I + Gk * Hk);
        const Matrix Winv = lu.inverse();
        const Matrix WinvA = Winv * Ak;
        Matrix H_next = Hk + Ak.transpose() * Hk * WinvA;
        Matrix G_next = Gk + Ak * Winv * Gk * Ak.transpose();
        Ak = Ak * WinvA;
        symmetrize(H_next);
        symmetrize(G_next);
        if (!H_next.allFinite() || !G_next.allFinite() || !Ak.allFinite())
            throw SolverError("doubling iteration produced non-finite values", std::numeric_limits<double>::infinity(), it);
        const double change = relative_change(H_next, Hk);
        if (opts.record_history) sol.increments.push_back((H_next - Hk).norm());
        Hk = std::move(H_next);
        Gk = std::move(G_next);
        sol.iterations = it;
        if (change < opts.tol) {
            sol.converged = true;
            break;
        }
    }
    sol.P = std::move(Hk);
    return sol;
}

} // namespace

std::string_view to_string(DareMethod m) {
    return m == DareMethod::fixed_point ? "fixed_point" : "doubling";
}

DareMethod parse_dare_method(std::string_view name) {
    if (name == "fixed_point") return DareMethod::fixed_point;
    if (name == "doubling") return DareMethod::doubling;
    throw DomainError("unknown DARE method '" + std::string(name) + "'");
}

Vector AugmentedSystem::target_state() const { return augment(y); }

Vector AugmentedSystem::augment(const Vector& y_hat) const {
    if (y_hat.size() != y.size()) throw DimensionError("output vector does not match the system size");
    Vector x(y.size() + 1);
    x << y_hat, 1.0;
    return x;
}

AugmentedSystem build_augmented_system(const Kernel& kernel, double alpha, const Vector& y, const Matrix& q_weight,
                                       double p, LossKind loss) {
    const Eigen::Index n = kernel.dim();
    if (!(p > 0.0)) throw DomainError("input penalty p must be > 0");
    if (!(alpha > 0.0)) throw DomainError("alpha must be > 0");
    if (y.size() != n) throw DimensionError("label vector does not match the kernel size");
    if (q_weight.rows() != n || q_weight.cols() != n) throw DimensionError("Q must be n x n");
    const LossModel model(loss);
    if (!model.is_quadratic()) throw DomainError("the augmented LQR model requires a quadratic loss (mse or sse)");

    AugmentedSystem sys;
    sys.alpha = alpha;
    sys.y = y;
    sys.loss_kind = loss;
    sys.loss_scale = model.quadratic_scale(n);
    sys.Q = q_weight;

    const Matrix aT = alpha * sys.loss_scale * kernel.theta_matrix;
    sys.A = Matrix::Zero(n + 1, n + 1);
    sys.A.topLeftCorner(n, n) = Matrix::Identity(n, n) - aT;
    sys.A.topRightCorner(n, 1) = aT * y;
    sys.A(n, n) = 1.0;

    sys.B = Matrix::Zero(n + 1, n);
    sys.B.topRows(n) = aT;

    Matrix M(n, n + 1);
    M << Matrix::Identity(n, n), -y;
    sys.Q_tilde = M.transpose() * q_weight * M;
    symmetrize(sys.Q_tilde);

    sys.R = p * Matrix::Identity(n, n);
    return sys;
}

AugmentedSystem build_augmented_system(const Kernel& kernel, double alpha, const Vector& y, double q_scale, double p,
                                       LossKind loss) {
    const Eigen::Index n = kernel.dim();
    return build_augmented_system(kernel, alpha, y, q_scale * Matrix::Identity(n, n), p, loss);
}

double riccati_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, const Matrix& P) {
    return (P - riccati_map(A, B, Q, R, P)).norm() / (1.0 + P.norm());
}

Matrix lqr_gain(const Matrix& A, const Matrix& B, const Matrix& R, const Matrix& P) {
    const auto ldlt = factor_gain_denominator(B, R, P);
    return ldlt.solve(B.transpose() * P * A);
}

RiccatiSolution solve_riccati(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                              const DareOptions& opts) {
    check_problem(A, B, Q, R);
    if (opts.max_iters < 1 || !(opts.tol > 0.0)) throw DomainError("invalid DARE options");
    RiccatiSolution sol = opts.method == DareMethod::doubling ? iterate_doubling(A, B, Q, R, opts)
                                                              : iterate_fixed_point(A, B, Q, R, opts);
    sol.residual = riccati_residual(A, B, Q, R, sol.P);
    if (!sol.converged && sol.residual > opts.tol) {
        std::ostringstream os;
        os << "Riccati iteration did not converge in " << sol.iterations << " sweeps (residual " << sol.residual << ")";
        throw SolverError(os.str(), sol.residual, sol.iterations);
    }
    sol.K = lqr_gain(A, B, R, sol.P);
    return sol;
}

double FeedbackLaw::optimal_cost(const Vector& y0) const {
    const Eigen::Index n = P.rows() - 1;
    if (y0.size() != n) throw DimensionError("initial output does not match the system size");
    Vector x(n + 1);
    x << y0, 1.0;
    return x.dot(P * x);
}

namespace {

FeedbackLaw finish_law(const AugmentedSystem& sys, Matrix P, Matrix K, int iterations, std::vector<double> increments,
                       DareMethod method) {
    FeedbackLaw law;
    law.P = std::move(P);
    law.K = std::move(K);
    law.iterations = iterations;
    law.increments = std::move(increments);
    law.method = method;
    law.dare_residual = riccati_residual(sys.A, sys.B, sys.Q_tilde, sys.R, law.P);
    law.closed_loop_radius_deflated = closed_loop(sys, law).deflated_radius;
    return law;
}

} // namespace

FeedbackLaw solve_dare(const AugmentedSystem& sys, const DareOptions& opts) {
    RiccatiSolution sol = solve_riccati(sys.A, sys.B, sys.Q_tilde, sys.R, opts);
    return finish_law(sys, std::move(sol.P), std::move(sol.K), sol.iterations, std::move(sol.increments), opts.method);
}

FeedbackLaw solve_dare_reduced(const AugmentedSystem& sys, const DareOptions& opts) {
    const Eigen::Index n = sys.output_size();
    const Matrix Ar = sys.A.topLeftCorner(n, n);
    const Matrix Br = sys.B.topRows(n);
    RiccatiSolution red = solve_riccati(Ar, Br, sys.Q, sys.R, opts);

    const Vector Py = red.P * sys.y;
    Matrix P(n + 1, n + 1);
    P.topLeftCorner(n, n) = red.P;
    P.topRightCorner(n, 1) = -Py;
    P.bottomLeftCorner(1, n) = -Py.transpose();
    P(n, n) = sys.y.dot(Py);

    Matrix K(n, n + 1);
    K.leftCols(n) = red.K;
    K.rightCols(1) = -red.K * sys.y;
    return finish_law(sys, std::move(P), std::move(K), red.iterations, std::move(red.increments), opts.method);
}

ClosedLoop closed_loop(const AugmentedSystem& sys, const FeedbackLaw& law) {
    const Eigen::Index n = sys.output_size();
    if (law.K.rows() != n || law.K.cols() != n + 1) throw DimensionError("gain does not match the system");
    ClosedLoop cl;
    cl.matrix = sys.A - sys.B * law.K;

    // Block upper-triangular: the last row is [0 ... 0 1], so the spectrum is
    // eig(top-left block) plus the structural eigenvalue carried by [y; 1].
    Eigen::EigenSolver<Matrix> top(cl.matrix.topLeftCorner(n, n), false);
    if (top.info() != Eigen::Success) throw DiagnosticError("closed-loop eigendecomposition failed");
    cl.deflated_eigenvalues = top.eigenvalues();
    cl.structural_eigenvalue = cl.matrix(n, n);
    cl.eigenvalues.resize(n + 1);
    cl.eigenvalues << cl.deflated_eigenvalues, cl.structural_eigenvalue;
    cl.deflated_radius = n > 0 ? cl.deflated_eigenvalues.cwiseAbs().maxCoeff() : 0.0;

    const Vector t = sys.target_state();
    cl.target_residual = (cl.matrix * t - t).norm();
    return cl;
}

namespace {

std::vector<Vector> iterate_local(const Matrix& M, const Vector& x0, Eigen::Index n, int steps) {
    if (steps < 0) throw DomainError("steps must be >= 0");
    std::vector<Vector> traj;
    traj.reserve(static_cast<std::size_t>(steps) + 1);
    Vector x = x0;
    traj.push_back(x.head(n));
    for (int k = 0; k < steps; ++k) {
        x = M * x;
        traj.push_back(x.head(n));
    }
    return traj;
}

} // namespace

std::vector<Vector> simulate_local(const AugmentedSystem& sys, const Vector& y0, int steps) {
    return iterate_local(sys.A, sys.augment(y0), sys.output_size(), steps);
}

std::vector<Vector> simulate_local(const AugmentedSystem& sys, const FeedbackLaw& law, const Vector& y0, int steps) {
    return iterate_local(sys.A - sys.B * law.K, sys.augment(y0), sys.output_size(), steps);
}

double closed_loop_cost(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, const Matrix& K,
                        const Vector& x0, int steps) {
    const Matrix M = A - B * K;
    Vector x = x0;
    double cost = 0.0;
    for (int k = 0; k < steps; ++k) {
        const Vector u = -K * x;
        cost += x.dot(Q * x) + u.dot(R * u);
        x = M * x;
    }
    return cost;
}

} // namespace cdt

#include "cdt/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cdt/errors.hpp"

namespace cdt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_symmetric(const Matrix& A) {
    return (A - A.transpose()).norm() <= 1e-12 * std::max(1.0, A.norm());
}

Eigen::VectorXcd eigenvalues_of(const Matrix& A) {
    if (is_symmetric(A)) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) throw DiagnosticError("symmetric eigendecomposition failed");
        return es.eigenvalues().cast<std::complex<double>>();
    }
    Eigen::EigenSolver<Matrix> es(A, false);
    if (es.info() != Eigen::Success) throw DiagnosticError("eigendecomposition failed");
    return es.eigenvalues();
}

double max_abs(const Eigen::VectorXcd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double max_symmetric_eigenvalue(const Matrix& S) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw DiagnosticError("symmetric eigendecomposition failed");
    return es.eigenvalues().maxCoeff();
}

double safe_bound_from(double lambda_max) { return lambda_max > 0.0 ? 2.0 / lambda_max : kInf; }

// Rank defect of M at the tolerance policy of kernel_diagnostics; fills the
// left null-space basis when requested.
template <typename MatrixType>
int rank_defect(const MatrixType& M, MatrixType* null_left) {
    const Eigen::Index n = M.rows();
    Eigen::BDCSVD<MatrixType> svd(M, null_left != nullptr ? Eigen::ComputeThinU : 0);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv.maxCoeff() : 0.0;
    const double tol = rank_tolerance(smax, n);
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > tol) ++rank;
    const int defect = static_cast<int>(n) - rank;
    if (null_left != nullptr && defect > 0) *null_left = svd.matrixU().rightCols(defect);
    return defect;
}

} // namespace

ReachabilityReport pbh_test(const Matrix& A, const Matrix& B, const std::optional<Vector>& initial_error) {
    const Eigen::Index n = A.rows();
    if (A.cols() != n) throw DimensionError("A must be square");
    if (B.rows() != n) throw DimensionError("B must have as many rows as A");
    if (initial_error && initial_error->size() != n) throw DimensionError("initial error has wrong length");

    const Eigen::VectorXcd eigs = eigenvalues_of(A);
    const bool grade = initial_error.has_value() && initial_error->norm() > 0.0;

    ReachabilityReport rep;
    std::vector<std::complex<double>> tested;
    for (Eigen::Index i = 0; i < eigs.size(); ++i) {
        const std::complex<double> z = eigs[i];
        const bool seen = std::any_of(tested.begin(), tested.end(), [&](const std::complex<double>& t) {
            return std::abs(t - z) <= 1e-10 * std::max(1.0, std::abs(z));
        });
        if (seen) continue;
        tested.push_back(z);

        UnreachableMode mode;
        mode.eigenvalue = z;
        if (z.imag() == 0.0) {
            Matrix M(n, n + B.cols());
            M << z.real() * Matrix::Identity(n, n) - A, B;
            Matrix W;
            mode.defect = rank_defect(M, grade ? &W : nullptr);
            if (mode.defect > 0 && grade) mode.excitation = (W.transpose() * *initial_error).norm() / initial_error->norm();
        } else {
            Eigen::MatrixXcd M(n, n + B.cols());
            M << z * Eigen::MatrixXcd::Identity(n, n) - A.cast<std::complex<double>>(), B.cast<std::complex<double>>();
            Eigen::MatrixXcd W;
            mode.defect = rank_defect(M, grade ? &W : nullptr);
            if (mode.defect > 0 && grade)
                mode.excitation = (W.adjoint() * initial_error->cast<std::complex<double>>()).norm() / initial_error->norm();
        }
        if (mode.defect > 0) rep.unreachable_modes.push_back(mode);
    }

    rep.reachable = rep.unreachable_modes.empty();
    rep.stabilizable = std::all_of(rep.unreachable_modes.begin(), rep.unreachable_modes.end(),
                                   [](const UnreachableMode& m) { return std::abs(m.eigenvalue) < 1.0 - kStabilityTol; });
    rep.stabilizable_along_labels =
        std::all_of(rep.unreachable_modes.begin(), rep.unreachable_modes.end(), [&](const UnreachableMode& m) {
            if (std::abs(m.eigenvalue) < 1.0 - kStabilityTol) return true;
            if (!initial_error) return false;
            if (!grade) return true; // a zero initial error excites nothing
            return m.excitation <= 1e-8;
        });
    return rep;
}

StabilityReport stability_check(const Kernel& kernel, double alpha, const LossModel& loss,
                                const std::optional<OutputPoint>& point) {
    if (!(alpha > 0.0)) throw DomainError("alpha must be > 0");
    const Matrix& T = kernel.theta_matrix;
    const Eigen::Index n = T.rows();

    StabilityReport rep;
    rep.loss_kind = loss.kind();
    rep.alpha = alpha;

    switch (loss.kind()) {
    case LossKind::mae:
        rep.stable = false;
        rep.strictly_stable = false;
        rep.spectral_radius_open_loop = kNaN;
        rep.safe_alpha_bound = kNaN;
        rep.note = "exponential boundedness not fulfilled: mae drives outputs to a radius around the labels";
        return rep;
    case LossKind::mse:
    case LossKind::sse: {
        const double c = loss.quadratic_scale(n);
        const Matrix A = Matrix::Identity(n, n) - alpha * c * T;
        rep.eigenvalues = eigenvalues_of(A);
        rep.safe_alpha_bound = safe_bound_from(c * max_symmetric_eigenvalue(T));
        break;
    }
    case LossKind::cross_entropy: {
        if (!point) throw DomainError("cross-entropy stability needs the evaluation point (y_hat, y)");
        const Matrix H = loss.hessian(point->y_hat, point->y);
        if (H.rows() != n) throw DimensionError("evaluation point does not match the kernel size");
        const Matrix A = Matrix::Identity(n, n) - alpha * T * H;
        rep.eigenvalues = eigenvalues_of(A);
        const Vector h_sqrt = H.diagonal().cwiseSqrt();
        const Matrix S = h_sqrt.asDiagonal() * T * h_sqrt.asDiagonal();
        rep.safe_alpha_bound = safe_bound_from(max_symmetric_eigenvalue(S));
        rep.note = "evaluated at the supplied point; the Hessian is state dependent";
        break;
    }
    }
    rep.spectral_radius_open_loop = max_abs(rep.eigenvalues);
    rep.stable = rep.spectral_radius_open_loop <= 1.0 + kStabilityTol;
    rep.strictly_stable = rep.spectral_radius_open_loop < 1.0 - kStabilityTol;
    return rep;
}

ReachabilityReport reachability_check(const Kernel& kernel, double alpha, const LossModel& loss,
                                      const std::optional<Vector>& initial_error) {
    if (!(alpha > 0.0)) throw DomainError("alpha must be > 0");
    const Eigen::Index n = kernel.dim();
    const double c = loss.quadratic_scale(n);
    const Matrix B = alpha * c * kernel.theta_matrix;
    const Matrix A = Matrix::Identity(n, n) - B;
    ReachabilityReport rep = pbh_test(A, B, initial_error);
    rep.alpha = alpha;
    return rep;
}

BoundConstants default_bound_constants(const Matrix& A) {
    BoundConstants bc;
    if (is_symmetric(A)) {
        bc.kappa = max_abs(eigenvalues_of(A));
        bc.gamma = 1.0;
        return bc;
    }
    Eigen::EigenSolver<Matrix> es(A, true);
    if (es.info() != Eigen::Success) throw DiagnosticError("eigendecomposition failed");
    bc.kappa = max_abs(es.eigenvalues());
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(es.eigenvectors());
    const auto& sv = svd.singularValues();
    bc.gamma = sv.minCoeff() > 0.0 ? sv.maxCoeff() / sv.minCoeff() : kInf;
    return bc;
}

AnalysisReport analyze(const Kernel& kernel, double alpha, const LossModel& loss,
                       const std::optional<OutputPoint>& point) {
    AnalysisReport rep;
    rep.stability = stability_check(kernel, alpha, loss, point);
    if (loss.is_quadratic()) {
        std::optional<Vector> e0;
        if (point) e0 = point->y_hat - point->y;
        rep.reachability = reachability_check(kernel, alpha, loss, e0);
        const Eigen::Index n = kernel.dim();
        const Matrix A = Matrix::Identity(n, n) - alpha * loss.quadratic_scale(n) * kernel.theta_matrix;
        const auto bc = default_bound_constants(A);
        rep.gamma = bc.gamma;
        rep.kappa = bc.kappa;
    } else {
        // Reachability of the input-affine local model is only defined for quadratic losses.
        rep.reachability.alpha = alpha;
        rep.gamma = kNaN;
        rep.kappa = rep.stability.spectral_radius_open_loop;
    }
    return rep;
}

std::vector<std::string> EquilibriumConditions::names() const {
    std::vector<std::string> out;
    if (loss_minimum) out.emplace_back("loss_minimum");
    if (frozen) out.emplace_back("frozen");
    if (null_kernel) out.emplace_back("null_kernel");
    if (gradient_in_nullspace) out.emplace_back("gradient_in_nullspace");
    return out;
}

EquilibriumConditions equilibrium_classify(const Kernel& kernel, double alpha, const LossModel& loss,
                                           const Vector& y_hat, const Vector& y) {
    if (y_hat.size() != kernel.dim() || y.size() != kernel.dim())
        throw DimensionError("outputs and labels must match the kernel size");
    const Vector g = loss.gradient(y_hat, y);
    EquilibriumConditions c;
    c.loss_minimum = g.norm() < kEquilibriumTol;
    c.frozen = std::abs(alpha) < kEquilibriumTol;
    c.null_kernel = kernel.theta_matrix.norm() < kEquilibriumTol;
    c.gradient_in_nullspace = !c.loss_minimum && !c.null_kernel && (kernel.theta_matrix * g).norm() < kEquilibriumTol;
    return c;
}

double estimate_output_curvature(const NetworkState& state, const Matrix& inputs, const Vector& displacement,
                                 const LagrangeOptions& opts) {
    if (displacement.size() != state.theta.size()) throw DimensionError("displacement must have length P");
    if (opts.num_directions < 1 || opts.segment_points < 1 || !(opts.fd_step > 0.0))
        throw DomainError("invalid curvature probe options");

    const double dnorm = displacement.norm();
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    const Eigen::Index P = state.theta.size();
    const double h = opts.fd_step;

    NetworkState probe = state;
    auto curvature_along = [&](const Vector& base, const Vector& u) {
        probe.theta = base + h * u;
        const Vector plus = jacobian_vector_product(probe, inputs, u);
        probe.theta = base - h * u;
        const Vector minus = jacobian_vector_product(probe, inputs, u);
        return (plus - minus).norm() / (2.0 * h);
    };

    double best = 0.0;
    const int points = dnorm > 0.0 ? opts.segment_points : 1;
    for (int s = 0; s < points; ++s) {
        const double t = points > 1 ? static_cast<double>(s) / (points - 1) : 0.0;
        const Vector base = state.theta + t * displacement;
        for (int d = 0; d < opts.num_directions; ++d) {
            Vector u(P);
            for (Eigen::Index i = 0; i < P; ++i) u[i] = unit(rng);
            u.normalize();
            best = std::max(best, curvature_along(base, u));
        }
        if (dnorm > 0.0) best = std::max(best, curvature_along(base, displacement / dnorm));
    }

    // Secant probes: ||(J(theta0 + t d) - J(theta0)) d|| / (t ||d||^2) bounds the
    // remainder even across relu kinks that pointwise differences step over.
    if (dnorm > 0.0) {
        const Vector j0d = jacobian_vector_product(state, inputs, displacement);
        constexpr int kSecants = 16;
        for (int s = 1; s <= kSecants; ++s) {
            const double t = static_cast<double>(s) / kSecants;
            probe.theta = state.theta + t * displacement;
            const Vector jtd = jacobian_vector_product(probe, inputs, displacement);
            best = std::max(best, (jtd - j0d).norm() / (t * dnorm * dnorm));
        }
    }
    return best;
}

double lagrange_bound(const NetworkState& state, const Matrix& inputs, const Vector& displacement,
                      const LagrangeOptions& opts) {
    const double dn2 = displacement.squaredNorm();
    if (dn2 == 0.0) {
        if (displacement.size() != state.theta.size()) throw DimensionError("displacement must have length P");
        return 0.0;
    }
    return 0.5 * estimate_output_curvature(state, inputs, displacement, opts) * dn2;
}

ValidityReport validity_monitor(const std::vector<Vector>& global_trace, const std::vector<Vector>& local_trace,
                                const Vector& equilibrium, double gamma, double kappa,
                                const std::vector<double>& bound_series) {
    if (global_trace.size() != local_trace.size()) throw DimensionError("global and local traces must be aligned");
    if (bound_series.size() < local_trace.size()) throw DimensionError("bound series shorter than the traces");
    ValidityReport rep;
    if (local_trace.empty()) return rep;

    const double e0 = (local_trace.front() - equilibrium).norm();
    rep.gap.reserve(local_trace.size());
    for (std::size_t k = 0; k < local_trace.size(); ++k) {
        const double gap = (global_trace[k] - local_trace[k]).norm();
        rep.gap.push_back(gap);
        const double envelope = gamma * std::pow(kappa, static_cast<double>(k)) * e0;
        const double slack = 1e-12 * std::max(1.0, envelope);
        const double dist = (local_trace[k] - equilibrium).norm();
        if (!rep.violation_step && !(dist <= envelope - bound_series[k] + slack))
            rep.violation_step = static_cast<int>(k);
        if (!rep.gap_exceeds_bound_step && !(gap <= bound_series[k] + 1e-12 * std::max(1.0, bound_series[k])))
            rep.gap_exceeds_bound_step = static_cast<int>(k);
    }
    return rep;
}

std::string_view to_string(LyapunovVerdict v) {
    switch (v) {
    case LyapunovVerdict::holds: return "holds";
    case LyapunovVerdict::boundary: return "boundary";
    case LyapunovVerdict::violated: return "violated";
    }
    return "?";
}

BoundednessVerdict loss_boundedness(const LossModel& loss, const Kernel& kernel, double alpha, const Vector& y_hat,
                                    const Vector& y) {
    const Matrix& T = kernel.theta_matrix;
    const Eigen::Index n = T.rows();
    if (y_hat.size() != n || y.size() != n) throw DimensionError("outputs and labels must match the kernel size");

    BoundednessVerdict v;
    v.kind = loss.kind();
    switch (loss.kind()) {
    case LossKind::mse:
    case LossKind::sse: {
        const Matrix A = Matrix::Identity(n, n) - alpha * loss.quadratic_scale(n) * T;
        v.spectral_radius = max_abs(eigenvalues_of(A));
        v.exponentially_bounded = v.spectral_radius < 1.0 - kStabilityTol;
        v.note = *v.exponentially_bounded ? "all eigenvalues strictly inside the unit circle"
                                          : "an eigenvalue lies on or outside the unit circle";
        break;
    }
    case LossKind::mae: {
        Eigen::SelfAdjointEigenSolver<Matrix> es(T, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) throw DiagnosticError("symmetric eigendecomposition failed");
        v.mae_radius = alpha * es.eigenvalues().cwiseAbs().maxCoeff() / static_cast<double>(n);
        v.exponentially_bounded = false;
        v.note = "outputs settle within the reported radius of the labels; no exponential bound";
        break;
    }
    case LossKind::cross_entropy: {
        if ((y_hat.array() <= 0.0).any()) throw DomainError("cross-entropy requires every prediction > 0");
        const Vector w = (y.array() / y_hat.array()).matrix();
        const Vector Tw = T * w;
        const double quad = alpha * alpha * Tw.squaredNorm();
        const double cross = 2.0 * alpha * y_hat.dot(Tw);
        v.lyapunov_lhs = quad - cross;
        v.lyapunov_delta = quad + cross;
        const double scale = quad + std::abs(cross);
        if (scale == 0.0 || std::abs(v.lyapunov_lhs) <= 1e-14 * scale)
            v.lyapunov = LyapunovVerdict::boundary;
        else
            v.lyapunov = v.lyapunov_lhs < 0.0 ? LyapunovVerdict::holds : LyapunovVerdict::violated;
        v.note = "pointwise Lyapunov check at the supplied outputs";
        break;
    }
    }
    return v;
}

} // namespace cdt

#include <gtest/gtest.h>

#include <random>

#include "cdt/analysis.hpp"
#include "cdt/control.hpp"
#include "cdt/errors.hpp"
#include "oracles.hpp"

using namespace cdt;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

// Random reachable augmented system built from a well-conditioned kernel.
AugmentedSystem random_system(int n, std::mt19937_64& rng, double p = 0.1) {
    const Matrix T = oracle::random_spd(n, 0.2, 2.0, rng);
    const Vector y = oracle::random_inputs(n, 1, rng).col(0);
    return build_augmented_system(kernel_from_matrix(T), 0.3, y, 1.0, p);
}

} // namespace

TEST(Augmented, BlockStructure) {
    const Matrix T = (Matrix(2, 2) << 2, 1, 1, 3).finished();
    const Vector y = (Vector(2) << 1, -2).finished();
    const AugmentedSystem s = build_augmented_system(kernel_from_matrix(T), 0.1, y, 2.0, 0.5);
    ASSERT_EQ(s.A.rows(), 3);
    ASSERT_EQ(s.B.cols(), 2);
    EXPECT_TRUE(s.A.topLeftCorner(2, 2).isApprox(Matrix::Identity(2, 2) - 0.1 * T));
    EXPECT_TRUE(s.A.topRightCorner(2, 1).isApprox(0.1 * T * y));
    EXPECT_EQ(s.A(2, 2), 1.0);
    EXPECT_EQ(s.A.bottomLeftCorner(1, 2).norm(), 0.0);
    EXPECT_TRUE(s.B.topRows(2).isApprox(0.1 * T));
    EXPECT_EQ(s.B.bottomRows(1).norm(), 0.0);
    EXPECT_TRUE(s.R.isApprox(0.5 * Matrix::Identity(2, 2)));
    // [y; 1] is a fixed point of A and Q_tilde annihilates it.
    EXPECT_LT((s.A * s.target_state() - s.target_state()).norm(), 1e-14);
    EXPECT_LT((s.Q_tilde * s.target_state()).norm(), 1e-14);
    EXPECT_NEAR(s.augment(y).dot(s.Q_tilde * s.augment(y + Vector::Ones(2))), 0.0, 1e-14);
}

TEST(Augmented, MseScalesKernel) {
    const Matrix T = Matrix::Identity(4, 4);
    const AugmentedSystem s = build_augmented_system(kernel_from_matrix(T), 0.8, Vector::Zero(4), 1.0, 0.1,
                                                     LossKind::mse);
    EXPECT_NEAR(s.B(0, 0), 0.2, 1e-15);
    EXPECT_NEAR(s.loss_scale, 0.25, 1e-15);
}

TEST(Augmented, RejectsBadInputs) {
    const Kernel k = kernel_from_matrix(Matrix::Identity(2, 2));
    EXPECT_THROW(build_augmented_system(k, 0.1, Vector::Zero(3), 1.0, 0.1), DimensionError);
    EXPECT_THROW(build_augmented_system(k, 0.1, Vector::Zero(2), 1.0, 0.0), DomainError);
    EXPECT_THROW(build_augmented_system(k, 0.1, Vector::Zero(2), 1.0, 0.1, LossKind::mae), DomainError);
}

TEST(Riccati, ScalarAgainstQuadraticRoot) {
    const double root = oracle::scalar_riccati_root(0.5, 0.5, 1.0, 0.1);
    for (DareMethod m : {DareMethod::fixed_point, DareMethod::doubling}) {
        DareOptions o;
        o.method = m;
        o.tol = 1e-14;
        const RiccatiSolution s = solve_riccati(scalar(0.5), scalar(0.5), scalar(1.0), scalar(0.1), o);
        EXPECT_NEAR(s.P(0, 0), root, 1e-12 * root) << to_string(m);
        EXPECT_NEAR(s.K(0, 0), 0.5 * root * 0.5 / (0.1 + 0.25 * root), 1e-12);
        EXPECT_LT(s.residual, 1e-12);
    }
}

TEST(Riccati, ScalarUnstablePlant) {
    // a > 1 still has a stabilizing solution.
    const double root = oracle::scalar_riccati_root(1.5, 1.0, 1.0, 1.0);
    DareOptions o;
    o.tol = 1e-14;
    const RiccatiSolution s = solve_riccati(scalar(1.5), scalar(1.0), scalar(1.0), scalar(1.0), o);
    EXPECT_NEAR(s.P(0, 0), root, 1e-10 * root);
    EXPECT_LT(std::abs(1.5 - s.K(0, 0)), 1.0);
}

TEST(Riccati, MethodsAgree) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 2 + trial % 5;
        const Matrix A = oracle::random_inputs(n, n, rng) * 0.5;
        const Matrix B = oracle::random_inputs(n, 2, rng);
        const Matrix Q = oracle::random_spd(n, 0.5, 2.0, rng);
        const Matrix R = oracle::random_spd(2, 0.5, 2.0, rng);
        DareOptions fp, db;
        fp.tol = db.tol = 1e-13;
        db.method = DareMethod::doubling;
        const RiccatiSolution a = solve_riccati(A, B, Q, R, fp);
        const RiccatiSolution b = solve_riccati(A, B, Q, R, db);
        EXPECT_LT((a.P - b.P).norm(), 1e-9 * (1 + a.P.norm()));
        EXPECT_LT(b.iterations, a.iterations + 1);
    }
}

TEST(Riccati, NonConvergenceThrows) {
    // Unreachable unstable mode: no stabilizing solution, iterates grow.
    DareOptions o;
    o.max_iters = 50;
    EXPECT_THROW(solve_riccati(scalar(2.0), scalar(0.0), scalar(1.0), scalar(1.0), o), SolverError);
}

TEST(Dare, AugmentedSolutionProperties) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const AugmentedSystem sys = random_system(2 + trial % 6, rng);
        DareOptions o;
        o.tol = 1e-12;
        const FeedbackLaw law = solve_dare(sys, o);
        EXPECT_LT(law.dare_residual, 1e-9);
        EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(law.P).eigenvalues().minCoeff(), -1e-9);
        EXPECT_LT((law.P * sys.target_state()).norm(), 1e-8 * (1 + law.P.norm()));
        EXPECT_LT((law.K * sys.target_state()).norm(), 1e-8 * (1 + law.K.norm()));
        const ClosedLoop cl = closed_loop(sys, law);
        EXPECT_LT(cl.deflated_radius, 1.0);
        EXPECT_LT(cl.target_residual, 1e-10);
        EXPECT_NEAR(std::abs(cl.structural_eigenvalue - 1.0), 0.0, 1e-8);

        const FeedbackLaw reduced = solve_dare_reduced(sys, o);
        EXPECT_LT((law.P - reduced.P).norm(), 1e-7 * (1 + law.P.norm()));
        EXPECT_LT((law.K - reduced.K).norm(), 1e-7 * (1 + law.K.norm()));
    }
}

TEST(Dare, OptimalCostMatchesSimulation) {
    std::mt19937_64 rng(18);
    const AugmentedSystem sys = random_system(3, rng);
    DareOptions o;
    o.tol = 1e-13;
    const FeedbackLaw law = solve_dare(sys, o);
    const Vector y0 = oracle::random_inputs(3, 1, rng).col(0);
    const Vector x0 = sys.augment(y0);
    const double sim = oracle::brute_force_cost(sys.A, sys.B, sys.Q_tilde, sys.R, law.K, x0, 5000);
    EXPECT_NEAR(sim, law.optimal_cost(y0), 1e-6 * law.optimal_cost(y0));
    EXPECT_NEAR(law.optimal_cost_half(y0), 0.5 * law.optimal_cost(y0), 1e-15);
    EXPECT_NEAR(closed_loop_cost(sys.A, sys.B, sys.Q_tilde, sys.R, law.K, x0, 5000), sim, 1e-9 * sim);

    // Perturbed gains cost at least as much.
    for (int i = 0; i < 10; ++i) {
        Matrix dK = oracle::random_inputs(static_cast<int>(law.K.rows()), static_cast<int>(law.K.cols()), rng);
        dK *= 1e-3 / dK.norm();
        const double c = oracle::brute_force_cost(sys.A, sys.B, sys.Q_tilde, sys.R, law.K + dK, x0, 5000);
        EXPECT_GE(c, sim * (1 - 1e-12));
    }
}

TEST(Dare, RankDeficientKernelNotStabilizable) {
    const Matrix T = (Matrix(2, 2) << 1, 2, 2, 4).finished();
    const AugmentedSystem sys = build_augmented_system(kernel_from_matrix(T), 0.1, Vector::Ones(2), 1.0, 0.1);
    // The unreachable mode of the error system sits at 1 so no gain moves it.
    const ReachabilityReport rr = reachability_check(kernel_from_matrix(T), 0.1);
    EXPECT_FALSE(rr.stabilizable);
    DareOptions o;
    o.max_iters = 2000;
    try {
        const FeedbackLaw law = solve_dare(sys, o);
        EXPECT_GE(closed_loop(sys, law).deflated_radius, 1.0 - 1e-6);
    } catch (const SolverError&) {
        SUCCEED();
    }
}

TEST(Dare, LargerPenaltyShrinksGain) {
    std::mt19937_64 rng(19);
    const Matrix T = oracle::random_spd(3, 0.2, 2.0, rng);
    const Vector y = oracle::random_inputs(3, 1, rng).col(0);
    const Kernel k = kernel_from_matrix(T);
    const FeedbackLaw cheap = solve_dare(build_augmented_system(k, 0.3, y, 1.0, 0.01));
    const FeedbackLaw costly = solve_dare(build_augmented_system(k, 0.3, y, 1.0, 10.0));
    EXPECT_GT(cheap.K.norm(), costly.K.norm());
}

TEST(Simulation, OpenLoopMatchesRecursion) {
    const Matrix T = (Matrix(2, 2) << 2, 1, 1, 3).finished();
    const Vector y = (Vector(2) << 1, -1).finished();
    const AugmentedSystem sys = build_augmented_system(kernel_from_matrix(T), 0.1, y, 1.0, 0.1);
    Vector e = -y;
    const auto tr = simulate_local(sys, Vector::Zero(2), 20);
    ASSERT_EQ(tr.size(), 21u);
    for (int k = 0; k <= 20; ++k) {
        EXPECT_LT((tr[static_cast<std::size_t>(k)] - y - e).norm(), 1e-12);
        e = (Matrix::Identity(2, 2) - 0.1 * T) * e;
    }
}

TEST(Simulation, ClosedLoopConvergesFaster) {
    std::mt19937_64 rng(20);
    const AugmentedSystem sys = random_system(4, rng, 0.01);
    const FeedbackLaw law = solve_dare(sys);
    const Vector y0 = Vector::Zero(4);
    const auto open = simulate_local(sys, y0, 30);
    const auto closed = simulate_local(sys, law, y0, 30);
    EXPECT_LT((closed.back() - sys.y).norm(), (open.back() - sys.y).norm());
}

TEST(DareMethodNames, RoundTrip) {
    for (DareMethod m : {DareMethod::fixed_point, DareMethod::doubling})
        EXPECT_EQ(parse_dare_method(to_string(m)), m);
    EXPECT_THROW(parse_dare_method("newton"), DomainError);
}

TEST(Augmented, ScalarExample) {
    const AugmentedSystem s = build_augmented_system(kernel_from_matrix(Matrix::Identity(1, 1)), 0.5,
                                                     Vector::Constant(1, 2.0), 1.0, 0.1);
    EXPECT_TRUE(s.A.isApprox((Matrix(2, 2) << 0.5, 1, 0, 1).finished()));
    EXPECT_TRUE(s.B.isApprox((Matrix(2, 1) << 0.5, 0).finished()));
    EXPECT_TRUE(s.Q_tilde.isApprox((Matrix(2, 2) << 1, -2, -2, 4).finished()));
}

TEST(Riccati, ZeroCostStableSystem) {
    const RiccatiSolution s = solve_riccati(scalar(0.5), scalar(1.0), scalar(0.0), scalar(1.0));
    EXPECT_EQ(s.P(0, 0), 0.0);
    EXPECT_EQ(s.K(0, 0), 0.0);
}

TEST(Riccati, IncrementsEventuallyNonIncreasing) {
    std::mt19937_64 rng(21);
    const AugmentedSystem sys = random_system(4, rng);
    DareOptions o;
    o.record_history = true;
    const FeedbackLaw law = solve_dare(sys, o);
    ASSERT_GT(law.increments.size(), 10u);
    const std::size_t tail = law.increments.size() / 2;
    for (std::size_t i = tail + 1; i < law.increments.size(); ++i)
        EXPECT_LE(law.increments[i], law.increments[i - 1] * (1 + 1e-9) + 1e-15);
}

TEST(Dare, HugePenaltyRecoversOpenLoop) {
    const Kernel k = kernel_from_matrix(Matrix::Identity(2, 2));
    const AugmentedSystem sys = build_augmented_system(k, 0.5, Vector::Ones(2), 1.0, 1e9);
    const FeedbackLaw law = solve_dare(sys);
    EXPECT_LT(law.K.norm(), 1e-8);
    EXPECT_LT((closed_loop(sys, law).matrix - sys.A).norm(), 1e-8);
}

TEST(Dare, IdentityKernelBeatsOpenLoop) {
    const Kernel k = kernel_from_matrix(Matrix::Identity(1, 1));
    const AugmentedSystem sys = build_augmented_system(k, 0.5, Vector::Constant(1, 2.0), 1.0, 0.1);
    const ClosedLoop cl = closed_loop(sys, solve_dare(sys));
    EXPECT_LT(cl.deflated_radius, 0.5);
    EXPECT_LT((cl.matrix * sys.target_state() - sys.target_state()).norm(), 1e-10);
}

TEST(Simulation, ZeroSteps) {
    const AugmentedSystem sys = build_augmented_system(kernel_from_matrix(Matrix::Identity(2, 2)), 0.5,
                                                       Vector::Ones(2), 1.0, 0.1);
    const Vector y0 = (Vector(2) << 3, 4).finished();
    const auto tr = simulate_local(sys, y0, 0);
    ASSERT_EQ(tr.size(), 1u);
    EXPECT_EQ(tr[0], y0);
}

TEST(Simulation, ClosedLoopLyapunovDecrease) {
    std::mt19937_64 rng(22);
    const AugmentedSystem sys = random_system(5, rng);
    const FeedbackLaw law = solve_dare(sys);
    const auto tr = simulate_local(sys, law, oracle::random_inputs(5, 1, rng).col(0), 50);
    double prev = std::numeric_limits<double>::infinity();
    for (const Vector& y : tr) {
        const Vector x = sys.augment(y);
        const double v = x.dot(law.P * x);
        EXPECT_LE(v, prev + 1e-12);
        prev = v;
    }
}

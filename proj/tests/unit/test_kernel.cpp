#include <gtest/gtest.h>

#include <random>

#include "cdt/errors.hpp"
#include "cdt/kernel.hpp"
#include "oracles.hpp"

using namespace cdt;

namespace {

NetworkSpec single_linear(int in, int out) {
    NetworkSpec s;
    s.input_dim = in;
    s.output_dim = out;
    s.activation = Activation::identity;
    return s;
}

} // namespace

TEST(BuildKernel, ScalarLinearModelIsGram) {
    // Every layer carries a bias, which adds the all-ones block to x x^T.
    const NetworkState st = init_network(single_linear(1, 1), 1);
    const Matrix x = (Matrix(2, 1) << 1.0, 2.0).finished();
    const Matrix T = build_kernel(st, x).theta_matrix - Matrix::Ones(2, 2);
    EXPECT_TRUE(T.isApprox((Matrix(2, 2) << 1, 2, 2, 4).finished(), 1e-15));
}

TEST(BuildKernel, SingleLinearLayerEqualsAugmentedGram) {
    std::mt19937_64 rng(3);
    const Matrix x = oracle::random_inputs(5, 3, rng);
    const NetworkState st = init_network(single_linear(3, 1), 2);
    const Matrix gram = x * x.transpose() + Matrix::Ones(5, 5);
    EXPECT_LT((build_kernel(st, x).theta_matrix - gram).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(BuildKernel, ExactlySymmetric) {
    NetworkSpec s;
    s.input_dim = 4;
    s.hidden_widths = {9, 7};
    s.output_dim = 3;
    std::mt19937_64 rng(5);
    const Kernel k = build_kernel(init_network(s, 5), oracle::random_inputs(6, 4, rng));
    EXPECT_TRUE((k.theta_matrix.array() == k.theta_matrix.transpose().array()).all());
    EXPECT_EQ(k.dim(), 18);
    EXPECT_EQ(k.num_samples(), 6);
}

TEST(BuildKernel, BlockwiseAssemblyMatches) {
    NetworkSpec s;
    s.input_dim = 3;
    s.hidden_widths = {10};
    s.output_dim = 2;
    std::mt19937_64 rng(6);
    const NetworkState st = init_network(s, 6);
    const Matrix x = oracle::random_inputs(3, 3, rng);
    const Matrix full = build_kernel(st, x).theta_matrix;
    EXPECT_LT((full - oracle::blockwise_kernel(st, x)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Diagnostics, RankOneMatrix) {
    const auto d = kernel_diagnostics(kernel_from_matrix((Matrix(2, 2) << 1, 2, 2, 4).finished()));
    EXPECT_NEAR(d.min_eig, 0.0, 1e-14);
    EXPECT_NEAR(d.max_eig, 5.0, 1e-14);
    EXPECT_EQ(d.rank, 1);
    EXPECT_TRUE(std::isinf(d.condition_estimate));
}

TEST(Diagnostics, Identity) {
    const auto d = kernel_diagnostics(kernel_from_matrix(Matrix::Identity(2, 2)));
    EXPECT_DOUBLE_EQ(d.min_eig, 1.0);
    EXPECT_DOUBLE_EQ(d.max_eig, 1.0);
    EXPECT_EQ(d.rank, 2);
    EXPECT_DOUBLE_EQ(d.condition_estimate, 1.0);
}

TEST(Diagnostics, DuplicateSampleIsRankDeficient) {
    NetworkSpec s;
    s.input_dim = 3;
    s.hidden_widths = {32};
    s.output_dim = 2;
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 5; ++trial) {
        const NetworkState st = init_network(s, rng());
        Matrix x = oracle::random_inputs(5, 3, rng);
        Matrix dup(6, 3);
        dup << x, x.row(trial % 5);
        const auto d = kernel_diagnostics(build_kernel(st, dup));
        EXPECT_LT(d.rank, 12);
    }
}

TEST(Diagnostics, PsdOnRandomInstances) {
    std::mt19937_64 rng(100);
    for (int trial = 0; trial < 100; ++trial) {
        const NetworkSpec s = oracle::random_spec(rng, 2, 16, 4, 2);
        const NetworkState st = init_network(s, rng());
        const auto d = kernel_diagnostics(build_kernel(st, oracle::random_inputs(1 + trial % 6, s.input_dim, rng)));
        EXPECT_GE(d.min_eig, -1e-8 * d.max_eig);
        EXPECT_LT(d.symmetry_error, 1e-10);
    }
}

TEST(BuildKernel, InputScalingOfWeightBlock) {
    std::mt19937_64 rng(9);
    const Matrix x = oracle::random_inputs(4, 2, rng);
    const NetworkState st = init_network(single_linear(2, 1), 9);
    const double c = 3.5;
    const Matrix base = build_kernel(st, x).theta_matrix - Matrix::Ones(4, 4);
    const Matrix scaled = build_kernel(st, Matrix(c * x)).theta_matrix - Matrix::Ones(4, 4);
    EXPECT_TRUE(scaled.isApprox(c * c * base, 1e-13));
}

TEST(KernelFromMatrix, Validation) {
    EXPECT_THROW(kernel_from_matrix(Matrix::Zero(2, 3)), DimensionError);
    EXPECT_THROW(kernel_from_matrix(Matrix::Identity(3, 3), 2), DimensionError);
    EXPECT_THROW(kernel_from_matrix((Matrix(2, 2) << 1, 2, 0, 1).finished()), DomainError);
}

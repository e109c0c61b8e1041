#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cdt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation { relu, identity };
enum class InitScheme { standard, ntk, improved_standard };

std::string_view to_string(Activation a);
std::string_view to_string(InitScheme s);
Activation parse_activation(std::string_view name);
InitScheme parse_init_scheme(std::string_view name);

/// Fully-connected architecture. Layer l maps n_{l-1} features to n_l features
/// with h = z W + b; `activation` is applied after every layer except the last.
struct NetworkSpec {
    int input_dim = 1;
    int output_dim = 1;
    std::vector<int> hidden_widths;
    Activation activation = Activation::relu;
    double sigma_w = 1.4142135623730951;
    double sigma_b = 0.1;
    InitScheme init_scheme = InitScheme::ntk;

    /// Layer sizes n_0 .. n_L.
    std::vector<int> layer_sizes() const;
    int num_layers() const { return static_cast<int>(hidden_widths.size()) + 1; }

    /// Throws DomainError when a dimension is non-positive or a scale is invalid.
    void validate() const;

    /// Compact label such as "8-256-1/relu".
    std::string label() const;
};

/// Location of one layer's weights and bias inside the flat parameter vector.
struct LayerSlice {
    int fan_in = 0;
    int fan_out = 0;
    Eigen::Index weight_offset = 0; // fan_in x fan_out, row-major
    Eigen::Index bias_offset = 0;   // fan_out entries
};

/// Parameter layout: vec(W^L), b^L, vec(W^{L-1}), b^{L-1}, ..., vec(W^1), b^1.
/// vec() is row-major over the (fan_in x fan_out) weight matrix, so entry
/// W(i, j) sits at weight_offset + i * fan_out + j.
class ParameterLayout {
public:
    explicit ParameterLayout(const NetworkSpec& spec);

    Eigen::Index size() const { return size_; }
    /// Slice for layer l in 1..L (input-to-output order).
    const LayerSlice& layer(int l) const { return layers_.at(static_cast<std::size_t>(l - 1)); }
    int num_layers() const { return static_cast<int>(layers_.size()); }

private:
    std::vector<LayerSlice> layers_;
    Eigen::Index size_ = 0;
};

struct NetworkState {
    NetworkSpec spec;
    Vector theta;
    std::uint64_t rng_seed = 0;

    Eigen::Index num_params() const { return theta.size(); }
};

/// Inputs are r x n_0. Targets are stacked data-major: all n_L outputs of
/// sample 0, then sample 1, ... so entry i * n_L + m is output m of sample i.
struct Batch {
    Matrix inputs;
    Vector targets;

    Eigen::Index size() const { return inputs.rows(); }
};

/// Checks shapes and finiteness of a batch against an architecture.
void validate_batch(const NetworkSpec& spec, const Batch& batch);

/// Draws parameters for `spec` from a 64-bit seed. With the finite-width
/// scaling factor s = 1 the three schemes share one distribution,
/// W ~ sigma_w / sqrt(fan_in) * N(0, 1), b ~ sigma_b * N(0, 1); they differ
/// only in where the scale is applied.
NetworkState init_network(const NetworkSpec& spec, std::uint64_t seed);

/// Builds a state from an explicit parameter vector (length checked).
NetworkState make_state(const NetworkSpec& spec, Vector theta);

/// Network outputs for every sample, stacked data-major (length r * n_L).
Vector forward(const NetworkState& state, const Matrix& inputs);
inline Vector forward(const NetworkState& state, const Batch& batch) {
    return forward(state, batch.inputs);
}

/// Output Jacobian with respect to theta: (r * n_L) x P, row i * n_L + m is the
/// gradient of output m of sample i. Computed by reverse accumulation seeded
/// once per output scalar. The relu derivative at 0 is taken as 0.
Matrix jacobian(const NetworkState& state, const Matrix& inputs);
inline Matrix jacobian(const NetworkState& state, const Batch& batch) {
    return jacobian(state, batch.inputs);
}

/// J^T v for a cotangent v over the stacked outputs, in one batched backward pass.
Vector vector_jacobian_product(const NetworkState& state, const Matrix& inputs, const Vector& cotangent);

/// J u for a parameter-space direction u, by forward-mode tangent propagation.
Vector jacobian_vector_product(const NetworkState& state, const Matrix& inputs, const Vector& direction);

} // namespace cdt

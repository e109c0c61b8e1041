#include "cdt/network.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "cdt/errors.hpp"

namespace cdt {

namespace {

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

RowMajorMap weights(const Vector& theta, const LayerSlice& s) {
    return RowMajorMap(theta.data() + s.weight_offset, s.fan_in, s.fan_out);
}

Eigen::Map<const Eigen::RowVectorXd> bias(const Vector& theta, const LayerSlice& s) {
    return Eigen::Map<const Eigen::RowVectorXd>(theta.data() + s.bias_offset, s.fan_out);
}

double relu_grad(double h) { return h > 0.0 ? 1.0 : 0.0; }

Matrix apply_activation(Activation a, const Matrix& h) {
    if (a == Activation::identity) return h;
    return h.cwiseMax(0.0);
}

Matrix activation_grad(Activation a, const Matrix& h) {
    if (a == Activation::identity) return Matrix::Ones(h.rows(), h.cols());
    return h.unaryExpr(&relu_grad);
}

void check_inputs(const NetworkState& state, const Matrix& inputs) {
    if (inputs.cols() != state.spec.input_dim) {
        std::ostringstream os;
        os << "input has " << inputs.cols() << " columns, network expects " << state.spec.input_dim;
        throw DimensionError(os.str());
    }
    if (inputs.rows() < 1) throw DimensionError("batch must contain at least one sample");
}

// Pre-activations h^1..h^L and post-activations z^0..z^{L-1} for a whole batch.
struct ForwardCache {
    std::vector<Matrix> pre;  // pre[l-1] = h^l, r x n_l
    std::vector<Matrix> post; // post[l]  = z^l, r x n_l (post[0] = inputs)
};

ForwardCache run_forward(const NetworkState& state, const ParameterLayout& layout, const Matrix& inputs) {
    ForwardCache cache;
    const int L = layout.num_layers();
    cache.post.reserve(static_cast<std::size_t>(L));
    cache.pre.reserve(static_cast<std::size_t>(L));
    cache.post.push_back(inputs);
    for (int l = 1; l <= L; ++l) {
        const auto& s = layout.layer(l);
        Matrix h = cache.post.back() * weights(state.theta, s);
        h.rowwise() += bias(state.theta, s);
        cache.pre.push_back(h);
        if (l < L) cache.post.push_back(apply_activation(state.spec.activation, cache.pre.back()));
    }
    return cache;
}

Vector stack_rows(const Matrix& m) {
    Vector out(m.size());
    RowMajorMutMap(out.data(), m.rows(), m.cols()) = m;
    return out;
}

} // namespace

std::string_view to_string(Activation a) {
    switch (a) {
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
    }
    return "?";
}

std::string_view to_string(InitScheme s) {
    switch (s) {
    case InitScheme::standard: return "standard";
    case InitScheme::ntk: return "ntk";
    case InitScheme::improved_standard: return "improved_standard";
    }
    return "?";
}

Activation parse_activation(std::string_view name) {
    if (name == "relu") return Activation::relu;
    if (name == "identity" || name == "linear") return Activation::identity;
    throw DomainError("unknown activation '" + std::string(name) + "'");
}

InitScheme parse_init_scheme(std::string_view name) {
    if (name == "standard") return InitScheme::standard;
    if (name == "ntk") return InitScheme::ntk;
    if (name == "improved_standard") return InitScheme::improved_standard;
    throw DomainError("unknown init scheme '" + std::string(name) + "'");
}

std::vector<int> NetworkSpec::layer_sizes() const {
    std::vector<int> sizes;
    sizes.reserve(hidden_widths.size() + 2);
    sizes.push_back(input_dim);
    sizes.insert(sizes.end(), hidden_widths.begin(), hidden_widths.end());
    sizes.push_back(output_dim);
    return sizes;
}

void NetworkSpec::validate() const {
    if (input_dim < 1) throw DomainError("input_dim must be >= 1");
    if (output_dim < 1) throw DomainError("output_dim must be >= 1");
    for (int w : hidden_widths)
        if (w < 1) throw DomainError("hidden widths must be >= 1");
    if (!(sigma_w >= 0.0) || !std::isfinite(sigma_w)) throw DomainError("sigma_w must be finite and >= 0");
    if (!(sigma_b >= 0.0) || !std::isfinite(sigma_b)) throw DomainError("sigma_b must be finite and >= 0");
}

std::string NetworkSpec::label() const {
    std::ostringstream os;
    os << input_dim;
    for (int w : hidden_widths) os << '-' << w;
    os << '-' << output_dim << '/' << to_string(activation);
    return os.str();
}

ParameterLayout::ParameterLayout(const NetworkSpec& spec) {
    const auto sizes = spec.layer_sizes();
    const int L = spec.num_layers();
    layers_.resize(static_cast<std::size_t>(L));
    // Last layer first.
    Eigen::Index offset = 0;
    for (int l = L; l >= 1; --l) {
        LayerSlice& s = layers_[static_cast<std::size_t>(l - 1)];
        s.fan_in = sizes[static_cast<std::size_t>(l - 1)];
        s.fan_out = sizes[static_cast<std::size_t>(l)];
        s.weight_offset = offset;
        offset += static_cast<Eigen::Index>(s.fan_in) * s.fan_out;
        s.bias_offset = offset;
        offset += s.fan_out;
    }
    size_ = offset;
}

void validate_batch(const NetworkSpec& spec, const Batch& batch) {
    if (batch.inputs.rows() < 1) throw DimensionError("batch must contain at least one sample");
    if (batch.inputs.cols() != spec.input_dim) throw DimensionError("batch input width does not match input_dim");
    if (batch.targets.size() != batch.inputs.rows() * spec.output_dim)
        throw DimensionError("targets must have length r * n_L");
    if (!batch.inputs.allFinite() || !batch.targets.allFinite())
        throw DomainError("batch contains non-finite entries");
}

NetworkState init_network(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    const ParameterLayout layout(spec);
    NetworkState state{spec, Vector::Zero(layout.size()), seed};

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);

    // Draw input-to-output so adding a layer on top does not reshuffle the lower ones.
    for (int l = 1; l <= layout.num_layers(); ++l) {
        const auto& s = layout.layer(l);
        const double fan_in = static_cast<double>(s.fan_in);
        const std::size_t nw = static_cast<std::size_t>(s.fan_in) * static_cast<std::size_t>(s.fan_out);
        for (std::size_t k = 0; k < nw; ++k) {
            const double z = unit(rng);
            double w = 0.0;
            switch (spec.init_scheme) {
            case InitScheme::ntk: w = spec.sigma_w / std::sqrt(fan_in) * z; break;
            case InitScheme::standard: w = z * std::sqrt(spec.sigma_w * spec.sigma_w / fan_in); break;
            case InitScheme::improved_standard: {
                constexpr double width_scale = 1.0; // s, finite networks only
                w = (1.0 / std::sqrt(width_scale)) * (z * spec.sigma_w / std::sqrt(fan_in));
                break;
            }
            }
            state.theta[s.weight_offset + static_cast<Eigen::Index>(k)] = w;
        }
        for (int j = 0; j < s.fan_out; ++j) state.theta[s.bias_offset + j] = spec.sigma_b * unit(rng);
    }
    return state;
}

NetworkState make_state(const NetworkSpec& spec, Vector theta) {
    spec.validate();
    const ParameterLayout layout(spec);
    if (theta.size() != layout.size()) {
        std::ostringstream os;
        os << "theta has length " << theta.size() << ", architecture needs " << layout.size();
        throw DimensionError(os.str());
    }
    if (!theta.allFinite()) throw DomainError("theta contains non-finite entries");
    return NetworkState{spec, std::move(theta), 0};
}

Vector forward(const NetworkState& state, const Matrix& inputs) {
    check_inputs(state, inputs);
    const ParameterLayout layout(state.spec);
    auto cache = run_forward(state, layout, inputs);
    return stack_rows(cache.pre.back());
}

Matrix jacobian(const NetworkState& state, const Matrix& inputs) {
    check_inputs(state, inputs);
    const ParameterLayout layout(state.spec);
    const auto cache = run_forward(state, layout, inputs);
    const int L = layout.num_layers();
    const Eigen::Index r = inputs.rows();
    const int nL = state.spec.output_dim;
    Matrix J = Matrix::Zero(r * nL, layout.size());

    std::vector<Matrix> act_grad;
    act_grad.reserve(static_cast<std::size_t>(L));
    for (int l = 1; l < L; ++l) act_grad.push_back(activation_grad(state.spec.activation, cache.pre[static_cast<std::size_t>(l - 1)]));

    for (Eigen::Index i = 0; i < r; ++i) {
        // delta rows: one backward seed per output scalar of sample i.
        Matrix delta = Matrix::Identity(nL, nL);
        for (int l = L; l >= 1; --l) {
            const auto& s = layout.layer(l);
            const Eigen::RowVectorXd z = cache.post[static_cast<std::size_t>(l - 1)].row(i);
            for (int m = 0; m < nL; ++m) {
                const Eigen::Index row = i * nL + m;
                // dW(a, b) = z(a) * delta(m, b), stored row-major.
                for (int a = 0; a < s.fan_in; ++a) {
                    const double za = z[a];
                    if (za == 0.0) continue;
                    const Eigen::Index base = s.weight_offset + static_cast<Eigen::Index>(a) * s.fan_out;
                    for (int b = 0; b < s.fan_out; ++b) J(row, base + b) = za * delta(m, b);
                }
                for (int b = 0; b < s.fan_out; ++b) J(row, s.bias_offset + b) = delta(m, b);
            }
            if (l > 1) {
                Matrix back = delta * weights(state.theta, s).transpose();
                back.array().rowwise() *= act_grad[static_cast<std::size_t>(l - 2)].row(i).array();
                delta = std::move(back);
            }
        }
    }
    return J;
}

Vector vector_jacobian_product(const NetworkState& state, const Matrix& inputs, const Vector& cotangent) {
    check_inputs(state, inputs);
    const ParameterLayout layout(state.spec);
    const Eigen::Index r = inputs.rows();
    const int nL = state.spec.output_dim;
    if (cotangent.size() != r * nL) throw DimensionError("cotangent must have length r * n_L");

    const auto cache = run_forward(state, layout, inputs);
    const int L = layout.num_layers();
    Vector grad = Vector::Zero(layout.size());
    Matrix delta = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        cotangent.data(), r, nL);
    for (int l = L; l >= 1; --l) {
        const auto& s = layout.layer(l);
        const Matrix& z = cache.post[static_cast<std::size_t>(l - 1)];
        RowMajorMutMap(grad.data() + s.weight_offset, s.fan_in, s.fan_out) = z.transpose() * delta;
        Eigen::Map<Eigen::RowVectorXd>(grad.data() + s.bias_offset, s.fan_out) = delta.colwise().sum();
        if (l > 1) {
            Matrix back = delta * weights(state.theta, s).transpose();
            back.array() *= activation_grad(state.spec.activation, cache.pre[static_cast<std::size_t>(l - 2)]).array();
            delta = std::move(back);
        }
    }
    return grad;
}

Vector jacobian_vector_product(const NetworkState& state, const Matrix& inputs, const Vector& direction) {
    check_inputs(state, inputs);
    const ParameterLayout layout(state.spec);
    if (direction.size() != layout.size()) throw DimensionError("direction must have length P");

    const int L = layout.num_layers();
    Matrix z = inputs;
    Matrix dz = Matrix::Zero(inputs.rows(), inputs.cols());
    for (int l = 1; l <= L; ++l) {
        const auto& s = layout.layer(l);
        Matrix h = z * weights(state.theta, s);
        h.rowwise() += bias(state.theta, s);
        Matrix dh = dz * weights(state.theta, s) + z * weights(direction, s);
        dh.rowwise() += bias(direction, s);
        if (l == L) return stack_rows(dh);
        const Matrix g = activation_grad(state.spec.activation, h);
        z = apply_activation(state.spec.activation, h);
        dz = dh.cwiseProduct(g);
    }
    return {};
}

} // namespace cdt

#pragma once

#include <string_view>

#include "cdt/network.hpp"

namespace cdt {

enum class LossKind { mse, sse, mae, cross_entropy };

std::string_view to_string(LossKind k);
LossKind parse_loss_kind(std::string_view name);

/// Loss over stacked outputs y_hat (length N = r * n_L) against targets y.
///
///   mse:           1/(2N) ||y_hat - y||^2
///   sse:           1/2 ||y_hat - y||^2
///   mae:           1/N ||y_hat - y||_1
///   cross_entropy: -y^T log(y_hat), y_hat > 0
class LossModel {
public:
    explicit LossModel(LossKind kind = LossKind::sse) : kind_(kind) {}

    LossKind kind() const { return kind_; }
    bool is_quadratic() const { return kind_ == LossKind::mse || kind_ == LossKind::sse; }

    double value(const Vector& y_hat, const Vector& y) const;
    /// dL/dy_hat. mae uses sign with sign(0) = 0.
    Vector gradient(const Vector& y_hat, const Vector& y) const;
    /// d^2L/dy_hat^2 (N x N). mae returns the zero matrix (almost everywhere).
    Matrix hessian(const Vector& y_hat, const Vector& y) const;

    /// For quadratic losses the Hessian is c * I; returns c for output size n.
    double quadratic_scale(Eigen::Index n) const;

private:
    LossKind kind_;
};

} // namespace cdt

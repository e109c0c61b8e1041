#include "cdt/loss.hpp"

#include <cmath>
#include <string>

#include "cdt/errors.hpp"

namespace cdt {

namespace {

void check_sizes(const Vector& y_hat, const Vector& y) {
    if (y_hat.size() != y.size()) throw DimensionError("prediction and target lengths differ");
    if (y.size() == 0) throw DimensionError("empty prediction vector");
}

void check_positive(const Vector& y_hat) {
    if ((y_hat.array() <= 0.0).any()) throw DomainError("cross-entropy requires every prediction > 0");
}

} // namespace

std::string_view to_string(LossKind k) {
    switch (k) {
    case LossKind::mse: return "mse";
    case LossKind::sse: return "sse";
    case LossKind::mae: return "mae";
    case LossKind::cross_entropy: return "cross_entropy";
    }
    return "?";
}

LossKind parse_loss_kind(std::string_view name) {
    if (name == "mse") return LossKind::mse;
    if (name == "sse") return LossKind::sse;
    if (name == "mae") return LossKind::mae;
    if (name == "cross_entropy" || name == "ce") return LossKind::cross_entropy;
    throw DomainError("unknown loss '" + std::string(name) + "'");
}

double LossModel::value(const Vector& y_hat, const Vector& y) const {
    check_sizes(y_hat, y);
    const double n = static_cast<double>(y.size());
    switch (kind_) {
    case LossKind::mse: return 0.5 * (y_hat - y).squaredNorm() / n;
    case LossKind::sse: return 0.5 * (y_hat - y).squaredNorm();
    case LossKind::mae: return (y_hat - y).lpNorm<1>() / n;
    case LossKind::cross_entropy:
        check_positive(y_hat);
        return -y.dot(y_hat.array().log().matrix());
    }
    return 0.0;
}

Vector LossModel::gradient(const Vector& y_hat, const Vector& y) const {
    check_sizes(y_hat, y);
    const double n = static_cast<double>(y.size());
    switch (kind_) {
    case LossKind::mse: return (y_hat - y) / n;
    case LossKind::sse: return y_hat - y;
    case LossKind::mae:
        return (y_hat - y).unaryExpr([](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); }) / n;
    case LossKind::cross_entropy:
        check_positive(y_hat);
        return -(y.array() / y_hat.array()).matrix();
    }
    return {};
}

Matrix LossModel::hessian(const Vector& y_hat, const Vector& y) const {
    check_sizes(y_hat, y);
    const Eigen::Index n = y.size();
    switch (kind_) {
    case LossKind::mse:
    case LossKind::sse: return quadratic_scale(n) * Matrix::Identity(n, n);
    case LossKind::mae: return Matrix::Zero(n, n);
    case LossKind::cross_entropy:
        check_positive(y_hat);
        return (y.array() / y_hat.array().square()).matrix().asDiagonal();
    }
    return {};
}

double LossModel::quadratic_scale(Eigen::Index n) const {
    switch (kind_) {
    case LossKind::mse: return 1.0 / static_cast<double>(n);
    case LossKind::sse: return 1.0;
    default: throw DomainError("loss '" + std::string(to_string(kind_)) + "' has no constant Hessian");
    }
}

} // namespace cdt

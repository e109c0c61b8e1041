#include "cdt/training.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "cdt/errors.hpp"

namespace cdt {

namespace {

Vector augmentation(const FeedbackLaw& law, const Vector& y_hat) {
    Vector x(y_hat.size() + 1);
    x << y_hat, 1.0;
    return -law.K * x;
}

void check_law(const FeedbackLaw& law, Eigen::Index n) {
    if (law.K.rows() != n || law.K.cols() != n + 1) throw DimensionError("feedback gain does not match r * n_L");
}

NetworkState descend(const NetworkState& state, const Matrix& inputs, const Vector& grad_out, double alpha_k) {
    if (!grad_out.allFinite()) throw DivergenceError("non-finite loss gradient");
    NetworkState next = state;
    next.theta -= alpha_k * vector_jacobian_product(state, inputs, grad_out);
    if (!next.theta.allFinite()) throw DivergenceError("non-finite parameters after update");
    return next;
}

Vector gather(const Vector& stacked, const std::vector<int>& samples, int n_out) {
    Vector out(static_cast<Eigen::Index>(samples.size()) * n_out);
    for (std::size_t s = 0; s < samples.size(); ++s)
        out.segment(static_cast<Eigen::Index>(s) * n_out, n_out) = stacked.segment(samples[s] * n_out, n_out);
    return out;
}

} // namespace

std::string_view to_string(Method m) { return m == Method::gd ? "gd" : "cdt"; }

Method parse_method(std::string_view name) {
    if (name == "gd") return Method::gd;
    if (name == "cdt") return Method::cdt;
    throw DomainError("unknown method '" + std::string(name) + "'");
}

void TrainerConfig::validate() const {
    if (!(alpha0 > 0.0)) throw DomainError("alpha0 must be > 0");
    if (!(decay_coeff >= 0.0)) throw DomainError("decay_coeff must be >= 0");
    if (steps < 0) throw DomainError("steps must be >= 0");
    if (!(p > 0.0)) throw DomainError("p must be > 0");
    if (!(divergence_threshold > 0.0)) throw DomainError("divergence_threshold must be > 0");
    if (snapshot_interval < 0) throw DomainError("snapshot_interval must be >= 0");
}

double decayed_alpha(double alpha0, double decay_coeff, int k) {
    return alpha0 / (1.0 + decay_coeff * static_cast<double>(k));
}

NetworkState gd_step(const NetworkState& state, const Matrix& inputs, const Vector& targets, const LossModel& loss,
                     double alpha_k) {
    if (!(alpha_k > 0.0)) throw DomainError("alpha_k must be > 0");
    const Vector y_hat = forward(state, inputs);
    return descend(state, inputs, loss.gradient(y_hat, targets), alpha_k);
}

CdtStepResult cdt_step(const NetworkState& state, const Batch& batch, const LossModel& loss, const FeedbackLaw& law,
                       double alpha_k) {
    if (!(alpha_k > 0.0)) throw DomainError("alpha_k must be > 0");
    const Vector y_hat = forward(state, batch.inputs);
    check_law(law, y_hat.size());
    CdtStepResult out;
    out.y_u = augmentation(law, y_hat);
    out.y_bar = batch.targets + out.y_u;
    out.state = descend(state, batch.inputs, loss.gradient(y_hat, out.y_bar), alpha_k);
    return out;
}

TrainingTrace train(const NetworkState& initial, const Batch& train_batch, const Batch& val_batch,
                    const TrainerConfig& cfg, const FeedbackLaw* law) {
    cfg.validate();
    validate_batch(initial.spec, train_batch);
    validate_batch(initial.spec, val_batch);
    const bool controlled = cfg.method == Method::cdt;
    if (controlled != (law != nullptr)) throw DomainError("a feedback law is required for cdt and only for cdt");
    const int n_out = initial.spec.output_dim;
    for (int s : cfg.snapshot_samples)
        if (s < 0 || s >= train_batch.size()) throw DimensionError("snapshot sample index out of range");

    const LossModel loss(cfg.loss);
    const Vector& y = train_batch.targets;
    if (controlled) check_law(*law, y.size());

    TrainingTrace trace;
    trace.method = cfg.method;
    trace.alpha0 = cfg.alpha0;
    trace.seed = initial.rng_seed;
    trace.snapshot_samples = cfg.snapshot_samples;
    trace.snapshot_targets = gather(y, cfg.snapshot_samples, n_out);
    trace.records.reserve(static_cast<std::size_t>(cfg.steps) + 1);

    const auto t_start = std::chrono::steady_clock::now();
    NetworkState state = initial;
    Vector y_hat = forward(state, train_batch.inputs);
    Vector y_u = controlled ? augmentation(*law, y_hat) : Vector::Zero(y.size());

    auto record = [&](int k) {
        StepRecord rec;
        rec.step = k;
        rec.train_loss = loss.value(y_hat, y);
        rec.val_loss = loss.value(forward(state, val_batch.inputs), val_batch.targets);
        rec.yu_norm = y_u.norm();
        rec.label_gap = ((y + y_u) - y).norm();
        rec.param_shift = (state.theta - initial.theta).norm();
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        trace.records.push_back(rec);
        if (cfg.record_outputs) trace.outputs.push_back(y_hat);
        if (cfg.snapshot_interval > 0 && !cfg.snapshot_samples.empty() && k % cfg.snapshot_interval == 0)
            trace.snapshots.push_back({k, gather(y_hat, cfg.snapshot_samples, n_out),
                                       gather(y + y_u, cfg.snapshot_samples, n_out)});
        return std::isfinite(rec.train_loss) && rec.train_loss <= cfg.divergence_threshold;
    };

    auto mark_diverged = [&](int k) {
        trace.diverged = true;
        trace.diverged_at = k;
    };

    if (!record(0)) mark_diverged(0);

    for (int k = 0; k < cfg.steps && !trace.diverged; ++k) {
        const double alpha_k = decayed_alpha(cfg.alpha0, cfg.decay_coeff, k);
        const Vector targets = controlled ? Vector(y + y_u) : y;
        try {
            state = descend(state, train_batch.inputs, loss.gradient(y_hat, targets), alpha_k);
        } catch (const DivergenceError&) {
            mark_diverged(k + 1);
            break;
        }
        y_hat = forward(state, train_batch.inputs);
        if (controlled) y_u = augmentation(*law, y_hat);
        if (!record(k + 1)) mark_diverged(k + 1);
    }
    trace.final_state = std::move(state);
    return trace;
}

} // namespace cdt

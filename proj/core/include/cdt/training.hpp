#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "cdt/control.hpp"
#include "cdt/loss.hpp"
#include "cdt/network.hpp"

namespace cdt {

enum class Method { gd, cdt };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);

struct TrainerConfig {
    Method method = Method::gd;
    double alpha0 = 0.01;
    double decay_coeff = 0.01;
    int steps = 100;
    LossKind loss = LossKind::sse;
    double p = 0.1;
    double divergence_threshold = 1e12;
    /// Record y_hat / y_bar for `snapshot_samples` every this many steps (0 = off).
    int snapshot_interval = 0;
    std::vector<int> snapshot_samples;
    /// Keep the full training-set output y_hat(k) at every step.
    bool record_outputs = false;

    void validate() const;
};

/// alpha_k = alpha0 / (1 + decay * k)
double decayed_alpha(double alpha0, double decay_coeff, int k);

struct StepRecord {
    int step = 0;
    double train_loss = 0.0; // against the true labels y
    double val_loss = 0.0;
    double yu_norm = 0.0;    // ||y_u(k)||, zero for gd
    double label_gap = 0.0;  // ||y_bar(k) - y||
    double param_shift = 0.0; // ||theta(k) - theta(0)||
    double wall_seconds = 0.0;
};

struct OutputSnapshot {
    int step = 0;
    Vector y_hat; // stacked over snapshot samples
    Vector y_bar;
};

struct TrainingTrace {
    Method method = Method::gd;
    double alpha0 = 0.0;
    std::uint64_t seed = 0;
    std::vector<StepRecord> records;
    std::vector<int> snapshot_samples;
    Vector snapshot_targets;
    std::vector<OutputSnapshot> snapshots;
    std::vector<Vector> outputs; // only with record_outputs
    bool diverged = false;
    std::optional<int> diverged_at;
    NetworkState final_state;

    double final_val_loss() const { return records.empty() ? 0.0 : records.back().val_loss; }
};

/// theta <- theta - alpha_k J^T dL/dy_hat(y_hat, targets). Throws DivergenceError
/// when the gradient or the updated parameters are non-finite.
NetworkState gd_step(const NetworkState& state, const Matrix& inputs, const Vector& targets, const LossModel& loss,
                     double alpha_k);
inline NetworkState gd_step(const NetworkState& state, const Batch& batch, const LossModel& loss, double alpha_k) {
    return gd_step(state, batch.inputs, batch.targets, loss, alpha_k);
}

struct CdtStepResult {
    NetworkState state;
    Vector y_u;   // -K [y_hat(k); 1]
    Vector y_bar; // y + y_u
};

/// Label-augmented step: y_bar = y - K [y_hat; 1] from the network's current
/// output, then a gradient step against y_bar.
CdtStepResult cdt_step(const NetworkState& state, const Batch& batch, const LossModel& loss, const FeedbackLaw& law,
                       double alpha_k);

/// Runs cfg.steps updates with alpha_k decay on the parameter update only; the
/// gain is used as given. `law` must be set exactly when cfg.method is cdt.
TrainingTrace train(const NetworkState& initial, const Batch& train_batch, const Batch& val_batch,
                    const TrainerConfig& cfg, const FeedbackLaw* law = nullptr);

} // namespace cdt

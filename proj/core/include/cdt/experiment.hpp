#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdt/control.hpp"
#include "cdt/dataset.hpp"
#include "cdt/network.hpp"
#include "cdt/training.hpp"

namespace cdt {

enum class OutputFormat { csv, json_lines };

std::string_view to_string(OutputFormat f);
OutputFormat parse_output_format(std::string_view name);
/// File extension without the dot ("csv" or "jsonl").
std::string_view extension(OutputFormat f);

struct ExperimentPlan {
    DatasetSpec dataset;
    /// Activation, scales and init scheme shared by every architecture;
    /// input/output sizes come from the data.
    NetworkSpec network;
    std::vector<std::vector<int>> architectures{{64}};
    std::vector<double> alphas{0.01};
    std::vector<Method> methods{Method::gd, Method::cdt};
    int n_seeds = 10;
    std::uint64_t master_seed = 0;
    /// method and alpha0 are overwritten per run; steps < 0 means "not set".
    TrainerConfig trainer = [] {
        TrainerConfig t;
        t.steps = -1;
        t.loss = LossKind::mse;
        return t;
    }();
    double q_scale = 1.0;
    DareOptions dare = [] {
        DareOptions d;
        d.method = DareMethod::doubling;
        return d;
    }();
    bool validity_monitor = false;
    int threads = 1;
    std::string out_dir = "cdt_out";
    OutputFormat format = OutputFormat::csv;

    /// Throws ConfigError naming the offending field.
    void validate() const;
    NetworkSpec architecture(std::size_t index, int input_dim, int output_dim) const;
};

struct SeedPair {
    std::uint64_t data = 0; // subsample / split shuffle
    std::uint64_t init = 0; // network initialization
};

/// n seed pairs drawn from an mt19937_64 stream seeded with `master`.
std::vector<SeedPair> derive_seeds(std::uint64_t master, int n);

struct CellAnalysis {
    bool stable = false;
    bool strictly_stable = false;
    bool reachable = false;
    bool stabilizable = false;
    double spectral_radius = 0.0;
    double safe_alpha_bound = 0.0;
    double kernel_min_eig = 0.0;
    double kernel_max_eig = 0.0;
};

struct RunResult {
    int arch_index = 0;
    std::string arch_label;
    int seed_index = 0;
    SeedPair seeds;
    double alpha = 0.0;
    Method method = Method::gd;
    CellAnalysis analysis;

    bool converged = false;
    double final_train_loss = std::numeric_limits<double>::quiet_NaN();
    double final_val_loss = std::numeric_limits<double>::quiet_NaN();
    TrainingTrace trace;

    // cdt only
    double dare_residual = std::numeric_limits<double>::quiet_NaN();
    double deflated_radius = std::numeric_limits<double>::quiet_NaN();
    int dare_iterations = 0;

    std::optional<int> validity_violation;
    std::optional<int> validity_gap_step;
    std::string error; // non-empty when the run could not complete
};

struct SummaryRow {
    int arch_index = 0;
    std::string arch_label;
    double alpha = 0.0;
    Method method = Method::gd;
    int n_runs = 0;
    int n_reachable = 0;
    int n_stable = 0;
    int n_converged = 0;
    /// Over converged runs; inf when none converged, NaN stddev for one run.
    double mean_val_loss = 0.0;
    double stddev_val_loss = 0.0;
};

/// "All initializations", "Some initializations (k/n)" or "No initialization".
std::string convergence_label(int converged, int total);
/// "Yes", "No" or "k/n".
std::string verdict_label(int count, int total);

struct ExperimentResults {
    ExperimentPlan plan;
    std::vector<RunResult> runs; // ordered by (arch, seed, alpha, method) in plan order
    std::vector<SummaryRow> summary;
};

using LogFn = std::function<void(const std::string&)>;

/// Full sweep. Each (architecture, seed) cell builds its kernel once and solves
/// one Riccati equation per alpha; cells may run on `plan.threads` workers and
/// results are folded in key order, so the output does not depend on threading.
ExperimentResults run_plan(const ExperimentPlan& plan, const LogFn& log = {});

/// Groups runs by (arch, alpha, method) in first-seen order.
std::vector<SummaryRow> summarize(const std::vector<RunResult>& runs);

} // namespace cdt

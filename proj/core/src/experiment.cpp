#include "cdt/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>
#include <tuple>

#include "cdt/analysis.hpp"
#include "cdt/errors.hpp"
#include "cdt/kernel.hpp"

namespace cdt {

std::string_view to_string(OutputFormat f) { return f == OutputFormat::csv ? "csv" : "json-lines"; }

OutputFormat parse_output_format(std::string_view name) {
    if (name == "csv") return OutputFormat::csv;
    if (name == "json-lines" || name == "jsonl") return OutputFormat::json_lines;
    throw ConfigError("unknown output format '" + std::string(name) + "' (expected csv or json-lines)");
}

std::string_view extension(OutputFormat f) { return f == OutputFormat::csv ? "csv" : "jsonl"; }

void ExperimentPlan::validate() const {
    try {
        dataset.validate();
    } catch (const DataError& e) {
        throw ConfigError(std::string("dataset: ") + e.what());
    }
    if (architectures.empty()) throw ConfigError("plan.architectures must not be empty");
    for (const auto& a : architectures)
        for (int w : a)
            if (w < 1) throw ConfigError("plan.architectures: widths must be positive");
    if (alphas.empty()) throw ConfigError("plan.alphas must not be empty");
    for (double a : alphas)
        if (!(a > 0.0)) throw ConfigError("plan.alphas: every alpha must be > 0");
    if (methods.empty()) throw ConfigError("plan.methods must not be empty");
    if (n_seeds < 1) throw ConfigError("plan.n_seeds must be >= 1");
    if (trainer.steps < 0) throw ConfigError("trainer.steps is required");
    if (!LossModel(trainer.loss).is_quadratic()) throw ConfigError("trainer.loss must be mse or sse");
    if (!(q_scale >= 0.0)) throw ConfigError("trainer.q must be >= 0");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (dare.max_iters < 1 || !(dare.tol > 0.0)) throw ConfigError("dare.max_iters and dare.tol must be positive");
    try {
        TrainerConfig t = trainer;
        t.alpha0 = alphas.front();
        t.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("trainer: ") + e.what());
    }
}

NetworkSpec ExperimentPlan::architecture(std::size_t index, int input_dim, int output_dim) const {
    NetworkSpec s = network;
    s.input_dim = input_dim;
    s.output_dim = output_dim;
    s.hidden_widths = architectures.at(index);
    return s;
}

std::vector<SeedPair> derive_seeds(std::uint64_t master, int n) {
    std::mt19937_64 rng(master);
    std::vector<SeedPair> out(static_cast<std::size_t>(n));
    for (auto& s : out) {
        s.data = rng();
        s.init = rng();
    }
    return out;
}

std::string convergence_label(int converged, int total) {
    if (converged == total) return "All initializations";
    if (converged == 0) return "No initialization";
    return "Some initializations (" + std::to_string(converged) + "/" + std::to_string(total) + ")";
}

std::string verdict_label(int count, int total) {
    if (count == total) return "Yes";
    if (count == 0) return "No";
    return std::to_string(count) + "/" + std::to_string(total);
}

namespace {

struct Cell {
    int arch = 0;
    int seed = 0;
};

void run_validity_monitor(RunResult& run, const NetworkState& initial, const Batch& train_batch,
                          const AugmentedSystem& sys, const FeedbackLaw* law) {
    const auto& trace = run.trace;
    if (trace.outputs.empty()) return;
    const int steps = static_cast<int>(trace.outputs.size()) - 1;
    const Vector& y0 = trace.outputs.front();
    const auto local = law ? simulate_local(sys, *law, y0, steps) : simulate_local(sys, y0, steps);
    const Eigen::Index n = sys.output_size();
    const Matrix dyn = law ? Matrix((sys.A - sys.B * law->K).topLeftCorner(n, n)) : Matrix(sys.A.topLeftCorner(n, n));
    const BoundConstants bc = default_bound_constants(dyn);
    const Vector shift = trace.final_state.theta - initial.theta;
    const double curvature = estimate_output_curvature(initial, train_batch.inputs, shift);
    std::vector<double> bound;
    bound.reserve(trace.records.size());
    for (const auto& rec : trace.records) bound.push_back(0.5 * curvature * rec.param_shift * rec.param_shift);
    const ValidityReport vr = validity_monitor(trace.outputs, local, sys.y, bc.gamma, bc.kappa, bound);
    run.validity_violation = vr.violation_step;
    run.validity_gap_step = vr.gap_exceeds_bound_step;
}

std::vector<RunResult> run_cell(const ExperimentPlan& plan, const RawData& raw, const SeedPair& seeds, Cell cell,
                                const LogFn& log) {
    std::vector<RunResult> out;
    const auto arch_index = static_cast<std::size_t>(cell.arch);

    auto base = [&](double alpha, Method m) {
        RunResult r;
        r.arch_index = cell.arch;
        r.seed_index = cell.seed;
        r.seeds = seeds;
        r.alpha = alpha;
        r.method = m;
        return r;
    };

    Dataset data;
    NetworkState state;
    Kernel kernel;
    try {
        data = prepare_dataset(raw, plan.dataset, seeds.data);
        const NetworkSpec spec =
            plan.architecture(arch_index, static_cast<int>(data.train.inputs.cols()), data.output_dim);
        state = init_network(spec, seeds.init);
        kernel = build_kernel(state, data.train);
    } catch (const std::exception& e) {
        for (double alpha : plan.alphas)
            for (Method m : plan.methods) {
                RunResult r = base(alpha, m);
                r.error = e.what();
                out.push_back(std::move(r));
            }
        return out;
    }
    const std::string label = state.spec.label();
    const KernelDiagnostics kd = kernel_diagnostics(kernel);
    const LossModel loss(plan.trainer.loss);
    const Vector& y = data.train.targets;
    const Vector y0 = forward(state, data.train);

    for (double alpha : plan.alphas) {
        CellAnalysis ca;
        const StabilityReport st = stability_check(kernel, alpha, loss);
        const ReachabilityReport rr = reachability_check(kernel, alpha, loss, Vector(y0 - y));
        ca.stable = st.stable;
        ca.strictly_stable = st.strictly_stable;
        ca.reachable = rr.reachable;
        ca.stabilizable = rr.stabilizable;
        ca.spectral_radius = st.spectral_radius_open_loop;
        ca.safe_alpha_bound = st.safe_alpha_bound;
        ca.kernel_min_eig = kd.min_eig;
        ca.kernel_max_eig = kd.max_eig;

        const AugmentedSystem sys = build_augmented_system(kernel, alpha, y, plan.q_scale, plan.trainer.p, plan.trainer.loss);
        std::optional<FeedbackLaw> law;
        std::string law_error;
        if (std::find(plan.methods.begin(), plan.methods.end(), Method::cdt) != plan.methods.end()) {
            try {
                law = solve_dare(sys, plan.dare);
            } catch (const std::exception& e) {
                law_error = e.what();
            }
        }

        for (Method m : plan.methods) {
            RunResult r = base(alpha, m);
            r.arch_label = label;
            r.analysis = ca;
            if (m == Method::cdt) {
                if (!law) {
                    r.error = "riccati: " + law_error;
                    out.push_back(std::move(r));
                    continue;
                }
                r.dare_residual = law->dare_residual;
                r.deflated_radius = law->closed_loop_radius_deflated;
                r.dare_iterations = law->iterations;
            }
            TrainerConfig cfg = plan.trainer;
            cfg.method = m;
            cfg.alpha0 = alpha;
            cfg.record_outputs = plan.validity_monitor;
            try {
                r.trace = train(state, data.train, data.validation, cfg, m == Method::cdt ? &*law : nullptr);
                r.converged = !r.trace.diverged;
                r.final_train_loss = r.trace.records.back().train_loss;
                r.final_val_loss = r.trace.records.back().val_loss;
                if (plan.validity_monitor)
                    run_validity_monitor(r, state, data.train, sys, m == Method::cdt ? &*law : nullptr);
                r.trace.outputs.clear();
            } catch (const std::exception& e) {
                r.error = e.what();
            }
            if (log) {
                std::ostringstream msg;
                msg << label << " seed#" << cell.seed << " alpha=" << alpha << ' ' << to_string(m)
                    << (r.converged ? " converged" : " diverged") << " val_loss=" << r.final_val_loss;
                if (!r.error.empty()) msg << " error: " << r.error;
                log(msg.str());
            }
            out.push_back(std::move(r));
        }
    }
    return out;
}

} // namespace

ExperimentResults run_plan(const ExperimentPlan& plan, const LogFn& log) {
    plan.validate();
    const RawData raw = load_raw(plan.dataset);
    const auto seeds = derive_seeds(plan.master_seed, plan.n_seeds);

    std::vector<Cell> cells;
    for (int a = 0; a < static_cast<int>(plan.architectures.size()); ++a)
        for (int s = 0; s < plan.n_seeds; ++s) cells.push_back({a, s});

    std::vector<std::vector<RunResult>> slots(cells.size());
    std::mutex log_mutex;
    LogFn safe_log;
    if (log)
        safe_log = [&](const std::string& m) {
            std::lock_guard<std::mutex> lock(log_mutex);
            log(m);
        };

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++)
            slots[i] = run_cell(plan, raw, seeds[static_cast<std::size_t>(cells[i].seed)], cells[i], safe_log);
    };
    const int n_threads = std::min<int>(plan.threads, static_cast<int>(cells.size()));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    ExperimentResults res;
    res.plan = plan;
    for (auto& slot : slots)
        for (auto& r : slot) res.runs.push_back(std::move(r));
    res.summary = summarize(res.runs);
    return res;
}

std::vector<SummaryRow> summarize(const std::vector<RunResult>& runs) {
    std::vector<SummaryRow> rows;
    std::vector<std::vector<double>> losses;
    // Order of first appearance per (arch, alpha, method), with arch outermost.
    std::map<std::tuple<int, int, int>, std::size_t> index;
    std::map<int, std::vector<double>> alpha_order;
    std::map<int, std::vector<Method>> method_order;
    for (const auto& r : runs) {
        auto& ao = alpha_order[r.arch_index];
        if (std::find(ao.begin(), ao.end(), r.alpha) == ao.end()) ao.push_back(r.alpha);
        auto& mo = method_order[r.arch_index];
        if (std::find(mo.begin(), mo.end(), r.method) == mo.end()) mo.push_back(r.method);
    }
    for (const auto& [arch, alphas] : alpha_order)
        for (std::size_t ai = 0; ai < alphas.size(); ++ai)
            for (std::size_t mi = 0; mi < method_order[arch].size(); ++mi) {
                SummaryRow row;
                row.arch_index = arch;
                row.alpha = alphas[ai];
                row.method = method_order[arch][mi];
                index[{arch, static_cast<int>(ai), static_cast<int>(mi)}] = rows.size();
                rows.push_back(row);
                losses.emplace_back();
            }
    for (const auto& r : runs) {
        const auto& ao = alpha_order[r.arch_index];
        const auto& mo = method_order[r.arch_index];
        const auto ai = std::find(ao.begin(), ao.end(), r.alpha) - ao.begin();
        const auto mi = std::find(mo.begin(), mo.end(), r.method) - mo.begin();
        const std::size_t k = index.at({r.arch_index, static_cast<int>(ai), static_cast<int>(mi)});
        SummaryRow& row = rows[k];
        if (row.arch_label.empty()) row.arch_label = r.arch_label;
        ++row.n_runs;
        row.n_reachable += r.analysis.reachable ? 1 : 0;
        row.n_stable += r.analysis.stable ? 1 : 0;
        if (r.converged) {
            ++row.n_converged;
            losses[k].push_back(r.final_val_loss);
        }
    }
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& v = losses[k];
        if (v.empty()) {
            rows[k].mean_val_loss = rows[k].stddev_val_loss = std::numeric_limits<double>::infinity();
            continue;
        }
        double sum = 0.0;
        for (double x : v) sum += x;
        const double mean = sum / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        rows[k].mean_val_loss = mean;
        rows[k].stddev_val_loss =
            v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : std::numeric_limits<double>::quiet_NaN();
    }
    return rows;
}

} // namespace cdt

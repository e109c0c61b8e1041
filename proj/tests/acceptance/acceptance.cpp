// Acceptance checks: one PASS/FAIL line per criterion, exit code 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cdt/analysis.hpp"
#include "cdt/config.hpp"
#include "cdt/control.hpp"
#include "cdt/experiment.hpp"
#include "cdt/kernel.hpp"
#include "cdt/report.hpp"
#include "cdt/training.hpp"
#include "oracles.hpp"

using namespace cdt;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

struct Instance {
    NetworkState state;
    Matrix inputs;
};

// Random relu networks (<= 3 hidden layers, widths <= 64) with batches of <= 8
// samples drawn away from relu kinks so central differences are meaningful.
std::vector<Instance> random_instances(int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> rows(1, 8);
    std::vector<Instance> out;
    while (static_cast<int>(out.size()) < count) {
        const NetworkState st = init_network(oracle::random_spec(rng, 3, 64, 6, 3), rng());
        const int r = rows(rng);
        for (int attempt = 0; attempt < 50; ++attempt) {
            Matrix x = oracle::random_inputs(r, st.spec.input_dim, rng);
            if (oracle::away_from_kinks(st, x, 1e-4)) {
                out.push_back({st, std::move(x)});
                break;
            }
        }
    }
    return out;
}

Outcome jacobian_correctness() {
    double worst = 0.0;
    for (const auto& inst : random_instances(20, 101)) {
        const Matrix J = jacobian(inst.state, inst.inputs);
        const Matrix F = oracle::fd_jacobian(inst.state, inst.inputs, 1e-5);
        // Entry error relative to max(|J_ij|, 1).
        const Matrix denom = J.cwiseAbs().cwiseMax(1.0);
        worst = std::max(worst, ((J - F).cwiseAbs().array() / denom.array()).maxCoeff());
    }
    return {worst < 1e-5, fmt("20 networks, max relative entry error %.2e (limit 1e-5)", worst)};
}

Outcome kernel_properties() {
    double worst_sym = 0.0, worst_neg = 0.0;
    int deficient = 0;
    std::mt19937_64 rng(202);
    for (const auto& inst : random_instances(20, 101)) {
        const Kernel k = build_kernel(inst.state, inst.inputs);
        const Matrix& T = k.theta_matrix;
        worst_sym = std::max(worst_sym, (T - T.transpose()).norm() / T.norm());
        const KernelDiagnostics d = kernel_diagnostics(k);
        worst_neg = std::max(worst_neg, -d.min_eig / d.max_eig);

        // Duplicate one sample (picking a second one when the batch has a single row).
        Matrix dup(inst.inputs.rows() + 1, inst.inputs.cols());
        std::uniform_int_distribution<Eigen::Index> pick(0, inst.inputs.rows() - 1);
        dup << inst.inputs, inst.inputs.row(pick(rng));
        const KernelDiagnostics dd = kernel_diagnostics(build_kernel(inst.state, dup));
        deficient += dd.rank < static_cast<int>(dd.eigenvalues.size());
    }
    const bool pass = worst_sym < 1e-10 && worst_neg <= 1e-8 && deficient == 20;
    return {pass, fmt("max asymmetry %.1e, max -min_eig/max_eig %.1e, rank-deficient duplicates %d/20", worst_sym,
                      worst_neg, deficient)};
}

Outcome pbh_equivalence() {
    std::mt19937_64 rng(303);
    std::uniform_int_distribution<int> dim(1, 6), inputs(1, 3);
    int agree = 0, reachable = 0;
    for (int i = 0; i < 50; ++i) {
        const int n = dim(rng);
        const auto sys = oracle::random_integer_system(n, inputs(rng), rng);
        const bool kalman = oracle::kalman_rank_exact(sys.A, sys.B) == n;
        agree += pbh_test(sys.A, sys.B).reachable == kalman;
        reachable += kalman;
    }
    return {agree == 50, fmt("%d/50 verdicts agree (%d reachable, %d unreachable)", agree, reachable, 50 - reachable)};
}

// Random reachable augmented systems from relu-network kernels, r * n_L <= 32.
std::vector<AugmentedSystem> random_augmented(int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> rows(2, 16);
    std::uniform_real_distribution<double> frac(0.1, 1.5);
    std::vector<AugmentedSystem> out;
    while (static_cast<int>(out.size()) < count) {
        NetworkSpec spec = oracle::random_spec(rng, 2, 64, 6, 2);
        const NetworkState st = init_network(spec, rng());
        const int r = std::min(rows(rng), 32 / spec.output_dim);
        const Matrix x = oracle::random_inputs(r, spec.input_dim, rng);
        const Kernel k = build_kernel(st, x);
        const double alpha = frac(rng) * stability_check(k, 1.0, LossModel(LossKind::sse)).safe_alpha_bound;
        if (!reachability_check(k, alpha).reachable) continue;
        const Vector y = oracle::random_inputs(r * spec.output_dim, 1, rng).col(0);
        out.push_back(build_augmented_system(k, alpha, y, 1.0, 0.1));
    }
    return out;
}

Outcome dare_correctness() {
    DareOptions fp;
    fp.tol = 1e-14;
    const RiccatiSolution s = solve_riccati(Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 0.5),
                                            Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 0.1), fp);
    const double root = oracle::scalar_riccati_root(0.5, 0.5, 1.0, 0.1);
    const double scalar_err = std::abs(s.P(0, 0) - root) / root;

    double worst_res = 0.0, worst_psd = 0.0, worst_py = 0.0, worst_ky = 0.0, worst_radius = 0.0;
    int max_dim = 0;
    for (const auto& sys : random_augmented(20, 404)) {
        const FeedbackLaw law = solve_dare(sys); // fixed-point iteration, default options
        const Vector t = sys.target_state();
        const Vector eig = Eigen::SelfAdjointEigenSolver<Matrix>(law.P).eigenvalues();
        worst_res = std::max(worst_res, law.dare_residual);
        worst_psd = std::max(worst_psd, -eig.minCoeff() / std::max(1.0, eig.maxCoeff()));
        worst_py = std::max(worst_py, (law.P * t).norm() / (1 + law.P.norm()));
        worst_ky = std::max(worst_ky, (law.K * t).norm() / (1 + law.K.norm()));
        worst_radius = std::max(worst_radius, closed_loop(sys, law).deflated_radius);
        max_dim = std::max(max_dim, static_cast<int>(sys.output_size()));
    }
    const bool pass = scalar_err < 1e-8 && worst_res < 1e-8 && worst_psd <= 1e-8 && worst_py < 1e-6 &&
                      worst_ky < 1e-6 && worst_radius < 1.0;
    return {pass, fmt("scalar rel err %.1e; 20 systems (r*n_L <= %d): residual %.1e, PSD defect %.1e, |P[y;1]| %.1e, "
                      "|K[y;1]| %.1e, deflated radius %.4f",
                      scalar_err, max_dim, worst_res, worst_psd, worst_py, worst_ky, worst_radius)};
}

Outcome optimality() {
    constexpr int kSteps = 10000;
    DareOptions o;
    o.tol = 1e-14;
    const Matrix a = Matrix::Constant(1, 1, 0.5), b = Matrix::Constant(1, 1, 0.5);
    const Matrix q = Matrix::Constant(1, 1, 1.0), r = Matrix::Constant(1, 1, 0.1);
    const RiccatiSolution s = solve_riccati(a, b, q, r, o);
    const Vector x0 = Vector::Constant(1, 1.0);
    const double sim = oracle::brute_force_cost(a, b, q, r, s.K, x0, kSteps);
    const double predicted = x0.dot(s.P * x0);
    const double cost_err = std::abs(sim - predicted) / predicted;

    // Perturbations of norm 1e-3: scalar +-1e-3, then random directions on augmented systems.
    double worst_gain = -std::numeric_limits<double>::infinity();
    for (double d : {1e-3, -1e-3}) {
        const double c = oracle::brute_force_cost(a, b, q, r, s.K + Matrix::Constant(1, 1, d), x0, kSteps);
        worst_gain = std::max(worst_gain, (sim - c) / sim);
    }
    std::mt19937_64 rng(505);
    for (const auto& sys : random_augmented(5, 506)) {
        const FeedbackLaw law = solve_dare(sys);
        const Vector xa = sys.augment(oracle::random_inputs(static_cast<int>(sys.output_size()), 1, rng).col(0));
        const double base = oracle::brute_force_cost(sys.A, sys.B, sys.Q_tilde, sys.R, law.K, xa, kSteps);
        for (int i = 0; i < 10; ++i) {
            Matrix dK = oracle::random_inputs(static_cast<int>(law.K.rows()), static_cast<int>(law.K.cols()), rng);
            dK *= 1e-3 / dK.norm();
            const double c = oracle::brute_force_cost(sys.A, sys.B, sys.Q_tilde, sys.R, law.K + dK, xa, kSteps);
            worst_gain = std::max(worst_gain, (base - c) / base);
        }
    }
    const bool pass = cost_err < 1e-3 && worst_gain <= 1e-9;
    return {pass, fmt("scalar 1e4-step cost %.10g vs x0'Px0 %.10g (rel err %.1e); largest relative cost decrease "
                      "under |dK| = 1e-3: %.1e",
                      sim, predicted, cost_err, worst_gain)};
}

Outcome linear_exactness() {
    std::mt19937_64 rng(606);
    double worst_gd = 0.0, worst_cdt = 0.0;
    for (int trial = 0; trial < 4; ++trial) {
        NetworkSpec spec;
        spec.input_dim = 6;
        spec.output_dim = 1 + trial % 2;
        spec.activation = Activation::identity;
        const NetworkState st = init_network(spec, rng());
        const Batch batch{oracle::random_inputs(4, 6, rng), oracle::random_inputs(4 * spec.output_dim, 1, rng).col(0)};
        const LossModel loss(trial < 2 ? LossKind::sse : LossKind::mse);
        const Kernel k = build_kernel(st, batch);
        const double alpha = 0.8 * stability_check(k, 1.0, loss).safe_alpha_bound;
        const AugmentedSystem sys = build_augmented_system(k, alpha, batch.targets, 1.0, 0.1, loss.kind());
        const FeedbackLaw law = solve_dare(sys);

        TrainerConfig cfg;
        cfg.alpha0 = alpha;
        cfg.decay_coeff = 0.0; // the local model has no decay
        cfg.steps = 200;
        cfg.loss = loss.kind();
        cfg.record_outputs = true;
        const TrainingTrace gd = train(st, batch, batch, cfg);
        const auto open = simulate_local(sys, gd.outputs.front(), cfg.steps);
        cfg.method = Method::cdt;
        const TrainingTrace cdt = train(st, batch, batch, cfg, &law);
        const auto closed = simulate_local(sys, law, cdt.outputs.front(), cfg.steps);
        if (gd.outputs.size() != open.size() || cdt.outputs.size() != closed.size())
            return {false, "trainer stopped early"};
        for (std::size_t i = 0; i < open.size(); ++i) {
            worst_gd = std::max(worst_gd, (gd.outputs[i] - open[i]).cwiseAbs().maxCoeff());
            worst_cdt = std::max(worst_cdt, (cdt.outputs[i] - closed[i]).cwiseAbs().maxCoeff());
        }
    }
    return {worst_gd < 1e-8 && worst_cdt < 1e-8,
            fmt("4 networks x 200 steps: max |gd - open loop| %.1e, max |cdt - closed loop| %.1e", worst_gd, worst_cdt)};
}

struct Sweep {
    ExperimentResults results;
    std::string summary_bytes;
    double seconds = 0.0;
};

Sweep run_example() {
    const auto t0 = std::chrono::steady_clock::now();
    Sweep s;
    s.results = run_plan(load_plan(std::string(CDT_SOURCE_DIR) + "/configs/example_sweep.json"));
    std::ostringstream out;
    write_summary(out, s.results.summary, OutputFormat::csv);
    out << summary_text(s.results.summary);
    s.summary_bytes = out.str();
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return s;
}

const SummaryRow* find_row(const ExperimentResults& res, double alpha, Method m) {
    for (const auto& row : res.summary)
        if (row.alpha == alpha && row.method == m) return &row;
    return nullptr;
}

Outcome table_reproduction(const Sweep& s) {
    const ExperimentResults& res = s.results;
    const double alpha = res.plan.alphas.front();
    double largest_bound = 0.0;
    for (const auto& r : res.runs) largest_bound = std::max(largest_bound, r.analysis.safe_alpha_bound);
    const SummaryRow* gd = find_row(res, alpha, Method::gd);
    const SummaryRow* cdt = find_row(res, alpha, Method::cdt);
    if (!gd || !cdt) return {false, "missing summary rows"};
    bool cdt_finite = true;
    for (const auto& r : res.runs)
        if (r.alpha == alpha && r.method == Method::cdt) cdt_finite = cdt_finite && std::isfinite(r.final_val_loss);
    const int seeds = res.plan.n_seeds;
    const int gd_diverged = gd->n_runs - gd->n_converged;
    const bool pass = alpha > largest_bound && seeds == 5 && gd_diverged >= 4 && cdt->n_converged == 5 && cdt_finite &&
                      s.seconds < 600;
    return {pass, fmt("alpha %g vs measured safe bound %.4g: GD diverged %d/%d (%s), CDT converged %d/%d (%s), %.1f s",
                      alpha, largest_bound, gd_diverged, gd->n_runs, convergence_label(gd->n_converged, gd->n_runs).c_str(),
                      cdt->n_converged, cdt->n_runs, convergence_label(cdt->n_converged, cdt->n_runs).c_str(), s.seconds)};
}

// Alphas at which every seed converged under both methods.
std::vector<double> both_converged(const ExperimentResults& res) {
    std::vector<double> out;
    for (double a : res.plan.alphas) {
        const SummaryRow* gd = find_row(res, a, Method::gd);
        const SummaryRow* cdt = find_row(res, a, Method::cdt);
        if (gd && cdt && gd->n_converged == gd->n_runs && cdt->n_converged == cdt->n_runs) out.push_back(a);
    }
    return out;
}

Outcome loss_ordering(const Sweep& s) {
    const ExperimentResults& res = s.results;
    const auto alphas = both_converged(res);
    if (alphas.empty()) return {false, "no alpha where both methods converge for all seeds"};
    bool pass = s.seconds < 600;
    std::string detail;
    for (double a : alphas) {
        const SummaryRow* gd = find_row(res, a, Method::gd);
        const SummaryRow* cdt = find_row(res, a, Method::cdt);
        // Mean over seeds of L_GD(k) - L_CDT(k), recomputed from the traces.
        std::map<int, std::pair<const RunResult*, const RunResult*>> pairs;
        for (const auto& r : res.runs)
            if (r.alpha == a) (r.method == Method::gd ? pairs[r.seed_index].first : pairs[r.seed_index].second) = &r;
        std::size_t steps = std::numeric_limits<std::size_t>::max();
        for (const auto& [seed, p] : pairs)
            steps = std::min({steps, p.first->trace.records.size(), p.second->trace.records.size()});
        std::size_t nonneg = 0;
        for (std::size_t k = 0; k < steps; ++k) {
            double diff = 0.0;
            for (const auto& [seed, p] : pairs) diff += p.first->trace.records[k].val_loss - p.second->trace.records[k].val_loss;
            nonneg += diff >= 0.0;
        }
        const double share = static_cast<double>(nonneg) / static_cast<double>(steps);
        pass = pass && cdt->mean_val_loss <= gd->mean_val_loss && share >= 0.95;
        detail += fmt("%salpha %g: mean CDT %.4g vs GD %.4g, difference >= 0 at %.1f%% of %zu steps",
                      detail.empty() ? "" : "; ", a, cdt->mean_val_loss, gd->mean_val_loss, 100 * share, steps);
    }
    return {pass, detail};
}

Outcome variance_ordering(const Sweep& s) {
    const auto alphas = both_converged(s.results);
    if (alphas.empty()) return {false, "no alpha where both methods converge for all seeds"};
    bool pass = true;
    std::string detail;
    for (double a : alphas) {
        const SummaryRow* gd = find_row(s.results, a, Method::gd);
        const SummaryRow* cdt = find_row(s.results, a, Method::cdt);
        pass = pass && cdt->stddev_val_loss <= gd->stddev_val_loss;
        detail += fmt("%salpha %g: stddev CDT %.4g vs GD %.4g", detail.empty() ? "" : "; ", a, cdt->stddev_val_loss,
                      gd->stddev_val_loss);
    }
    return {pass, detail};
}

Outcome reproducibility(const Sweep& first) {
    const Sweep second = run_example();
    const bool same = first.summary_bytes == second.summary_bytes;
    return {same, fmt("%zu summary bytes, %s", first.summary_bytes.size(), same ? "identical" : "differ")};
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    Sweep sweep;
    bool swept = false;
    auto example = [&]() -> const Sweep& {
        if (!swept) {
            sweep = run_example();
            swept = true;
        }
        return sweep;
    };
    const std::vector<Criterion> criteria{
        {"jacobian correctness", jacobian_correctness},
        {"kernel properties", kernel_properties},
        {"PBH oracle equivalence", pbh_equivalence},
        {"DARE correctness", dare_correctness},
        {"optimality", optimality},
        {"linear-network exactness", linear_exactness},
        {"large-alpha robustness", [&] { return table_reproduction(example()); }},
        {"validation loss ordering", [&] { return loss_ordering(example()); }},
        {"variance ordering", [&] { return variance_ordering(example()); }},
        {"reproducibility", [&] { return reproducibility(example()); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (i == 0 && secs >= 30) {
            o.pass = false;
            o.detail += " (over 30 s)";
        }
        std::printf("%s %2zu %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}

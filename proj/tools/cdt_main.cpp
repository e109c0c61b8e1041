// cdt: command-line front end for kernel analysis, training and sweeps.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cdt/analysis.hpp"
#include "cdt/config.hpp"
#include "cdt/control.hpp"
#include "cdt/dataset.hpp"
#include "cdt/errors.hpp"
#include "cdt/experiment.hpp"
#include "cdt/kernel.hpp"
#include "cdt/matrix_io.hpp"
#include "cdt/report.hpp"

namespace fs = std::filesystem;
using namespace cdt;

namespace {

struct GlobalOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> format;
    std::optional<double> split_fraction;
    bool verbose = false;
};

struct ModelOptions {
    std::string arch;
    std::vector<double> alphas;
    std::optional<std::string> loss;
};

std::vector<int> parse_arch(const std::string& text) {
    std::vector<int> widths;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const int w = std::stoi(item, &used);
            if (used != item.size() || w < 1) throw std::invalid_argument(item);
            widths.push_back(w);
        } catch (const std::exception&) {
            throw ConfigError("--arch expects comma-separated positive widths, got '" + text + "'");
        }
    }
    return widths;
}

ExperimentPlan load(const GlobalOptions& g, const ModelOptions* m, bool needs_steps,
                    const std::function<void(ExperimentPlan&)>& tweak = {}) {
    ExperimentPlan plan = g.config.empty() ? ExperimentPlan{} : load_plan(g.config);
    if (g.seed) plan.master_seed = *g.seed;
    if (g.out_dir) plan.out_dir = *g.out_dir;
    if (g.format) plan.format = parse_output_format(*g.format);
    if (g.split_fraction) plan.dataset.split_train_fraction = *g.split_fraction;
    if (m) {
        if (!m->arch.empty()) plan.architectures = {parse_arch(m->arch)};
        if (!m->alphas.empty()) plan.alphas = m->alphas;
        if (m->loss) plan.trainer.loss = parse_loss_kind(*m->loss);
    }
    if (tweak) tweak(plan);
    if (!needs_steps && plan.trainer.steps < 0) plan.trainer.steps = 0;
    plan.validate();
    return plan;
}

/// Data, network and kernel of the first architecture at seed index 0.
struct Cell {
    Dataset data;
    NetworkState state;
    Kernel kernel;
    SeedPair seeds;
};

Cell build_cell(const ExperimentPlan& plan) {
    Cell c;
    c.seeds = derive_seeds(plan.master_seed, 1).front();
    c.data = load_dataset(plan.dataset, c.seeds.data);
    c.state = init_network(plan.architecture(0, static_cast<int>(c.data.train.inputs.cols()), c.data.output_dim),
                           c.seeds.init);
    c.kernel = build_kernel(c.state, c.data.train);
    return c;
}

fs::path prepare_dir(const ExperimentPlan& plan) {
    const fs::path dir(plan.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());
    return dir;
}

LogFn logger(bool verbose) {
    if (!verbose) return {};
    return [](const std::string& msg) { std::cerr << msg << '\n'; };
}

int cmd_analyze(const GlobalOptions& g, const ModelOptions& m) {
    const ExperimentPlan plan = load(g, &m, false);
    const Cell c = build_cell(plan);
    const LossModel loss(plan.trainer.loss);
    const Vector y_hat = forward(c.state, c.data.train);
    const Vector& y = c.data.train.targets;

    AnalysisBundle b;
    b.arch_label = c.state.spec.label();
    b.samples = c.data.train.size();
    b.output_dim = c.data.output_dim;
    b.seed = c.seeds.init;
    b.kernel = kernel_diagnostics(c.kernel);
    b.initial_loss = loss.value(y_hat, y);
    for (double alpha : plan.alphas) {
        AnalysisReport r = analyze(c.kernel, alpha, loss);
        r.reachability = reachability_check(c.kernel, alpha, loss, Vector(y_hat - y));
        b.reports.push_back(r);
        b.boundedness.push_back(loss_boundedness(loss, c.kernel, alpha, y_hat, y));
        b.equilibria.push_back(equilibrium_classify(c.kernel, alpha, loss, y_hat, y));
    }
    const fs::path dir = prepare_dir(plan);
    {
        std::ofstream out(dir / "analysis.json");
        write_analysis_json(out, b);
        if (!out) throw DataError("write failed for analysis.json");
    }
    std::cout << analysis_text(b);
    if (g.verbose) std::cerr << "wrote " << (dir / "analysis.json").string() << '\n';
    return 0;
}

int cmd_train(const GlobalOptions& g, const ModelOptions& m, const std::string& method, std::optional<int> steps,
              std::optional<double> p) {
    const ExperimentPlan merged = load(g, &m, true, [&](ExperimentPlan& plan) {
        if (steps) plan.trainer.steps = *steps;
        if (p) plan.trainer.p = *p;
        plan.architectures.resize(1);
        plan.alphas.resize(1);
        plan.methods = {parse_method(method)};
        plan.n_seeds = 1;
    });
    const ExperimentResults res = run_plan(merged, logger(g.verbose));
    emit_reports(res, merged.out_dir, merged.format);
    const RunResult& r = res.runs.front();
    if (!r.error.empty()) {
        std::cerr << "error: " << r.error << '\n';
        return 1;
    }
    std::printf("%s alpha0=%g method=%s steps=%zu %s final_train_loss=%s final_val_loss=%s\n", r.arch_label.c_str(),
                r.alpha, std::string(to_string(r.method)).c_str(), r.trace.records.size() - 1,
                r.converged ? "converged" : "diverged", format_double(r.final_train_loss).c_str(),
                format_double(r.final_val_loss).c_str());
    return 0;
}

int cmd_sweep(const GlobalOptions& g) {
    if (g.config.empty()) throw ConfigError("sweep requires --config");
    const ExperimentPlan plan = load(g, nullptr, true);
    const ExperimentResults res = run_plan(plan, logger(g.verbose));
    const auto files = emit_reports(res, plan.out_dir, plan.format);
    std::cout << summary_text(res.summary);
    if (g.verbose) std::cerr << "wrote " << files.size() << " files under " << plan.out_dir << '\n';
    return 0;
}

int cmd_export_kernel(const GlobalOptions& g, const ModelOptions& m) {
    const ExperimentPlan plan = load(g, &m, false);
    const Cell c = build_cell(plan);
    const KernelDiagnostics kd = kernel_diagnostics(c.kernel);
    const fs::path dir = prepare_dir(plan);
    write_matrix_csv((dir / "kernel.csv").string(), c.kernel.theta_matrix);
    write_matrix_csv((dir / "kernel_eigenvalues.csv").string(), Matrix(kd.eigenvalues));
    std::printf("kernel %lldx%lld, rank %d, eigenvalues [%s, %s]\n", static_cast<long long>(c.kernel.dim()),
                static_cast<long long>(c.kernel.dim()), kd.rank, format_double(kd.min_eig).c_str(),
                format_double(kd.max_eig).c_str());
    return 0;
}

int cmd_export_gain(const GlobalOptions& g, const ModelOptions& m, std::optional<double> p, std::optional<double> q) {
    const ExperimentPlan plan = load(g, &m, false, [&](ExperimentPlan& pl) {
        if (p) pl.trainer.p = *p;
        if (q) pl.q_scale = *q;
    });
    const Cell c = build_cell(plan);
    const double alpha = plan.alphas.front();
    const AugmentedSystem sys =
        build_augmented_system(c.kernel, alpha, c.data.train.targets, plan.q_scale, plan.trainer.p, plan.trainer.loss);
    const FeedbackLaw law = solve_dare(sys, plan.dare);
    const ClosedLoop cl = closed_loop(sys, law);

    const fs::path dir = prepare_dir(plan);
    write_matrix_csv((dir / "P.csv").string(), law.P);
    write_matrix_csv((dir / "K.csv").string(), law.K);
    Matrix eig(cl.eigenvalues.size(), 2);
    eig.col(0) = cl.eigenvalues.real();
    eig.col(1) = cl.eigenvalues.imag();
    write_matrix_csv((dir / "closed_loop_eigenvalues.csv").string(), eig);

    nlohmann::ordered_json info;
    info["alpha"] = alpha;
    info["p"] = plan.trainer.p;
    info["q"] = plan.q_scale;
    info["loss"] = std::string(to_string(plan.trainer.loss));
    info["dare_method"] = std::string(to_string(law.method));
    info["dare_iterations"] = law.iterations;
    info["dare_residual"] = law.dare_residual;
    info["deflated_radius"] = law.closed_loop_radius_deflated;
    info["target_residual"] = cl.target_residual;
    info["optimal_cost"] = law.optimal_cost(forward(c.state, c.data.train));
    info["cost_convention"] = kCostConvention;
    {
        std::ofstream out(dir / "gain.json");
        out << info.dump(2) << '\n';
        if (!out) throw DataError("write failed for gain.json");
    }
    std::printf("K %lldx%lld, residual %s, deflated closed-loop radius %s\n", static_cast<long long>(law.K.rows()),
                static_cast<long long>(law.K.cols()), format_double(law.dare_residual).c_str(),
                format_double(law.closed_loop_radius_deflated).c_str());
    return 0;
}

void add_model_options(CLI::App* sub, ModelOptions& m, bool single_alpha) {
    sub->add_option("--arch", m.arch, "hidden widths, e.g. 256 or 64,64 (default: first plan architecture)");
    if (single_alpha)
        sub->add_option("--alpha", m.alphas, "learning rate")->expected(1);
    else
        sub->add_option("--alpha", m.alphas, "learning rate(s)");
    sub->add_option("--loss", m.loss, "mse | sse");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Controlled descent training: kernel analysis, LQR label augmentation and GD/CDT sweeps"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--config", g.config, "JSON plan file");
    app.add_option("--seed", g.seed, "master seed");
    app.add_option("--out-dir", g.out_dir, "output directory");
    app.add_option("--format", g.format, "delimited output format")->check(CLI::IsMember({"csv", "json-lines"}));
    app.add_option("--split-fraction", g.split_fraction, "training share of the subsample");
    app.add_flag("-v,--verbose", g.verbose, "progress on stderr");

    ModelOptions analyze_m, train_m, kernel_m, gain_m;
    auto* analyze = app.add_subcommand("analyze", "stability / reachability verdicts of the local dynamics");
    add_model_options(analyze, analyze_m, false);

    auto* train = app.add_subcommand("train", "one training run");
    add_model_options(train, train_m, true);
    std::string method;
    std::optional<int> steps;
    std::optional<double> train_p;
    train->add_option("--method", method, "gd | cdt")->required()->check(CLI::IsMember({"gd", "cdt"}));
    train->add_option("--steps", steps, "training steps");
    train->add_option("--p", train_p, "control penalty");

    auto* sweep = app.add_subcommand("sweep", "run a plan file and write reports");

    auto* export_kernel = app.add_subcommand("export-kernel", "write Theta(k0) and its eigenvalues as CSV");
    add_model_options(export_kernel, kernel_m, false);

    auto* export_gain = app.add_subcommand("export-gain", "write P, K and closed-loop eigenvalues as CSV");
    add_model_options(export_gain, gain_m, true);
    std::optional<double> gain_p, gain_q;
    export_gain->add_option("--p", gain_p, "control penalty");
    export_gain->add_option("--q", gain_q, "output penalty");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*analyze) return cmd_analyze(g, analyze_m);
        if (*train) return cmd_train(g, train_m, method, steps, train_p);
        if (*sweep) return cmd_sweep(g);
        if (*export_kernel) return cmd_export_kernel(g, kernel_m);
        if (*export_gain) return cmd_export_gain(g, gain_m, gain_p, gain_q);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

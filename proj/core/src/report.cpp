#include "cdt/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "cdt/errors.hpp"
#include "cdt/matrix_io.hpp"

namespace cdt {

namespace {

using ojson = nlohmann::ordered_json;

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string cell_text(const Cell& c) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::string>) return csv_escape(v);
            else if constexpr (std::is_same_v<T, double>) return format_double(v);
            else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
            else return std::to_string(v);
        },
        c);
}

ojson cell_json(const Cell& c) {
    return std::visit(
        [](const auto& v) -> ojson {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
                if (!std::isfinite(v)) return format_double(v);
                return v;
            } else {
                return v;
            }
        },
        c);
}

ojson number(double v) { return std::isfinite(v) ? ojson(v) : ojson(format_double(v)); }

std::string fixed(double v, const char* fmt = "%.6g") {
    if (!std::isfinite(v)) return format_double(v);
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

std::string text_table(const std::vector<std::string>& head, const std::vector<std::vector<std::string>>& rows) {
    // Width counts code points so the UTF-8 "±" lines up.
    auto width = [](const std::string& s) {
        return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
    };
    std::vector<std::size_t> w(head.size());
    for (std::size_t j = 0; j < head.size(); ++j) w[j] = width(head[j]);
    for (const auto& r : rows)
        for (std::size_t j = 0; j < r.size(); ++j) w[j] = std::max(w[j], width(r[j]));
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& r) {
        for (std::size_t j = 0; j < r.size(); ++j) {
            out << (j ? " | " : "") << r[j];
            if (j + 1 < r.size()) out << std::string(w[j] - width(r[j]), ' ');
        }
        out << '\n';
    };
    line(head);
    for (std::size_t j = 0; j < w.size(); ++j) out << (j ? "-+-" : "") << std::string(w[j], '-');
    out << '\n';
    for (const auto& r : rows) line(r);
    return out.str();
}

std::string alpha_tag(double a) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", a);
    return buf;
}

std::string arch_name(const RunResult& r) {
    return r.arch_label.empty() ? "arch" + std::to_string(r.arch_index) : r.arch_label;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw DataError("cannot write '" + p.string() + "'");
    return out;
}

} // namespace

RowWriter::RowWriter(std::ostream& out, OutputFormat format, std::vector<std::string> columns, bool header)
    : out_(out), format_(format), columns_(std::move(columns)) {
    if (header && format_ == OutputFormat::csv) {
        for (std::size_t j = 0; j < columns_.size(); ++j) out_ << (j ? "," : "") << columns_[j];
        out_ << '\n';
    }
}

void RowWriter::row(const std::vector<Cell>& cells) {
    if (cells.size() != columns_.size()) throw DimensionError("row width does not match the column list");
    if (format_ == OutputFormat::csv) {
        for (std::size_t j = 0; j < cells.size(); ++j) out_ << (j ? "," : "") << cell_text(cells[j]);
        out_ << '\n';
        return;
    }
    ojson obj = ojson::object();
    for (std::size_t j = 0; j < cells.size(); ++j) obj[columns_[j]] = cell_json(cells[j]);
    out_ << obj.dump() << '\n';
}

const std::vector<std::string>& summary_columns() {
    static const std::vector<std::string> c{"arch",        "alpha",       "method",        "runs",
                                            "reachable",   "stable",      "converged",     "convergence",
                                            "reachability", "open_loop_stable", "mean_val_loss", "stddev_val_loss"};
    return c;
}

const std::vector<std::string>& trace_columns() {
    static const std::vector<std::string> c{"step",     "method", "alpha0",    "seed",        "train_loss",  "val_loss",
                                            "yu_norm",  "diverged", "arch",    "label_gap",   "param_shift", "wall_seconds"};
    return c;
}

const std::vector<std::string>& run_columns() {
    static const std::vector<std::string> c{
        "arch",          "seed_index",      "seed",           "alpha",         "method",
        "converged",     "steps_run",       "final_train_loss", "final_val_loss", "stable",
        "strictly_stable", "reachable",     "stabilizable",   "spectral_radius", "safe_alpha_bound",
        "kernel_min_eig", "kernel_max_eig", "dare_residual",  "deflated_radius", "dare_iterations",
        "validity_violation_step", "validity_gap_step", "error"};
    return c;
}

const std::vector<std::string>& loss_difference_columns() {
    static const std::vector<std::string> c{"arch", "alpha", "step", "mean_gd_val_loss", "mean_cdt_val_loss",
                                            "mean_difference", "pairs", "status"};
    return c;
}

const std::vector<std::string>& output_trace_columns() {
    static const std::vector<std::string> c{"arch", "alpha", "seed_index", "method", "step",
                                            "sample", "output", "y_hat", "y_bar", "y"};
    return c;
}

void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows, OutputFormat format) {
    RowWriter w(out, format, summary_columns());
    for (const auto& r : rows)
        w.row({r.arch_label, r.alpha, std::string(to_string(r.method)), static_cast<long long>(r.n_runs),
               static_cast<long long>(r.n_reachable), static_cast<long long>(r.n_stable),
               static_cast<long long>(r.n_converged), convergence_label(r.n_converged, r.n_runs),
               verdict_label(r.n_reachable, r.n_runs), verdict_label(r.n_stable, r.n_runs), r.mean_val_loss,
               r.stddev_val_loss});
}

std::string summary_text(const std::vector<SummaryRow>& rows) {
    std::vector<std::vector<std::string>> body;
    for (const auto& r : rows) {
        body.push_back({r.arch_label, alpha_tag(r.alpha), r.method == Method::gd ? "GD" : "CDT",
                        verdict_label(r.n_reachable, r.n_runs), verdict_label(r.n_stable, r.n_runs),
                        convergence_label(r.n_converged, r.n_runs),
                        fixed(r.mean_val_loss) + " ± " + fixed(r.stddev_val_loss)});
    }
    return text_table({"arch", "alpha", "method", "Reachability", "|eig(Theta(k0))|<1", "Convergence",
                       "Final validation loss"},
                      body);
}

void write_runs(std::ostream& out, const std::vector<RunResult>& runs, OutputFormat format) {
    RowWriter w(out, format, run_columns());
    for (const auto& r : runs) {
        const auto opt = [](const std::optional<int>& v) { return static_cast<long long>(v ? *v : -1); };
        w.row({arch_name(r), static_cast<long long>(r.seed_index), std::to_string(r.seeds.init), r.alpha,
               std::string(to_string(r.method)), r.converged, static_cast<long long>(r.trace.records.size()),
               r.final_train_loss, r.final_val_loss, r.analysis.stable, r.analysis.strictly_stable,
               r.analysis.reachable, r.analysis.stabilizable, r.analysis.spectral_radius, r.analysis.safe_alpha_bound,
               r.analysis.kernel_min_eig, r.analysis.kernel_max_eig, r.dare_residual, r.deflated_radius,
               static_cast<long long>(r.dare_iterations), opt(r.validity_violation), opt(r.validity_gap_step),
               r.error});
    }
}

void write_trace(RowWriter& w, const RunResult& r) {
    const std::string method(to_string(r.method));
    for (std::size_t i = 0; i < r.trace.records.size(); ++i) {
        const auto& rec = r.trace.records[i];
        const bool flagged = r.trace.diverged_at && *r.trace.diverged_at == rec.step;
        w.row({static_cast<long long>(rec.step), method, r.alpha, std::to_string(r.seeds.init), rec.train_loss,
               rec.val_loss, rec.yu_norm, flagged, arch_name(r), rec.label_gap, rec.param_shift, rec.wall_seconds});
    }
}

void write_loss_difference(std::ostream& out, const std::vector<RunResult>& runs, OutputFormat format) {
    RowWriter w(out, format, loss_difference_columns());
    // (arch, alpha) groups in first-seen order, each mapping seed -> (gd, cdt).
    struct Group {
        int arch;
        double alpha;
        std::string label;
        std::map<int, std::pair<const RunResult*, const RunResult*>> pairs;
    };
    std::vector<Group> groups;
    for (const auto& r : runs) {
        auto it = std::find_if(groups.begin(), groups.end(),
                               [&](const Group& g) { return g.arch == r.arch_index && g.alpha == r.alpha; });
        if (it == groups.end()) {
            groups.push_back({r.arch_index, r.alpha, arch_name(r), {}});
            it = groups.end() - 1;
        }
        auto& slot = it->pairs[r.seed_index];
        (r.method == Method::gd ? slot.first : slot.second) = &r;
    }
    for (const auto& g : groups) {
        std::vector<std::pair<const RunResult*, const RunResult*>> pairs;
        for (const auto& [seed, p] : g.pairs)
            if (p.first && p.second) pairs.push_back(p);
        if (pairs.empty()) continue;
        std::size_t len = std::numeric_limits<std::size_t>::max();
        std::size_t full = 0;
        auto usable = [](const RunResult* r) -> std::size_t {
            if (!r->error.empty()) return 0;
            if (r->trace.diverged_at) return static_cast<std::size_t>(*r->trace.diverged_at);
            return r->trace.records.size();
        };
        for (const auto& [gd, cdt] : pairs) {
            len = std::min({len, usable(gd), usable(cdt)});
            full = std::max({full, gd->trace.records.size(), cdt->trace.records.size()});
        }
        const double n = static_cast<double>(pairs.size());
        for (std::size_t k = 0; k < len; ++k) {
            double sg = 0.0, sc = 0.0;
            for (const auto& [gd, cdt] : pairs) {
                sg += gd->trace.records[k].val_loss;
                sc += cdt->trace.records[k].val_loss;
            }
            w.row({g.label, g.alpha, static_cast<long long>(k), sg / n, sc / n, (sg - sc) / n,
                   static_cast<long long>(pairs.size()), std::string("ok")});
        }
        const bool truncated = std::any_of(pairs.begin(), pairs.end(), [&](const auto& p) {
            return !p.first->error.empty() || !p.second->error.empty() || p.first->trace.diverged ||
                   p.second->trace.diverged;
        });
        if (truncated || len < full) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            w.row({g.label, g.alpha, static_cast<long long>(len), nan, nan, nan, static_cast<long long>(pairs.size()),
                   std::string("diverged")});
        }
    }
}

void write_output_traces(std::ostream& out, const std::vector<RunResult>& runs, OutputFormat format) {
    RowWriter w(out, format, output_trace_columns());
    for (const auto& r : runs) {
        const auto& t = r.trace;
        const int n_out = t.snapshot_samples.empty()
                              ? 1
                              : static_cast<int>(t.snapshot_targets.size() / static_cast<Eigen::Index>(t.snapshot_samples.size()));
        for (const auto& snap : t.snapshots)
            for (std::size_t s = 0; s < t.snapshot_samples.size(); ++s)
                for (int m = 0; m < n_out; ++m) {
                    const auto i = static_cast<Eigen::Index>(s) * n_out + m;
                    w.row({arch_name(r), r.alpha, static_cast<long long>(r.seed_index), std::string(to_string(r.method)),
                           static_cast<long long>(snap.step), static_cast<long long>(t.snapshot_samples[s]),
                           static_cast<long long>(m), snap.y_hat(i), snap.y_bar(i), t.snapshot_targets(i)});
                }
    }
}

std::string run_stem(const RunResult& r) {
    return "a" + std::to_string(r.arch_index) + "_s" + std::to_string(r.seed_index) + "_alpha" + alpha_tag(r.alpha) +
           "_" + std::string(to_string(r.method));
}

std::vector<std::filesystem::path> emit_reports(const ExperimentResults& results, const std::filesystem::path& dir,
                                                OutputFormat format) {
    if (results.runs.empty()) throw DomainError("no runs to report");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir / "traces", ec);
    if (ec) throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());
    const std::string ext = "." + std::string(extension(format));
    std::vector<fs::path> written;

    auto emit = [&](const fs::path& p, auto&& body) {
        auto out = open_out(p);
        body(out);
        out.flush();
        if (!out) throw DataError("write failed for '" + p.string() + "'");
        written.push_back(p);
    };

    emit(dir / ("summary" + ext), [&](std::ostream& o) { write_summary(o, results.summary, format); });
    emit(dir / "summary.txt", [&](std::ostream& o) { o << summary_text(results.summary); });
    emit(dir / ("runs" + ext), [&](std::ostream& o) { write_runs(o, results.runs, format); });
    emit(dir / ("traces_merged" + ext), [&](std::ostream& o) {
        RowWriter w(o, format, trace_columns());
        for (const auto& r : results.runs) write_trace(w, r);
    });
    for (const auto& r : results.runs)
        emit(dir / "traces" / (run_stem(r) + ext), [&](std::ostream& o) {
            RowWriter w(o, format, trace_columns());
            write_trace(w, r);
        });
    emit(dir / ("loss_difference" + ext), [&](std::ostream& o) { write_loss_difference(o, results.runs, format); });
    const bool snapshots =
        std::any_of(results.runs.begin(), results.runs.end(), [](const RunResult& r) { return !r.trace.snapshots.empty(); });
    if (snapshots)
        emit(dir / ("output_traces" + ext), [&](std::ostream& o) { write_output_traces(o, results.runs, format); });
    return written;
}

void write_analysis_json(std::ostream& out, const AnalysisBundle& b) {
    ojson doc = ojson::object();
    doc["architecture"] = b.arch_label;
    doc["samples"] = b.samples;
    doc["output_dim"] = b.output_dim;
    doc["seed"] = std::to_string(b.seed);
    doc["initial_loss"] = number(b.initial_loss);
    doc["kernel"] = {{"min_eig", number(b.kernel.min_eig)},
                     {"max_eig", number(b.kernel.max_eig)},
                     {"rank", b.kernel.rank},
                     {"dim", b.kernel.eigenvalues.size()},
                     {"rank_tolerance", number(b.kernel.rank_tolerance)},
                     {"condition_estimate", number(b.kernel.condition_estimate)},
                     {"symmetry_error", number(b.kernel.symmetry_error)}};
    ojson per = ojson::array();
    for (std::size_t i = 0; i < b.reports.size(); ++i) {
        const auto& r = b.reports[i];
        ojson modes = ojson::array();
        for (const auto& m : r.reachability.unreachable_modes)
            modes.push_back({{"eigenvalue_re", number(m.eigenvalue.real())},
                             {"eigenvalue_im", number(m.eigenvalue.imag())},
                             {"defect", m.defect},
                             {"excitation", number(m.excitation)}});
        ojson e = ojson::object();
        e["alpha"] = r.stability.alpha;
        e["loss_kind"] = std::string(to_string(r.stability.loss_kind));
        e["spectral_radius_open_loop"] = number(r.stability.spectral_radius_open_loop);
        e["stable"] = r.stability.stable;
        e["strictly_stable"] = r.stability.strictly_stable;
        e["safe_alpha_bound"] = number(r.stability.safe_alpha_bound);
        e["reachable"] = r.reachability.reachable;
        e["stabilizable"] = r.reachability.stabilizable;
        e["stabilizable_along_labels"] = r.reachability.stabilizable_along_labels;
        e["unreachable_modes"] = modes;
        e["gamma"] = number(r.gamma);
        e["kappa"] = number(r.kappa);
        if (!r.stability.note.empty()) e["note"] = r.stability.note;
        if (i < b.boundedness.size()) {
            const auto& v = b.boundedness[i];
            ojson bv = ojson::object();
            bv["exponentially_bounded"] = v.exponentially_bounded ? ojson(*v.exponentially_bounded) : ojson(nullptr);
            bv["spectral_radius"] = number(v.spectral_radius);
            bv["mae_radius"] = number(v.mae_radius);
            bv["lyapunov_lhs"] = number(v.lyapunov_lhs);
            bv["lyapunov_delta"] = number(v.lyapunov_delta);
            bv["lyapunov"] = v.lyapunov ? ojson(std::string(to_string(*v.lyapunov))) : ojson(nullptr);
            if (!v.note.empty()) bv["note"] = v.note;
            e["boundedness"] = bv;
        }
        if (i < b.equilibria.size()) e["equilibrium_at_init"] = b.equilibria[i].names();
        per.push_back(e);
    }
    doc["alphas"] = per;
    out << doc.dump(2) << '\n';
}

std::string analysis_text(const AnalysisBundle& b) {
    std::ostringstream out;
    out << "architecture " << b.arch_label << ", r = " << b.samples << ", n_L = " << b.output_dim << "\n";
    out << "kernel eigenvalues [" << fixed(b.kernel.min_eig) << ", " << fixed(b.kernel.max_eig) << "], rank "
        << b.kernel.rank << "/" << b.kernel.eigenvalues.size() << ", condition " << fixed(b.kernel.condition_estimate)
        << "\n\n";
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : b.reports)
        rows.push_back({alpha_tag(r.stability.alpha), r.reachability.reachable ? "Yes" : "No",
                        r.stability.stable ? "Yes" : "No", r.stability.strictly_stable ? "Yes" : "No",
                        r.reachability.stabilizable ? "Yes" : "No", fixed(r.stability.spectral_radius_open_loop),
                        fixed(r.stability.safe_alpha_bound)});
    out << text_table({"alpha", "Reachability", "|eig(Theta(k0))|<1", "strict", "stabilizable", "spectral radius",
                       "safe alpha bound"},
                      rows);
    for (const auto& r : b.reports)
        if (!r.stability.note.empty()) out << "note (alpha " << alpha_tag(r.stability.alpha) << "): " << r.stability.note << "\n";
    return out.str();
}

} // namespace cdt

#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "cdt/analysis.hpp"
#include "cdt/experiment.hpp"
#include "cdt/kernel.hpp"

namespace cdt {

using Cell = std::variant<std::string, double, long long, bool>;

/// Writes rows with a fixed column order as CSV (header line first) or as
/// JSON lines (one object per row, keys in column order). CSV doubles use
/// %.17g, JSON doubles the shortest round-trip form; non-finite values are
/// written as "inf", "-inf", "nan".
class RowWriter {
public:
    RowWriter(std::ostream& out, OutputFormat format, std::vector<std::string> columns, bool header = true);
    void row(const std::vector<Cell>& cells);

private:
    std::ostream& out_;
    OutputFormat format_;
    std::vector<std::string> columns_;
};

// Column orders.
const std::vector<std::string>& summary_columns();
const std::vector<std::string>& trace_columns();
const std::vector<std::string>& run_columns();
const std::vector<std::string>& loss_difference_columns();
const std::vector<std::string>& output_trace_columns();

void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows, OutputFormat format);
/// Table with the columns alpha, method, Reachability, |eig(Theta(k0))|<1,
/// Convergence, final validation loss (mean +- stddev).
std::string summary_text(const std::vector<SummaryRow>& rows);

void write_runs(std::ostream& out, const std::vector<RunResult>& runs, OutputFormat format);
void write_trace(RowWriter& writer, const RunResult& run);

/// Mean over paired seeds of L_GD(k) - L_CDT(k) on validation loss, per
/// (arch, alpha). A series stops at the first step where any paired run has
/// diverged or ended, followed by a single row with status "diverged".
void write_loss_difference(std::ostream& out, const std::vector<RunResult>& runs, OutputFormat format);

/// y_hat, y_bar and y for the snapshot samples of every run that recorded them.
void write_output_traces(std::ostream& out, const std::vector<RunResult>& runs, OutputFormat format);

/// Per-run trace file name, e.g. "a0_s3_alpha0.01_cdt".
std::string run_stem(const RunResult& run);

/// Writes summary.{ext}, summary.txt, runs.{ext}, traces/<run>.{ext},
/// traces_merged.{ext}, loss_difference.{ext} and (when snapshots exist)
/// output_traces.{ext}. Returns the written paths.
std::vector<std::filesystem::path> emit_reports(const ExperimentResults& results, const std::filesystem::path& out_dir,
                                                OutputFormat format);

/// Analysis of one architecture/seed across several learning rates.
struct AnalysisBundle {
    std::string arch_label;
    long long samples = 0;
    int output_dim = 1;
    std::uint64_t seed = 0;
    KernelDiagnostics kernel;
    double initial_loss = 0.0;
    std::vector<AnalysisReport> reports;
    std::vector<BoundednessVerdict> boundedness;
    std::vector<EquilibriumConditions> equilibria;
};

void write_analysis_json(std::ostream& out, const AnalysisBundle& bundle);
std::string analysis_text(const AnalysisBundle& bundle);

} // namespace cdt

#include "cdt/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "cdt/errors.hpp"

namespace cdt {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_fields(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.emplace_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.emplace_back(trim(cur));
    return out;
}

bool parse_number(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

void zscore_columns(Matrix& m) {
    const double n = static_cast<double>(m.rows());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double mean = m.col(j).sum() / n;
        m.col(j).array() -= mean;
        const double sd = std::sqrt(m.col(j).squaredNorm() / n);
        if (sd > 0.0) m.col(j) /= sd;
    }
}

Batch make_batch(const Matrix& x, const Matrix& t, const std::vector<int>& rows) {
    Batch b;
    const auto r = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index n_out = t.cols();
    b.inputs.resize(r, x.cols());
    b.targets.resize(r * n_out);
    for (Eigen::Index i = 0; i < r; ++i) {
        b.inputs.row(i) = x.row(rows[static_cast<std::size_t>(i)]);
        b.targets.segment(i * n_out, n_out) = t.row(rows[static_cast<std::size_t>(i)]).transpose();
    }
    return b;
}

} // namespace

std::string_view to_string(DataSource s) { return s == DataSource::csv ? "csv" : "synthetic"; }
std::string_view to_string(SyntheticKind k) { return k == SyntheticKind::linear ? "linear" : "teacher"; }

DataSource parse_data_source(std::string_view name) {
    if (name == "csv") return DataSource::csv;
    if (name == "synthetic") return DataSource::synthetic;
    throw DomainError("unknown dataset source '" + std::string(name) + "'");
}

SyntheticKind parse_synthetic_kind(std::string_view name) {
    if (name == "linear") return SyntheticKind::linear;
    if (name == "teacher") return SyntheticKind::teacher;
    throw DomainError("unknown synthetic kind '" + std::string(name) + "'");
}

void DatasetSpec::validate() const {
    if (source == DataSource::csv) {
        if (csv_path.empty()) throw DataError("csv source requires a path");
        if (target_column.empty()) throw DataError("csv source requires a target column");
    } else {
        if (n_samples < 2 || n_features < 1 || output_dim < 1 || teacher_width < 1)
            throw DataError("synthetic dataset dimensions must be positive (n_samples >= 2)");
        if (!(noise_std >= 0.0)) throw DataError("noise_std must be >= 0");
    }
    if (subsample < 0) throw DataError("subsample must be >= 0");
    if (!(split_train_fraction > 0.0 && split_train_fraction < 1.0))
        throw DataError("split_train_fraction must lie in (0, 1)");
}

int Table::column(std::string_view name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
        if (header[j] == name) return static_cast<int>(j);
    return -1;
}

Table parse_csv(std::istream& in, std::string_view source_name) {
    const std::string src(source_name);
    std::string line;
    Table table;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) break;
    }
    if (trim(line).empty()) throw DataError(src + ": empty file");
    table.header = split_fields(line);
    const std::size_t n_cols = table.header.size();

    std::vector<double> cells;
    Eigen::Index n_rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != n_cols)
            throw DataError(src + ": row " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                            " fields, header has " + std::to_string(n_cols));
        for (std::size_t j = 0; j < n_cols; ++j) {
            double v = 0.0;
            if (!parse_number(fields[j], v))
                throw DataError(src + ": non-numeric cell '" + fields[j] + "' at row " + std::to_string(line_no) +
                                ", column '" + table.header[j] + "'");
            cells.push_back(v);
        }
        ++n_rows;
    }
    table.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        cells.data(), n_rows, static_cast<Eigen::Index>(n_cols));
    return table;
}

Table read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return parse_csv(in, path);
}

int train_size(int n, double fraction) { return static_cast<int>(std::floor(fraction * n)); }

RawData load_raw(const DatasetSpec& spec) {
    spec.validate();
    RawData raw;
    if (spec.source == DataSource::csv) {
        const Table t = read_csv(spec.csv_path);
        const int target = t.column(spec.target_column);
        if (target < 0) throw DataError("target column '" + spec.target_column + "' not found in " + spec.csv_path);
        if (t.header.size() < 2) throw DataError(spec.csv_path + ": need at least one feature column");
        raw.features.resize(t.values.rows(), t.values.cols() - 1);
        for (Eigen::Index j = 0, k = 0; j < t.values.cols(); ++j) {
            if (j == target) continue;
            raw.features.col(k++) = t.values.col(j);
            raw.feature_names.push_back(t.header[static_cast<std::size_t>(j)]);
        }
        raw.targets = t.values.col(target);
        return raw;
    }

    std::mt19937_64 rng(spec.generator_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto draw = [&](Eigen::Index r, Eigen::Index c) {
        Matrix m(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) m(i, j) = normal(rng);
        return m;
    };
    raw.features = draw(spec.n_samples, spec.n_features);
    if (spec.kind == SyntheticKind::linear) {
        const Matrix w = draw(spec.n_features, spec.output_dim) / std::sqrt(static_cast<double>(spec.n_features));
        raw.targets = raw.features * w;
    } else {
        NetworkSpec teacher;
        teacher.input_dim = spec.n_features;
        teacher.output_dim = spec.output_dim;
        teacher.hidden_widths = {spec.teacher_width};
        const NetworkState net = init_network(teacher, rng());
        const Vector out = forward(net, raw.features);
        raw.targets = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            out.data(), spec.n_samples, spec.output_dim);
    }
    raw.targets += spec.noise_std * draw(spec.n_samples, spec.output_dim);
    for (int j = 0; j < spec.n_features; ++j) raw.feature_names.push_back("x" + std::to_string(j));
    return raw;
}

Dataset prepare_dataset(const RawData& raw, const DatasetSpec& spec, std::uint64_t seed) {
    spec.validate();
    const int available = static_cast<int>(raw.features.rows());
    const int n = spec.subsample == 0 ? available : spec.subsample;
    if (n > available)
        throw DataError("subsample " + std::to_string(n) + " exceeds the " + std::to_string(available) +
                        " available rows");
    const int n_train = train_size(n, spec.split_train_fraction);
    if (n_train < 1 || n_train >= n) throw DataError("split leaves an empty training or validation set");

    std::vector<int> order(static_cast<std::size_t>(available));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(static_cast<std::size_t>(n));

    Matrix x(n, raw.features.cols());
    Matrix t(n, raw.targets.cols());
    for (int i = 0; i < n; ++i) {
        x.row(i) = raw.features.row(order[static_cast<std::size_t>(i)]);
        t.row(i) = raw.targets.row(order[static_cast<std::size_t>(i)]);
    }
    if (spec.normalize) {
        zscore_columns(x);
        zscore_columns(t);
    }

    std::vector<int> train_local(static_cast<std::size_t>(n_train));
    std::vector<int> val_local(static_cast<std::size_t>(n - n_train));
    std::iota(train_local.begin(), train_local.end(), 0);
    std::iota(val_local.begin(), val_local.end(), n_train);

    Dataset d;
    d.train = make_batch(x, t, train_local);
    d.validation = make_batch(x, t, val_local);
    d.train_rows.assign(order.begin(), order.begin() + n_train);
    d.validation_rows.assign(order.begin() + n_train, order.end());
    d.feature_names = raw.feature_names;
    d.output_dim = static_cast<int>(raw.targets.cols());
    return d;
}

Dataset load_dataset(const DatasetSpec& spec, std::uint64_t seed) { return prepare_dataset(load_raw(spec), spec, seed); }

} // namespace cdt

#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "cdt/network.hpp"

namespace cdt {

enum class DataSource { csv, synthetic };
enum class SyntheticKind { linear, teacher };

std::string_view to_string(DataSource s);
std::string_view to_string(SyntheticKind k);
DataSource parse_data_source(std::string_view name);
SyntheticKind parse_synthetic_kind(std::string_view name);

struct DatasetSpec {
    DataSource source = DataSource::synthetic;

    // csv source
    std::string csv_path;
    std::string target_column;

    // synthetic source
    SyntheticKind kind = SyntheticKind::teacher;
    int n_samples = 128;
    int n_features = 8;
    int output_dim = 1;
    int teacher_width = 32;
    double noise_std = 0.1;
    std::uint64_t generator_seed = 0;

    /// Rows drawn without replacement per run; 0 keeps every row.
    int subsample = 0;
    bool normalize = true;
    double split_train_fraction = 0.7;

    void validate() const;
};

/// Parsed numeric table with a header row.
struct Table {
    std::vector<std::string> header;
    Matrix values;

    /// Index of a named column, or -1.
    int column(std::string_view name) const;
};

/// Comma-delimited, header first, every cell numeric. Errors name the row
/// (1-based, header is row 1) and column.
Table parse_csv(std::istream& in, std::string_view source_name = "<stream>");
Table read_csv(const std::string& path);

/// floor(fraction * n)
int train_size(int n, double fraction);

struct Dataset {
    Batch train;
    Batch validation;
    /// Source row of each train / validation sample.
    std::vector<int> train_rows;
    std::vector<int> validation_rows;
    std::vector<std::string> feature_names;
    int output_dim = 1;
};

/// Full source table (features | targets) before subsampling.
struct RawData {
    Matrix features;
    Matrix targets; // rows x n_L
    std::vector<std::string> feature_names;
};

RawData load_raw(const DatasetSpec& spec);

/// Subsample (seeded shuffle), z-score over the subsample, split into
/// floor(fraction * N) training rows and the remainder for validation.
Dataset prepare_dataset(const RawData& raw, const DatasetSpec& spec, std::uint64_t seed);
Dataset load_dataset(const DatasetSpec& spec, std::uint64_t seed);

} // namespace cdt

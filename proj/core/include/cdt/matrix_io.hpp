#pragma once

#include <ostream>
#include <string>

#include "cdt/network.hpp"

namespace cdt {

/// Dense row-major CSV, one matrix row per line, no header, %.17g cells.
void write_matrix_csv(std::ostream& out, const Matrix& m);
void write_matrix_csv(const std::string& path, const Matrix& m);

/// Inverse of write_matrix_csv. Throws DataError on ragged or non-numeric input.
Matrix read_matrix_csv(const std::string& path);

/// Shortest-safe round-trip text for one double ("inf", "-inf", "nan" for non-finite).
std::string format_double(double v);

} // namespace cdt

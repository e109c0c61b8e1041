#include "cdt/matrix_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cdt/dataset.hpp"
#include "cdt/errors.hpp"

namespace cdt {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

void write_matrix_csv(const std::string& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    write_matrix_csv(out, m);
    if (!out) throw DataError("write failed for '" + path + "'");
}

Matrix read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    // Reuse the table parser with a synthetic header so errors carry positions.
    std::string first;
    if (!std::getline(in, first)) return Matrix(0, 0);
    const auto cols = 1 + static_cast<int>(std::count(first.begin(), first.end(), ','));
    std::stringstream buf;
    for (int j = 0; j < cols; ++j) buf << (j ? ",c" : "c") << j;
    buf << '\n' << first << '\n' << in.rdbuf();
    return parse_csv(buf, path).values;
}

} // namespace cdt

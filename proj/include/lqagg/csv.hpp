#ifndef LQAGG_CSV_HPP
#define LQAGG_CSV_HPP

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "lqagg/errors.hpp"

namespace lqagg::csv {

// Locale-independent numeric parsing: '.' decimal point, no grouping.
inline std::optional<double> parse_double(std::string_view token) {
    // trim ascii whitespace
    while (!token.empty() && (token.front() == ' ' || token.front() == '\t' || token.front() == '\r'))
        token.remove_prefix(1);
    while (!token.empty() && (token.back() == ' ' || token.back() == '\t' || token.back() == '\r'))
        token.remove_suffix(1);
    if (token.empty()) return std::nullopt;
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) return std::nullopt;
    return value;
}

// Shortest round-trip decimal rendering, locale independent.
inline std::string format_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc{}) throw experiment_error("format_double failed");
    return std::string(buf, ptr);
}

inline std::vector<std::string_view> split_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

// Row-major numeric matrix. An optional single header row (any unparseable
// token in the first line) is skipped; everything after must be numeric.
inline Eigen::MatrixXd read_matrix(std::istream& in, const std::string& origin = "<stream>") {
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first_line = true;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto tokens = split_line(line);
        std::vector<double> row;
        row.reserve(tokens.size());
        bool ok = true;
        for (auto tok : tokens) {
            auto v = parse_double(tok);
            if (!v) { ok = false; break; }
            row.push_back(*v);
        }
        if (!ok) {
            if (first_line) { first_line = false; continue; } // header row
            throw validation_error(origin + ": non-numeric value in CSV body");
        }
        first_line = false;
        if (rows.empty()) width = row.size();
        else if (row.size() != width)
            throw validation_error(origin + ": ragged CSV rows");
        rows.push_back(std::move(row));
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

inline Eigen::MatrixXd read_matrix_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open CSV file: " + path);
    return read_matrix(in, path);
}

// A vector is a one-column or one-row matrix.
inline Eigen::VectorXd read_vector_file(const std::string& path) {
    Eigen::MatrixXd m = read_matrix_file(path);
    if (m.cols() == 1) return m.col(0);
    if (m.rows() == 1) return m.row(0).transpose();
    throw validation_error(path + ": expected a one-column or one-row CSV vector");
}

inline void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

} // namespace lqagg::csv

#endif

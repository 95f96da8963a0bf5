#pragma once

#include <Eigen/Dense>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdsb {

/// An empirical endpoint measure: n samples of dimension d, one per row.
struct PointCloud {
    Eigen::MatrixXd points;  // n x d

    Eigen::Index size() const { return points.rows(); }
    Eigen::Index dim() const { return points.cols(); }

    bool all_finite() const { return points.allFinite(); }
};

inline PointCloud make_cloud(Eigen::MatrixXd pts) { return PointCloud{std::move(pts)}; }

/// Writes one sample per line, comma separated, 17 significant digits
/// (lossless round trip for 64-bit floats).
inline void save_csv(const PointCloud& cloud, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_csv: cannot open for writing: " + path);
    }
    char buf[64];
    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
        for (Eigen::Index j = 0; j < cloud.dim(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", cloud.points(i, j));
            if (j > 0) out << ',';
            out << buf;
        }
        out << '\n';
    }
    if (!out) {
        throw std::runtime_error("save_csv: write failed: " + path);
    }
}

inline PointCloud load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_csv: cannot open file: " + path);
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    Eigen::Index d = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t start = 0;
        while (true) {
            std::size_t comma = line.find(',', start);
            std::string token = line.substr(
                start, comma == std::string::npos ? std::string::npos : comma - start);
            const char* begin = token.c_str();
            char* end = nullptr;
            errno = 0;
            double value = std::strtod(begin, &end);
            while (end && *end == ' ') ++end;
            if (end == begin || (end && *end != '\0')) {
                throw std::runtime_error("load_csv: non-numeric token '" + token +
                                         "' at line " + std::to_string(lineno) + " of " + path);
            }
            row.push_back(value);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (d < 0) {
            d = static_cast<Eigen::Index>(row.size());
        } else if (static_cast<Eigen::Index>(row.size()) != d) {
            throw std::runtime_error("load_csv: ragged row at line " + std::to_string(lineno) +
                                     " of " + path + ": expected " + std::to_string(d) +
                                     " fields, got " + std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (d < 1) {
        throw std::runtime_error("load_csv: no data in " + path + " (dimension must be >= 1)");
    }
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(rows.size()), d);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            pts(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    return PointCloud{std::move(pts)};
}

}  // namespace qdsb

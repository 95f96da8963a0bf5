#pragma once

#include "qdsb/point_cloud.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace qdsb {

struct MmdSpec {
    double bandwidth = 1.0;
    Eigen::Index reference_size = 4096;
};

/// Median of all pairwise Euclidean distances among the first
/// min(cap, n) reference points; the lower-middle element for even counts.
inline double median_bandwidth(const PointCloud& reference, Eigen::Index cap = 4096) {
    const Eigen::Index m = std::min(cap, reference.size());
    if (m < 2) {
        throw std::invalid_argument("median_bandwidth: need at least 2 reference points");
    }
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = i + 1; j < m; ++j) {
            dists.push_back((reference.points.row(i) - reference.points.row(j)).norm());
        }
    }
    const std::size_t mid = (dists.size() - 1) / 2;
    std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid), dists.end());
    const double h = dists[mid];
    if (!(h > 0.0)) {
        throw std::invalid_argument("median_bandwidth: reference points must not all coincide");
    }
    return h;
}

namespace detail {

// Orders two matrices by shape then column-major data scan; used to give
// the cross-kernel sum a fixed orientation so mmd is exactly symmetric.
inline bool lex_before(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    if (A.rows() != B.rows()) return A.rows() < B.rows();
    if (A.cols() != B.cols()) return A.cols() < B.cols();
    for (Eigen::Index i = 0; i < A.size(); ++i) {
        if (A(i) != B(i)) return A(i) < B(i);
    }
    return true;
}

}  // namespace detail

/// Biased (V-statistic) MMD with kernel exp(-||x-y||^2 / (2 h^2)):
///   MMD^2 = mean_XX k + mean_YY k - 2 mean_XY k,
/// returned as sqrt(max(0, MMD^2)). Kernel sums run blockwise in a fixed
/// order, with the cross term canonically oriented so that swapping the
/// arguments reproduces the value bit for bit.
inline double mmd(const PointCloud& X, const PointCloud& Y, double h) {
    if (X.size() == 0 || Y.size() == 0) throw std::invalid_argument("mmd: empty input");
    if (X.dim() != Y.dim()) throw std::invalid_argument("mmd: dimension mismatch");
    if (!(h > 0.0)) throw std::invalid_argument("mmd: bandwidth must be positive");

    const double gamma = 1.0 / (2.0 * h * h);
    const auto mean_kernel = [gamma](const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
        const Eigen::Index block = 512;
        const Eigen::VectorXd b_sq = B.rowwise().squaredNorm();
        double total = 0.0;
        for (Eigen::Index start = 0; start < A.rows(); start += block) {
            const Eigen::Index rows = std::min(block, A.rows() - start);
            const auto chunk = A.middleRows(start, rows);
            Eigen::MatrixXd sq = (-2.0 * chunk * B.transpose());
            sq.colwise() += chunk.rowwise().squaredNorm();
            sq.rowwise() += b_sq.transpose();
            total += (sq.array().max(0.0) * -gamma).exp().sum();
        }
        return total / (static_cast<double>(A.rows()) * static_cast<double>(B.rows()));
    };

    const double cross = detail::lex_before(X.points, Y.points)
                             ? mean_kernel(X.points, Y.points)
                             : mean_kernel(Y.points, X.points);
    const double mmd_sq =
        mean_kernel(X.points, X.points) + mean_kernel(Y.points, Y.points) - 2.0 * cross;
    return std::sqrt(std::max(0.0, mmd_sq));
}

}  // namespace qdsb

#pragma once

#include "qdsb/point_cloud.hpp"
#include "qdsb/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>
#include <unordered_set>
#include <vector>

namespace qdsb {

/// Anchor-quantized representation of a point cloud: k anchors chosen among
/// the samples, nearest-anchor assignment, per-anchor cells, cell masses
/// |cell|/n, the coverage radius (max distance to assigned anchor) and the
/// quantization error ((mean distance^a)^(1/a) for the stored exponent).
struct AnchorQuantization {
    std::vector<Eigen::Index> anchor_indices;   // k indices into the source cloud
    Eigen::MatrixXd anchors;                    // k x d, rows of the cloud
    std::vector<Eigen::Index> assignment;       // size n, sample -> anchor slot
    std::vector<std::vector<Eigen::Index>> cells;  // per slot, member sample indices
    Eigen::VectorXd masses;                     // |cells[slot]| / n
    double coverage_radius = 0.0;
    double quant_error = 0.0;
    double exponent = 2.0;

    Eigen::Index num_anchors() const { return static_cast<Eigen::Index>(anchor_indices.size()); }
};

/// Greedy k-center traversal starting from a forced initial sample. Each
/// subsequent anchor maximizes the distance to the already-chosen set; ties
/// break toward the lowest sample index.
inline std::vector<Eigen::Index> farthest_first_from(const PointCloud& cloud, Eigen::Index k,
                                                     Eigen::Index init_index) {
    const Eigen::Index n = cloud.size();
    if (k < 1 || k > n) {
        throw std::invalid_argument("farthest_first: k must satisfy 1 <= k <= n, got k=" +
                                    std::to_string(k) + ", n=" + std::to_string(n));
    }
    if (init_index < 0 || init_index >= n) {
        throw std::invalid_argument("farthest_first: initial index out of range");
    }
    std::vector<Eigen::Index> chosen;
    chosen.reserve(static_cast<std::size_t>(k));
    chosen.push_back(init_index);
    Eigen::VectorXd min_sq =
        (cloud.points.rowwise() - cloud.points.row(init_index)).rowwise().squaredNorm();
    while (static_cast<Eigen::Index>(chosen.size()) < k) {
        Eigen::Index best = 0;
        double best_sq = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (min_sq(i) > best_sq) {
                best_sq = min_sq(i);
                best = i;
            }
        }
        chosen.push_back(best);
        Eigen::VectorXd sq =
            (cloud.points.rowwise() - cloud.points.row(best)).rowwise().squaredNorm();
        min_sq = min_sq.cwiseMin(sq);
    }
    return chosen;
}

/// Farthest-first traversal with a seeded uniform initial anchor.
inline std::vector<Eigen::Index> farthest_first(const PointCloud& cloud, Eigen::Index k,
                                                std::uint64_t seed) {
    const Eigen::Index n = cloud.size();
    if (k < 1 || k > n) {
        throw std::invalid_argument("farthest_first: k must satisfy 1 <= k <= n, got k=" +
                                    std::to_string(k) + ", n=" + std::to_string(n));
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    return farthest_first_from(cloud, k, pick(rng));
}

/// Nearest-anchor assignment (lowest slot wins ties) and the derived cells,
/// masses, coverage radius and quantization error for exponent a.
inline AnchorQuantization assign_cells(const PointCloud& cloud,
                                       const std::vector<Eigen::Index>& anchor_indices,
                                       double a = 2.0) {
    const Eigen::Index n = cloud.size();
    const Eigen::Index k = static_cast<Eigen::Index>(anchor_indices.size());
    if (k < 1) throw std::invalid_argument("assign_cells: need at least one anchor");
    if (!(a >= 1.0)) throw std::invalid_argument("assign_cells: exponent must be >= 1");
    {
        std::unordered_set<Eigen::Index> seen;
        for (Eigen::Index idx : anchor_indices) {
            if (idx < 0 || idx >= n) {
                throw std::invalid_argument("assign_cells: anchor index out of range");
            }
            if (!seen.insert(idx).second) {
                throw std::invalid_argument("assign_cells: duplicate anchor index " +
                                            std::to_string(idx));
            }
        }
    }

    AnchorQuantization q;
    q.anchor_indices = anchor_indices;
    q.anchors.resize(k, cloud.dim());
    for (Eigen::Index s = 0; s < k; ++s) {
        q.anchors.row(s) = cloud.points.row(anchor_indices[static_cast<std::size_t>(s)]);
    }
    q.exponent = a;

    Eigen::VectorXd best_sq = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    std::vector<Eigen::Index> slot(static_cast<std::size_t>(n), 0);
    for (Eigen::Index s = 0; s < k; ++s) {
        Eigen::VectorXd sq = (cloud.points.rowwise() - q.anchors.row(s)).rowwise().squaredNorm();
        for (Eigen::Index i = 0; i < n; ++i) {
            if (sq(i) < best_sq(i)) {
                best_sq(i) = sq(i);
                slot[static_cast<std::size_t>(i)] = s;
            }
        }
    }

    q.assignment = std::move(slot);
    q.cells.assign(static_cast<std::size_t>(k), {});
    for (Eigen::Index i = 0; i < n; ++i) {
        q.cells[static_cast<std::size_t>(q.assignment[static_cast<std::size_t>(i)])].push_back(i);
    }
    q.masses.resize(k);
    for (Eigen::Index s = 0; s < k; ++s) {
        q.masses(s) = static_cast<double>(q.cells[static_cast<std::size_t>(s)].size()) /
                      static_cast<double>(n);
    }

    q.coverage_radius = n > 0 ? std::sqrt(best_sq.maxCoeff()) : 0.0;
    if (n > 0) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            acc += std::pow(std::sqrt(best_sq(i)), a);
        }
        q.quant_error = std::pow(acc / static_cast<double>(n), 1.0 / a);
    }
    return q;
}

/// Max over samples of the distance to the closest anchor.
inline double coverage_radius_of(const PointCloud& cloud,
                                 const std::vector<Eigen::Index>& anchor_indices) {
    if (anchor_indices.empty()) {
        throw std::invalid_argument("coverage_radius_of: empty anchor set");
    }
    const Eigen::Index n = cloud.size();
    Eigen::VectorXd best_sq = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    for (Eigen::Index idx : anchor_indices) {
        if (idx < 0 || idx >= n) {
            throw std::invalid_argument("coverage_radius_of: anchor index out of range");
        }
        Eigen::VectorXd sq =
            (cloud.points.rowwise() - cloud.points.row(idx)).rowwise().squaredNorm();
        best_sq = best_sq.cwiseMin(sq);
    }
    return n > 0 ? std::sqrt(best_sq.maxCoeff()) : 0.0;
}

/// Quantization error for any exponent, a = inf giving the max distance.
inline double quantization_error(const PointCloud& cloud, const AnchorQuantization& quant,
                                 double a) {
    const Eigen::Index n = cloud.size();
    if (n == 0) return 0.0;
    double max_dist = 0.0;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index s = quant.assignment[static_cast<std::size_t>(i)];
        const double dist = (cloud.points.row(i) - quant.anchors.row(s)).norm();
        max_dist = std::max(max_dist, dist);
        if (std::isfinite(a)) acc += std::pow(dist, a);
    }
    if (!std::isfinite(a)) return max_dist;
    return std::pow(acc / static_cast<double>(n), 1.0 / a);
}

/// Lines "sample_index<TAB>anchor_slot".
inline void save_assignment_tsv(const AnchorQuantization& quant, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_assignment_tsv: cannot open " + path);
    for (std::size_t i = 0; i < quant.assignment.size(); ++i) {
        out << i << '\t' << quant.assignment[i] << '\n';
    }
}

}  // namespace qdsb

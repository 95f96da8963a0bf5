#pragma once

#include "qdsb/anchors.hpp"
#include "qdsb/point_cloud.hpp"
#include "qdsb/rng.hpp"
#include "qdsb/transport.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>
#include <vector>

namespace qdsb {

/// A batch of endpoint pairs; row i of x0 is paired with row i of x1.
/// idx0/idx1 record which original samples were drawn.
struct PairBatch {
    Eigen::MatrixXd x0;
    Eigen::MatrixXd x1;
    std::vector<Eigen::Index> idx0;
    std::vector<Eigen::Index> idx1;

    Eigen::Index size() const { return x0.rows(); }
};

/// Endpoint-pair sampler realizing the lifted coupling: draw an anchor pair
/// from the plan, then uniform members of the two matched cells. Immutable
/// after construction.
struct CouplingSampler {
    PointCloud cloud0;
    PointCloud cloud1;
    AnchorQuantization quant0;
    AnchorQuantization quant1;
    TransportPlan plan;
    std::vector<double> cdf;  // flattened row-major over plan entries
};

/// Builds the sampler for the anchor-level plan. The plan marginals must
/// match the cell masses of the two quantizations.
inline CouplingSampler build_anchor_coupling(PointCloud cloud0, AnchorQuantization quant0,
                                             PointCloud cloud1, AnchorQuantization quant1,
                                             TransportPlan plan) {
    const Eigen::Index k0 = quant0.num_anchors();
    const Eigen::Index k1 = quant1.num_anchors();
    if (plan.plan.rows() != k0 || plan.plan.cols() != k1) {
        throw std::invalid_argument("build_anchor_coupling: plan shape does not match anchors");
    }
    const double row_err = (plan.plan.rowwise().sum() - quant0.masses).cwiseAbs().sum();
    const double col_err =
        (plan.plan.colwise().sum().transpose() - quant1.masses).cwiseAbs().sum();
    if (row_err > 1e-8 || col_err > 1e-8) {
        throw std::invalid_argument("build_anchor_coupling: plan marginals do not match cell "
                                    "masses (L1 errors " +
                                    std::to_string(row_err) + ", " + std::to_string(col_err) + ")");
    }
    CouplingSampler s;
    s.cdf.resize(static_cast<std::size_t>(k0 * k1));
    double acc = 0.0;
    std::size_t pos = 0;
    for (Eigen::Index i = 0; i < k0; ++i) {
        for (Eigen::Index j = 0; j < k1; ++j) {
            acc += plan.plan(i, j);
            s.cdf[pos++] = acc;
        }
    }
    s.cloud0 = std::move(cloud0);
    s.cloud1 = std::move(cloud1);
    s.quant0 = std::move(quant0);
    s.quant1 = std::move(quant1);
    s.plan = std::move(plan);
    return s;
}

/// Draws m endpoint pairs from the lifted coupling. Per draw: inverse-CDF
/// over plan entries, then one uniform member of each matched cell.
inline PairBatch sample_pairs(const CouplingSampler& sampler, Eigen::Index m,
                              std::mt19937_64& rng) {
    if (m < 0) throw std::invalid_argument("sample_pairs: m must be >= 0");
    const Eigen::Index k1 = sampler.quant1.num_anchors();
    PairBatch batch;
    batch.x0.resize(m, sampler.cloud0.dim());
    batch.x1.resize(m, sampler.cloud1.dim());
    batch.idx0.resize(static_cast<std::size_t>(m));
    batch.idx1.resize(static_cast<std::size_t>(m));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Eigen::Index r = 0; r < m; ++r) {
        const double u = unit(rng);
        auto it = std::lower_bound(sampler.cdf.begin(), sampler.cdf.end(), u);
        std::size_t flat = static_cast<std::size_t>(it - sampler.cdf.begin());
        if (flat >= sampler.cdf.size()) flat = sampler.cdf.size() - 1;
        const auto alpha = static_cast<Eigen::Index>(flat) / k1;
        const auto beta = static_cast<Eigen::Index>(flat) % k1;
        const auto& cell0 = sampler.quant0.cells[static_cast<std::size_t>(alpha)];
        const auto& cell1 = sampler.quant1.cells[static_cast<std::size_t>(beta)];
        std::uniform_int_distribution<std::size_t> pick0(0, cell0.size() - 1);
        std::uniform_int_distribution<std::size_t> pick1(0, cell1.size() - 1);
        const Eigen::Index i = cell0[pick0(rng)];
        const Eigen::Index j = cell1[pick1(rng)];
        batch.idx0[static_cast<std::size_t>(r)] = i;
        batch.idx1[static_cast<std::size_t>(r)] = j;
        batch.x0.row(r) = sampler.cloud0.points.row(i);
        batch.x1.row(r) = sampler.cloud1.points.row(j);
    }
    return batch;
}

inline PairBatch sample_pairs(const CouplingSampler& sampler, Eigen::Index m,
                              std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sample_pairs(sampler, m, rng);
}

enum class MinibatchMode { exact, entropic };

/// Pairs two equal-size batches through an OT plan solved on the batch:
/// exact mode matches via the optimal permutation, entropic mode samples B
/// pairs from the Sinkhorn plan with uniform batch marginals.
inline PairBatch minibatch_ot_pairs(const Eigen::MatrixXd& batch0, const Eigen::MatrixXd& batch1,
                                    MinibatchMode mode, double tau, CostKind kind,
                                    std::mt19937_64& rng) {
    if (batch0.rows() != batch1.rows()) {
        throw std::invalid_argument("minibatch_ot_pairs: batch sizes differ");
    }
    if (batch0.rows() < 1) throw std::invalid_argument("minibatch_ot_pairs: empty batch");
    const Eigen::Index B = batch0.rows();
    PairBatch out;
    out.x0 = batch0;
    out.x1.resize(B, batch1.cols());
    out.idx0.resize(static_cast<std::size_t>(B));
    out.idx1.resize(static_cast<std::size_t>(B));
    for (Eigen::Index i = 0; i < B; ++i) out.idx0[static_cast<std::size_t>(i)] = i;

    if (mode == MinibatchMode::exact) {
        const Eigen::MatrixXd C = cost_matrix(batch0, batch1, kind);
        const std::vector<Eigen::Index> sigma = min_cost_assignment(C);
        for (Eigen::Index i = 0; i < B; ++i) {
            out.idx1[static_cast<std::size_t>(i)] = sigma[static_cast<std::size_t>(i)];
            out.x1.row(i) = batch1.row(sigma[static_cast<std::size_t>(i)]);
        }
        return out;
    }

    const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(B, 1.0 / static_cast<double>(B));
    const TransportPlan plan = sinkhorn(cost_matrix(batch0, batch1, kind), uniform, uniform, tau);
    std::vector<double> cdf(static_cast<std::size_t>(B * B));
    double acc = 0.0;
    std::size_t pos = 0;
    for (Eigen::Index i = 0; i < B; ++i) {
        for (Eigen::Index j = 0; j < B; ++j) {
            acc += plan.plan(i, j);
            cdf[pos++] = acc;
        }
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Eigen::Index r = 0; r < B; ++r) {
        const double u = unit(rng);
        auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        std::size_t flat = static_cast<std::size_t>(it - cdf.begin());
        if (flat >= cdf.size()) flat = cdf.size() - 1;
        const auto i = static_cast<Eigen::Index>(flat) / B;
        const auto j = static_cast<Eigen::Index>(flat) % B;
        out.idx0[static_cast<std::size_t>(r)] = i;
        out.idx1[static_cast<std::size_t>(r)] = j;
        out.x0.row(r) = batch0.row(i);
        out.x1.row(r) = batch1.row(j);
    }
    return out;
}

inline PairBatch minibatch_ot_pairs(const Eigen::MatrixXd& batch0, const Eigen::MatrixXd& batch1,
                                    MinibatchMode mode, double tau, CostKind kind,
                                    std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return minibatch_ot_pairs(batch0, batch1, mode, tau, kind, rng);
}

/// m pairs with independently drawn uniform indices on each side.
inline PairBatch independent_pairs(const Eigen::MatrixXd& batch0, const Eigen::MatrixXd& batch1,
                                   Eigen::Index m, std::mt19937_64& rng) {
    if (batch0.rows() < 1 || batch1.rows() < 1) {
        throw std::invalid_argument("independent_pairs: empty batch");
    }
    if (m < 0) throw std::invalid_argument("independent_pairs: m must be >= 0");
    PairBatch out;
    out.x0.resize(m, batch0.cols());
    out.x1.resize(m, batch1.cols());
    out.idx0.resize(static_cast<std::size_t>(m));
    out.idx1.resize(static_cast<std::size_t>(m));
    std::uniform_int_distribution<Eigen::Index> pick0(0, batch0.rows() - 1);
    std::uniform_int_distribution<Eigen::Index> pick1(0, batch1.rows() - 1);
    for (Eigen::Index r = 0; r < m; ++r) {
        const Eigen::Index i = pick0(rng);
        const Eigen::Index j = pick1(rng);
        out.idx0[static_cast<std::size_t>(r)] = i;
        out.idx1[static_cast<std::size_t>(r)] = j;
        out.x0.row(r) = batch0.row(i);
        out.x1.row(r) = batch1.row(j);
    }
    return out;
}

inline PairBatch independent_pairs(const Eigen::MatrixXd& batch0, const Eigen::MatrixXd& batch1,
                                   Eigen::Index m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return independent_pairs(batch0, batch1, m, rng);
}

}  // namespace qdsb

#pragma once

#include "qdsb/anchors.hpp"
#include "qdsb/point_cloud.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdsb {

enum class CostKind { euclidean, sqeuclidean };

inline const char* to_string(CostKind kind) {
    return kind == CostKind::euclidean ? "euclidean" : "sqeuclidean";
}

/// Pairwise transport costs between the rows of A0 and A1.
inline Eigen::MatrixXd cost_matrix(const Eigen::MatrixXd& A0, const Eigen::MatrixXd& A1,
                                   CostKind kind) {
    if (A0.cols() != A1.cols()) {
        throw std::invalid_argument("cost_matrix: dimension mismatch (" +
                                    std::to_string(A0.cols()) + " vs " +
                                    std::to_string(A1.cols()) + ")");
    }
    Eigen::MatrixXd C(A0.rows(), A1.rows());
    for (Eigen::Index j = 0; j < A1.rows(); ++j) {
        C.col(j) = (A0.rowwise() - A1.row(j)).rowwise().squaredNorm();
    }
    if (kind == CostKind::euclidean) C = C.cwiseSqrt();
    return C;
}

/// A coupling between two discrete measures with prescribed marginals.
/// entropic_value is cost_value + tau * KL(plan || mu (x) nu); tau == 0 marks
/// an unregularized plan, for which entropic_value equals cost_value.
struct TransportPlan {
    Eigen::MatrixXd plan;  // k0 x k1, nonnegative, sums to 1
    Eigen::VectorXd mu;    // row marginal
    Eigen::VectorXd nu;    // column marginal
    double tau = 0.0;
    double cost_value = 0.0;
    double entropic_value = 0.0;
    bool converged = true;
    int iterations = 0;
};

inline double kl_to_product(const Eigen::MatrixXd& plan, const Eigen::VectorXd& mu,
                            const Eigen::VectorXd& nu) {
    double kl = 0.0;
    for (Eigen::Index i = 0; i < plan.rows(); ++i) {
        for (Eigen::Index j = 0; j < plan.cols(); ++j) {
            const double p = plan(i, j);
            if (p > 0.0) kl += p * (std::log(p) - std::log(mu(i)) - std::log(nu(j)));
        }
    }
    return kl;
}

struct SinkhornOptions {
    double tol = 1e-9;   // L1 marginal violation threshold
    int max_iter = 10000;
    // Over-relaxation factor in [1, 2). 1 is the plain iteration; larger
    // values accelerate the slow-mixing instances that arise at small tau.
    // A safeguard drops back to 1 if the violation blows up.
    double omega = 1.0;
};

namespace detail {

// Rounds a positive matrix onto the transport polytope with marginals
// (mu, nu): cap row scalings at 1, cap column scalings at 1, then add the
// rank-one residual. Marginals come out exact up to summation error.
inline void round_to_marginals(Eigen::MatrixXd& P, const Eigen::VectorXd& mu,
                               const Eigen::VectorXd& nu) {
    Eigen::VectorXd row = P.rowwise().sum();
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        const double scale = row(i) > 0.0 ? std::min(1.0, mu(i) / row(i)) : 1.0;
        P.row(i) *= scale;
    }
    Eigen::VectorXd col = P.colwise().sum();
    for (Eigen::Index j = 0; j < P.cols(); ++j) {
        const double scale = col(j) > 0.0 ? std::min(1.0, nu(j) / col(j)) : 1.0;
        P.col(j) *= scale;
    }
    Eigen::VectorXd err_r = (mu - P.rowwise().sum()).cwiseMax(0.0);
    Eigen::VectorXd err_c = (nu - P.colwise().sum().transpose()).cwiseMax(0.0);
    const double total = err_r.sum();
    if (total > 0.0) {
        P.noalias() += err_r * (err_c.transpose() / total);
    }
}

}  // namespace detail

/// Log-domain Sinkhorn for the entropic OT problem
///   min_pi <C, pi> + tau * KL(pi || mu (x) nu)
/// over couplings of (mu, nu). Potentials start at zero; iterations stop when
/// the L1 marginal violation drops below tol or after max_iter sweeps (the
/// returned plan then carries converged = false). The plan is rounded onto
/// the transport polytope so downstream samplers see exact marginals.
inline TransportPlan sinkhorn(const Eigen::MatrixXd& C, const Eigen::VectorXd& mu,
                              const Eigen::VectorXd& nu, double tau,
                              const SinkhornOptions& opt = {}) {
    const Eigen::Index k0 = C.rows();
    const Eigen::Index k1 = C.cols();
    if (mu.size() != k0 || nu.size() != k1) {
        throw std::invalid_argument("sinkhorn: marginal sizes do not match the cost matrix");
    }
    if (!(tau > 0.0)) throw std::invalid_argument("sinkhorn: tau must be positive");
    if ((mu.array() <= 0.0).any() || (nu.array() <= 0.0).any()) {
        throw std::invalid_argument("sinkhorn: marginals must be strictly positive");
    }
    if (std::abs(mu.sum() - 1.0) > 1e-10 || std::abs(nu.sum() - 1.0) > 1e-10) {
        throw std::invalid_argument("sinkhorn: marginals must sum to 1 within 1e-10");
    }

    const Eigen::ArrayXd log_mu = mu.array().log();
    const Eigen::ArrayXd log_nu = nu.array().log();
    // Work with potentials scaled by 1/tau; both cost orientations are kept
    // so each projection reads contiguous columns.
    const Eigen::MatrixXd C_div = C / tau;
    const Eigen::MatrixXd Ct_div = C_div.transpose();
    Eigen::ArrayXd phi = Eigen::ArrayXd::Zero(k0);  // f / tau
    Eigen::ArrayXd psi = Eigen::ArrayXd::Zero(k1);  // g / tau

    Eigen::ArrayXd work0(k0), work1(k1);
    const auto project_rows = [&](Eigen::ArrayXd& out) {
        for (Eigen::Index i = 0; i < k0; ++i) {
            work1 = psi - Ct_div.col(i).array() + log_nu;
            const double m = work1.maxCoeff();
            out(i) = -(m + std::log((work1 - m).exp().sum()));
        }
    };
    const auto project_cols = [&](Eigen::ArrayXd& out) {
        for (Eigen::Index j = 0; j < k1; ++j) {
            work0 = phi - C_div.col(j).array() + log_mu;
            const double m = work0.maxCoeff();
            out(j) = -(m + std::log((work0 - m).exp().sum()));
        }
    };

    TransportPlan result;
    result.mu = mu;
    result.nu = nu;
    result.tau = tau;
    result.converged = false;

    double omega = std::clamp(opt.omega, 1.0, 1.99);
    double best_violation = std::numeric_limits<double>::infinity();
    int last_progress = 0;
    Eigen::ArrayXd phi_hat(k0), psi_hat(k1);
    project_rows(phi);  // rows exact
    int iter = 0;
    for (; iter < opt.max_iter; ++iter) {
        project_cols(psi_hat);
        psi = omega * psi_hat + (1.0 - omega) * psi;
        project_rows(phi_hat);
        // Row sums of the current plan are mu_i * exp(phi_i - phi_hat_i).
        const double violation = (mu.array() * (phi - phi_hat).exp() - mu.array()).abs().sum();
        phi = omega * phi_hat + (1.0 - omega) * phi;
        if (violation < opt.tol) {
            result.converged = true;
            ++iter;
            break;
        }
        if (violation < best_violation * (1.0 - 1e-3)) {
            best_violation = violation;
            last_progress = iter;
        } else if (omega > 1.0 &&
                   (violation > 100.0 * best_violation || iter - last_progress > 500)) {
            // Over-relaxation can blow up or settle into a limit cycle on
            // near-deterministic instances; the plain iteration always
            // contracts, so fall back for the rest of the solve.
            omega = 1.0;
            last_progress = iter;
        }
    }
    result.iterations = iter;

    Eigen::MatrixXd P(k0, k1);
    for (Eigen::Index j = 0; j < k1; ++j) {
        P.col(j) = (phi + psi(j) - C_div.col(j).array() + log_mu + log_nu(j)).exp();
    }
    detail::round_to_marginals(P, mu, nu);

    result.plan = std::move(P);
    result.cost_value = (result.plan.array() * C.array()).sum();
    result.entropic_value = result.cost_value + tau * kl_to_product(result.plan, mu, nu);
    return result;
}

/// Minimum-cost perfect matching via shortest augmenting paths with
/// potentials, O(n^3). Returns row -> column.
inline std::vector<Eigen::Index> min_cost_assignment(const Eigen::MatrixXd& cost) {
    const Eigen::Index n = cost.rows();
    if (cost.cols() != n) throw std::invalid_argument("min_cost_assignment: matrix must be square");
    if (n == 0) throw std::invalid_argument("min_cost_assignment: empty problem");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<Eigen::Index> p(static_cast<std::size_t>(n) + 1, 0);
    std::vector<Eigen::Index> way(static_cast<std::size_t>(n) + 1, 0);
    for (Eigen::Index i = 1; i <= n; ++i) {
        p[0] = i;
        Eigen::Index j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const Eigen::Index i0 = p[static_cast<std::size_t>(j0)];
            Eigen::Index j1 = 0;
            double delta = inf;
            for (Eigen::Index j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                                   v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (Eigen::Index j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const Eigen::Index j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<Eigen::Index> row_to_col(static_cast<std::size_t>(n), -1);
    for (Eigen::Index j = 1; j <= n; ++j) {
        const Eigen::Index i = p[static_cast<std::size_t>(j)];
        if (i > 0) row_to_col[static_cast<std::size_t>(i) - 1] = j - 1;
    }
    return row_to_col;
}

/// Exact unregularized OT between two uniform empirical measures of equal
/// size, solved as a minimum-cost assignment. The plan is a permutation
/// matrix scaled by 1/n.
inline TransportPlan exact_assignment_ot(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                         CostKind kind) {
    if (X.rows() != Y.rows()) {
        throw std::invalid_argument("exact_assignment_ot: point sets must have equal size");
    }
    if (X.rows() == 0) throw std::invalid_argument("exact_assignment_ot: empty point sets");
    const Eigen::Index n = X.rows();
    const Eigen::MatrixXd C = cost_matrix(X, Y, kind);
    const std::vector<Eigen::Index> sigma = min_cost_assignment(C);
    TransportPlan result;
    result.plan = Eigen::MatrixXd::Zero(n, n);
    result.mu = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    result.nu = result.mu;
    result.tau = 0.0;
    double cost = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        result.plan(i, sigma[static_cast<std::size_t>(i)]) = 1.0 / static_cast<double>(n);
        cost += C(i, sigma[static_cast<std::size_t>(i)]);
    }
    result.cost_value = cost / static_cast<double>(n);
    result.entropic_value = result.cost_value;
    return result;
}

/// Exact a-Wasserstein distance between a uniform cloud and its anchor
/// quantization, computed by expanding each anchor into |cell| coincident
/// unit atoms and solving the n x n assignment. Supports a in {1, 2}.
inline double wasserstein_via_expansion(const PointCloud& cloud, const AnchorQuantization& quant,
                                        double a = 2.0) {
    const Eigen::Index n = cloud.size();
    if (n == 0) throw std::invalid_argument("wasserstein_via_expansion: empty cloud");
    if (a != 1.0 && a != 2.0) {
        throw std::invalid_argument("wasserstein_via_expansion: exponent must be 1 or 2");
    }
    Eigen::MatrixXd expanded(n, cloud.dim());
    Eigen::Index row = 0;
    for (Eigen::Index s = 0; s < quant.num_anchors(); ++s) {
        const double atoms = quant.masses(s) * static_cast<double>(n);
        const auto count = static_cast<Eigen::Index>(std::llround(atoms));
        if (std::abs(atoms - static_cast<double>(count)) > 1e-9) {
            throw std::logic_error("wasserstein_via_expansion: mass is not a multiple of 1/n");
        }
        for (Eigen::Index c = 0; c < count; ++c) expanded.row(row++) = quant.anchors.row(s);
    }
    const CostKind kind = a == 2.0 ? CostKind::sqeuclidean : CostKind::euclidean;
    const TransportPlan plan = exact_assignment_ot(cloud.points, expanded, kind);
    return a == 2.0 ? std::sqrt(plan.cost_value) : plan.cost_value;
}

/// TSV lines "i<TAB>j<TAB>mass" for entries above 1e-15.
inline void save_plan_tsv(const TransportPlan& plan, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_plan_tsv: cannot open " + path);
    char buf[64];
    for (Eigen::Index i = 0; i < plan.plan.rows(); ++i) {
        for (Eigen::Index j = 0; j < plan.plan.cols(); ++j) {
            if (plan.plan(i, j) > 1e-15) {
                std::snprintf(buf, sizeof(buf), "%.17g", plan.plan(i, j));
                out << i << '\t' << j << '\t' << buf << '\n';
            }
        }
    }
}

}  // namespace qdsb

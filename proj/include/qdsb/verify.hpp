#pragma once

#include "qdsb/anchors.hpp"
#include "qdsb/datasets.hpp"
#include "qdsb/point_cloud.hpp"
#include "qdsb/rng.hpp"
#include "qdsb/transport.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace qdsb {

/// One verified instance; unused fields stay NaN. Every pass flag can be
/// recomputed from the stored values. The theory constants L and C_b are
/// not estimable from data, so only the exponents a and b appear here.
struct StabilityRecord {
    std::string kind;
    Eigen::Index n = 0;
    Eigen::Index k = 0;
    double a = std::numeric_limits<double>::quiet_NaN();
    double b = std::numeric_limits<double>::quiet_NaN();
    double eps0 = std::numeric_limits<double>::quiet_NaN();
    double eps1 = std::numeric_limits<double>::quiet_NaN();
    double delta_a = std::numeric_limits<double>::quiet_NaN();
    double r0 = std::numeric_limits<double>::quiet_NaN();
    double r1 = std::numeric_limits<double>::quiet_NaN();
    double w0 = std::numeric_limits<double>::quiet_NaN();
    double w1 = std::numeric_limits<double>::quiet_NaN();
    double value_full = std::numeric_limits<double>::quiet_NaN();
    double value_quant = std::numeric_limits<double>::quiet_NaN();
    double value_gap = std::numeric_limits<double>::quiet_NaN();
    double ratio = std::numeric_limits<double>::quiet_NaN();
    bool pass = true;
};

struct StabilityReport {
    std::vector<StabilityRecord> records;

    bool all_pass() const {
        for (const auto& r : records)
            if (!r.pass) return false;
        return true;
    }
};

inline void save_report_csv(const StabilityReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_report_csv: cannot open " + path);
    out << "kind,n,k,a,b,eps0,eps1,delta_a,r0,r1,w0,w1,value_full,value_quant,value_gap,ratio,"
           "pass\n";
    char buf[512];
    for (const auto& r : report.records) {
        std::snprintf(buf, sizeof(buf),
                      "%s,%lld,%lld,%g,%g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,"
                      "%.12g,%.12g,%d\n",
                      r.kind.c_str(), static_cast<long long>(r.n), static_cast<long long>(r.k),
                      r.a, r.b, r.eps0, r.eps1, r.delta_a, r.r0, r.r1, r.w0, r.w1, r.value_full,
                      r.value_quant, r.value_gap, r.ratio, r.pass ? 1 : 0);
        out << buf;
    }
}

inline constexpr double kWassersteinTol = 1e-10;  // W_a <= eps_a slack
inline constexpr double kRadiusTol = 1e-12;       // eps <= r and Delta composition slack
inline constexpr double kValueEqualTol = 1e-8;    // value gap at k = n
inline constexpr double kApproxRatioTol = 1e-12;  // greedy/optimal <= 2 slack

/// Theorem bound W_a(q, q~) <= eps_a together with eps_a <= r on one cloud,
/// with the exact expansion oracle. Restricted to the n <= 64 regime where
/// the n x n assignment stays cheap.
inline StabilityRecord check_endpoint_bound(const PointCloud& cloud, Eigen::Index k, double a,
                                            std::uint64_t seed) {
    if (cloud.size() > 64) {
        throw std::invalid_argument("check_endpoint_bound: exact oracle regime is n <= 64");
    }
    const auto idx = farthest_first(cloud, k, seed);
    const AnchorQuantization quant = assign_cells(cloud, idx, a);
    StabilityRecord rec;
    rec.kind = "endpoint_bound";
    rec.n = cloud.size();
    rec.k = k;
    rec.a = a;
    rec.eps0 = quant.quant_error;
    rec.r0 = quant.coverage_radius;
    rec.w0 = wasserstein_via_expansion(cloud, quant, a);
    rec.pass = rec.w0 <= rec.eps0 + kWassersteinTol && rec.eps0 <= rec.r0 + kRadiusTol;
    return rec;
}

/// Endpoint bounds on both marginals of one instance plus the combined
/// scale Delta_a <= (r0^a + r1^a)^(1/a).
inline StabilityRecord check_pair_bounds(const PointCloud& cloud0, const PointCloud& cloud1,
                                         Eigen::Index k0, Eigen::Index k1, double a,
                                         std::uint64_t seed) {
    if (cloud0.size() > 64 || cloud1.size() > 64) {
        throw std::invalid_argument("check_pair_bounds: exact oracle regime is n <= 64");
    }
    const AnchorQuantization q0 =
        assign_cells(cloud0, farthest_first(cloud0, k0, mix_seed(seed, 0)), a);
    const AnchorQuantization q1 =
        assign_cells(cloud1, farthest_first(cloud1, k1, mix_seed(seed, 1)), a);
    StabilityRecord rec;
    rec.kind = "pair_bounds";
    rec.n = cloud0.size();
    rec.k = k0;
    rec.a = a;
    rec.eps0 = q0.quant_error;
    rec.eps1 = q1.quant_error;
    rec.r0 = q0.coverage_radius;
    rec.r1 = q1.coverage_radius;
    rec.w0 = wasserstein_via_expansion(cloud0, q0, a);
    rec.w1 = wasserstein_via_expansion(cloud1, q1, a);
    rec.delta_a = std::pow(std::pow(rec.eps0, a) + std::pow(rec.eps1, a), 1.0 / a);
    const double radius_bound = std::pow(std::pow(rec.r0, a) + std::pow(rec.r1, a), 1.0 / a);
    rec.pass = rec.w0 <= rec.eps0 + kWassersteinTol && rec.w1 <= rec.eps1 + kWassersteinTol &&
               rec.eps0 <= rec.r0 + kRadiusTol && rec.eps1 <= rec.r1 + kRadiusTol &&
               rec.delta_a <= radius_bound + kRadiusTol;
    return rec;
}

/// Entropic value gap |V_tau(q0,q1) - V_tau(q0~,q1~)| along a nested
/// farthest-first anchor grid. The gap at the largest k must fall below the
/// gap at the smallest k, Delta_a must be non-increasing along the grid,
/// and k = n must reproduce the full value within 1e-8.
inline std::vector<StabilityRecord> check_value_convergence(const PointCloud& cloud0,
                                                            const PointCloud& cloud1,
                                                            std::vector<Eigen::Index> k_grid,
                                                            double tau, std::uint64_t seed,
                                                            int sinkhorn_max_iter = 100000) {
    const Eigen::Index n = cloud0.size();
    if (n > 256 || cloud1.size() > 256) {
        throw std::invalid_argument("check_value_convergence: full-data regime is n <= 256");
    }
    if (k_grid.empty()) throw std::invalid_argument("check_value_convergence: empty k grid");
    std::sort(k_grid.begin(), k_grid.end());

    SinkhornOptions opt;
    opt.max_iter = sinkhorn_max_iter;
    opt.omega = 1.8;
    const Eigen::VectorXd uniform0 =
        Eigen::VectorXd::Constant(cloud0.size(), 1.0 / static_cast<double>(cloud0.size()));
    const Eigen::VectorXd uniform1 =
        Eigen::VectorXd::Constant(cloud1.size(), 1.0 / static_cast<double>(cloud1.size()));
    const double value_full =
        sinkhorn(cost_matrix(cloud0.points, cloud1.points, CostKind::sqeuclidean), uniform0,
                 uniform1, tau, opt)
            .entropic_value;

    const Eigen::Index k_max = k_grid.back();
    const auto idx0 = farthest_first(cloud0, k_max, mix_seed(seed, 0));
    const auto idx1 = farthest_first(cloud1, k_max, mix_seed(seed, 1));

    std::vector<StabilityRecord> records;
    double prev_delta = std::numeric_limits<double>::infinity();
    for (const Eigen::Index k : k_grid) {
        const std::vector<Eigen::Index> prefix0(idx0.begin(), idx0.begin() + k);
        const std::vector<Eigen::Index> prefix1(idx1.begin(), idx1.begin() + k);
        const AnchorQuantization q0 = assign_cells(cloud0, prefix0);
        const AnchorQuantization q1 = assign_cells(cloud1, prefix1);
        const double value_quant =
            sinkhorn(cost_matrix(q0.anchors, q1.anchors, CostKind::sqeuclidean), q0.masses,
                     q1.masses, tau, opt)
                .entropic_value;
        StabilityRecord rec;
        rec.kind = "value_convergence";
        rec.n = n;
        rec.k = k;
        rec.a = 2.0;
        rec.eps0 = q0.quant_error;
        rec.eps1 = q1.quant_error;
        rec.r0 = q0.coverage_radius;
        rec.r1 = q1.coverage_radius;
        rec.delta_a = std::sqrt(rec.eps0 * rec.eps0 + rec.eps1 * rec.eps1);
        rec.value_full = value_full;
        rec.value_quant = value_quant;
        rec.value_gap = std::abs(value_full - value_quant);
        rec.pass = rec.delta_a <= prev_delta + kRadiusTol;
        if (k == n && cloud1.size() == n) {
            rec.pass = rec.pass && rec.value_gap <= kValueEqualTol;
        }
        prev_delta = rec.delta_a;
        records.push_back(std::move(rec));
    }
    if (records.size() >= 2 &&
        !(records.back().value_gap < records.front().value_gap)) {
        records.back().pass = false;
    }
    return records;
}

namespace detail {

// Smallest coverage radius over all anchor subsets of size k.
inline double optimal_kcenter_radius(const PointCloud& cloud, Eigen::Index k) {
    const Eigen::Index n = cloud.size();
    std::vector<Eigen::Index> subset(static_cast<std::size_t>(k));
    double best = std::numeric_limits<double>::infinity();
    const std::function<void(Eigen::Index, Eigen::Index)> recurse = [&](Eigen::Index start,
                                                                        Eigen::Index depth) {
        if (depth == k) {
            best = std::min(best, coverage_radius_of(cloud, subset));
            return;
        }
        for (Eigen::Index i = start; i <= n - (k - depth); ++i) {
            subset[static_cast<std::size_t>(depth)] = i;
            recurse(i + 1, depth + 1);
        }
    };
    recurse(0, 0);
    return best;
}

}  // namespace detail

/// Worst greedy/optimal coverage-radius ratio over every possible initial
/// anchor, against the brute-force optimum. Both radii zero counts as
/// ratio 1. Exhaustive regime: n <= 12, k <= 4.
inline StabilityRecord check_kcenter_approx(const PointCloud& cloud, Eigen::Index k) {
    const Eigen::Index n = cloud.size();
    if (n > 12 || k > 4) {
        throw std::invalid_argument("check_kcenter_approx: exhaustive regime is n <= 12, k <= 4");
    }
    const double optimal = detail::optimal_kcenter_radius(cloud, k);
    double worst_ratio = 1.0;
    double worst_greedy = 0.0;
    for (Eigen::Index init = 0; init < n; ++init) {
        const double greedy = coverage_radius_of(cloud, farthest_first_from(cloud, k, init));
        worst_greedy = std::max(worst_greedy, greedy);
        const double ratio = optimal > 0.0 ? greedy / optimal : 1.0;
        worst_ratio = std::max(worst_ratio, ratio);
    }
    StabilityRecord rec;
    rec.kind = "kcenter";
    rec.n = n;
    rec.k = k;
    rec.r0 = worst_greedy;
    rec.r1 = optimal;
    rec.ratio = worst_ratio;
    rec.pass = worst_ratio <= 2.0 + kApproxRatioTol;
    return rec;
}

/// Qualitative proxy for the coupling stability bound: the marginal-based
/// distance W'_1 between the anchor-level plan and the full-data plan,
/// which reduces to W_1(q0, q0~) + W_1(q1, q1~), averaged over seeds and
/// evaluated on nested anchor prefixes. Must be non-increasing from k = 1
/// to k = n.
inline std::vector<StabilityRecord> check_coupling_proxy(const PointCloud& cloud0,
                                                         const PointCloud& cloud1, int num_seeds,
                                                         std::uint64_t seed) {
    const Eigen::Index n = cloud0.size();
    if (n > 32 || cloud1.size() != n) {
        throw std::invalid_argument("check_coupling_proxy: regime is equal clouds with n <= 32");
    }
    std::vector<Eigen::Index> k_grid;
    for (Eigen::Index k = 1; k < n; k *= 2) k_grid.push_back(k);
    k_grid.push_back(n);

    std::vector<double> avg(k_grid.size(), 0.0);
    for (int s = 0; s < num_seeds; ++s) {
        const auto idx0 = farthest_first(cloud0, n, mix_seed(seed, 0, static_cast<std::uint64_t>(s)));
        const auto idx1 = farthest_first(cloud1, n, mix_seed(seed, 1, static_cast<std::uint64_t>(s)));
        for (std::size_t g = 0; g < k_grid.size(); ++g) {
            const Eigen::Index k = k_grid[g];
            const std::vector<Eigen::Index> prefix0(idx0.begin(), idx0.begin() + k);
            const std::vector<Eigen::Index> prefix1(idx1.begin(), idx1.begin() + k);
            const double w0 =
                wasserstein_via_expansion(cloud0, assign_cells(cloud0, prefix0, 1.0), 1.0);
            const double w1 =
                wasserstein_via_expansion(cloud1, assign_cells(cloud1, prefix1, 1.0), 1.0);
            avg[g] += (w0 + w1) / num_seeds;
        }
    }

    std::vector<StabilityRecord> records;
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < k_grid.size(); ++g) {
        StabilityRecord rec;
        rec.kind = "coupling_proxy";
        rec.n = n;
        rec.k = k_grid[g];
        rec.a = 1.0;
        rec.b = 1.0;
        rec.value_gap = avg[g];
        rec.pass = avg[g] <= prev + kRadiusTol;
        prev = avg[g];
        records.push_back(std::move(rec));
    }
    return records;
}

struct VerifyOptions {
    int pair_instances = 200;
    int kcenter_instances = 100;
    Eigen::Index value_n = 256;
    int proxy_seeds = 20;
    std::uint64_t seed = 0;
    double tau = 0.125;
    bool inject_fault = false;  // test hook: corrupts eps before re-checking
};

/// Assembles the full empirical certification: randomized Theorem/Lemma
/// bound instances, the exhaustive k-center suite including the tight
/// ratio-2 instance, value-gap shrinkage, and the coupling proxy.
inline StabilityReport run_verification_suite(const VerifyOptions& opts) {
    StabilityReport report;

    for (int i = 0; i < opts.pair_instances; ++i) {
        const std::uint64_t s = mix_seed(opts.seed, 0x626e64ULL, static_cast<std::uint64_t>(i));
        const Eigen::Index n = 32;
        PointCloud c0, c1;
        switch (i % 3) {
            case 0:
                c0 = gen_eight_gaussians(n, mix_seed(s, 10));
                c1 = gen_moons(n, mix_seed(s, 11));
                break;
            case 1:
                c0 = gen_gaussian(n, mix_seed(s, 10), 2);
                c1 = gen_moons(n, mix_seed(s, 11));
                break;
            default:
                c0 = gen_gaussian(n, mix_seed(s, 10), 2);
                c1 = gen_eight_gaussians(n, mix_seed(s, 11));
                break;
        }
        const Eigen::Index ks[3] = {2, 4, 8};
        const Eigen::Index k = ks[(i / 3) % 3];
        for (const double a : {1.0, 2.0}) {
            StabilityRecord rec = check_pair_bounds(c0, c1, k, k, a, s);
            if (opts.inject_fault) {
                rec.eps0 *= 0.25;
                rec.pass = rec.w0 <= rec.eps0 + kWassersteinTol &&
                           rec.eps0 <= rec.r0 + kRadiusTol;
            }
            report.records.push_back(std::move(rec));
        }
    }

    {
        Eigen::MatrixXd tight(4, 1);
        tight << 0.0, 1.0, 2.0, 10.0;
        report.records.push_back(check_kcenter_approx(PointCloud{tight}, 2));
        Eigen::MatrixXd degenerate(3, 1);
        degenerate << 0.0, 1.0, 2.0;
        report.records.push_back(check_kcenter_approx(PointCloud{degenerate}, 3));
    }
    for (int i = 0; i < opts.kcenter_instances; ++i) {
        const PointCloud cloud =
            gen_gaussian(10, mix_seed(opts.seed, 0x6b63ULL, static_cast<std::uint64_t>(i)), 2);
        report.records.push_back(check_kcenter_approx(cloud, 3));
    }

    {
        const PointCloud c0 = gen_eight_gaussians(opts.value_n, mix_seed(opts.seed, 0x7631ULL));
        const PointCloud c1 = gen_moons(opts.value_n, mix_seed(opts.seed, 0x7632ULL));
        std::vector<Eigen::Index> grid = {1, 4, 16, 64};
        auto recs = check_value_convergence(c0, c1, grid, opts.tau, mix_seed(opts.seed, 0x7633ULL));
        report.records.insert(report.records.end(), recs.begin(), recs.end());
        auto identity = check_value_convergence(c0, c1, {opts.value_n}, opts.tau,
                                                mix_seed(opts.seed, 0x7633ULL));
        report.records.insert(report.records.end(), identity.begin(), identity.end());
    }

    {
        const PointCloud c0 = gen_eight_gaussians(32, mix_seed(opts.seed, 0x7031ULL));
        const PointCloud c1 = gen_moons(32, mix_seed(opts.seed, 0x7032ULL));
        auto recs = check_coupling_proxy(c0, c1, opts.proxy_seeds, mix_seed(opts.seed, 0x7033ULL));
        report.records.insert(report.records.end(), recs.begin(), recs.end());
    }

    return report;
}

}  // namespace qdsb

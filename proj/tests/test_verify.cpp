#include "qdsb/verify.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace qdsb;

namespace {

PointCloud line_cloud(std::initializer_list<double> xs) {
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(xs.size()), 1);
    Eigen::Index i = 0;
    for (double x : xs) pts(i++, 0) = x;
    return PointCloud{pts};
}

}  // namespace

TEST_CASE("endpoint bound on the hand instance") {
    const PointCloud cloud = line_cloud({0.0, 1.0, 10.0});
    // forced init at index 0 gives anchors {0, 10}
    const AnchorQuantization q = assign_cells(cloud, farthest_first_from(cloud, 2, 0));
    CHECK(q.quant_error == Catch::Approx(std::sqrt(1.0 / 3.0)));
    CHECK(q.coverage_radius == 1.0);
    CHECK(wasserstein_via_expansion(cloud, q) == Catch::Approx(std::sqrt(1.0 / 3.0)));

    // identity quantization: everything collapses to zero
    const StabilityRecord triv = check_endpoint_bound(cloud, 3, 2.0, 0);
    CHECK(triv.w0 == 0.0);
    CHECK(triv.eps0 == 0.0);
    CHECK(triv.r0 == 0.0);
    CHECK(triv.pass);

    CHECK_THROWS_AS(check_endpoint_bound(gen_gaussian(65, 0, 2), 4, 2.0, 0),
                    std::invalid_argument);
}

TEST_CASE("randomized endpoint and radius bounds hold") {
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const PointCloud c0 = gen_eight_gaussians(32, mix_seed(seed, 1));
        const PointCloud c1 = gen_moons(32, mix_seed(seed, 2));
        for (const double a : {1.0, 2.0}) {
            const StabilityRecord rec =
                check_pair_bounds(c0, c1, 2 + (seed % 7), 2 + (seed % 5), a, seed);
            CHECK(rec.pass);
            // Delta_a composition is recomputable to 1e-12
            const double recomputed =
                std::pow(std::pow(rec.eps0, a) + std::pow(rec.eps1, a), 1.0 / a);
            CHECK(std::abs(recomputed - rec.delta_a) <= 1e-12);
            ++checked;
        }
    }
    CHECK(checked == 100);
}

TEST_CASE("value convergence on nested grids") {
    const PointCloud c0 = gen_eight_gaussians(128, 11);
    const PointCloud c1 = gen_moons(128, 12);
    const auto recs = check_value_convergence(c0, c1, {1, 4, 16, 64}, 0.125, 5);
    REQUIRE(recs.size() == 4);
    for (const auto& rec : recs) CHECK(rec.pass);
    CHECK(recs.back().value_gap < recs.front().value_gap);

    // Delta at k = 1 equals the 2-moment of distances to the single anchor
    const auto idx0 = farthest_first(c0, 1, mix_seed(5, 0));
    const auto idx1 = farthest_first(c1, 1, mix_seed(5, 1));
    const AnchorQuantization q0 = assign_cells(c0, idx0);
    const AnchorQuantization q1 = assign_cells(c1, idx1);
    const double expect = std::sqrt(q0.quant_error * q0.quant_error +
                                    q1.quant_error * q1.quant_error);
    CHECK(recs.front().delta_a == Catch::Approx(expect).margin(1e-12));

    // k = n reproduces the full problem up to solver tolerance
    const auto identity = check_value_convergence(c0, c1, {128}, 0.125, 5);
    REQUIRE(identity.size() == 1);
    CHECK(identity.front().value_gap <= 1e-8);
    CHECK(identity.front().pass);

    CHECK_THROWS_AS(check_value_convergence(gen_gaussian(300, 0, 2), c1, {4}, 0.125, 0),
                    std::invalid_argument);
}

TEST_CASE("k-center ratio bound with the tight instance") {
    // optimal anchors {1, 10} cover {0,1,2,10} with radius 1; greedy from 0
    // picks {0, 10} with radius 2, so the 2-approximation is tight here
    const PointCloud cloud = line_cloud({0.0, 1.0, 2.0, 10.0});
    const StabilityRecord rec = check_kcenter_approx(cloud, 2);
    CHECK(rec.r1 == 1.0);  // optimal radius
    CHECK(rec.ratio == Catch::Approx(2.0));
    CHECK(rec.pass);

    const double greedy_from_zero =
        coverage_radius_of(cloud, farthest_first_from(cloud, 2, 0));
    CHECK(greedy_from_zero == 2.0);

    // k = n: both radii zero, ratio defined as 1
    const StabilityRecord degenerate = check_kcenter_approx(line_cloud({0.0, 1.0}), 2);
    CHECK(degenerate.ratio == 1.0);
    CHECK(degenerate.pass);

    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const PointCloud random = gen_gaussian(10, seed, 2);
        const StabilityRecord r = check_kcenter_approx(random, 3);
        CHECK(r.ratio <= 2.0 + 1e-12);
        CHECK(r.pass);
    }

    CHECK_THROWS_AS(check_kcenter_approx(gen_gaussian(13, 0, 2), 3), std::invalid_argument);
    CHECK_THROWS_AS(check_kcenter_approx(gen_gaussian(10, 0, 2), 5), std::invalid_argument);
}

TEST_CASE("coupling proxy is non-increasing on nested grids") {
    const PointCloud c0 = gen_eight_gaussians(32, 21);
    const PointCloud c1 = gen_moons(32, 22);
    const auto recs = check_coupling_proxy(c0, c1, 20, 7);
    REQUIRE(recs.size() >= 3);
    for (const auto& rec : recs) CHECK(rec.pass);
    CHECK(recs.back().k == 32);
    CHECK(recs.back().value_gap <= 1e-12);  // k = n: identical marginals
    for (std::size_t i = 1; i < recs.size(); ++i) {
        CHECK(recs[i].value_gap <= recs[i - 1].value_gap + 1e-12);
    }
}

TEST_CASE("suite report and fault injection") {
    VerifyOptions opts;
    opts.pair_instances = 12;
    opts.kcenter_instances = 5;
    opts.value_n = 64;
    opts.proxy_seeds = 3;
    const StabilityReport report = run_verification_suite(opts);
    CHECK(report.all_pass());
    // 12 pair instances x 2 exponents + (2 + 5) kcenter + (4 + 1) value + proxy grid
    CHECK(report.records.size() >= 24u + 7u + 5u + 3u);

    const auto path = (std::filesystem::temp_directory_path() / "qdsb_report.csv").string();
    save_report_csv(report, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "kind,n,k,a,b,eps0,eps1,delta_a,r0,r1,w0,w1,value_full,value_quant,value_gap,ratio,"
          "pass");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == report.records.size());
    std::filesystem::remove(path);

    opts.inject_fault = true;
    const StabilityReport corrupted = run_verification_suite(opts);
    CHECK(!corrupted.all_pass());
}

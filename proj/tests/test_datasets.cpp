#include "qdsb/datasets.hpp"
#include "qdsb/point_cloud.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace qdsb;

namespace {

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("eight gaussians basic shape and determinism") {
    const PointCloud empty = gen_eight_gaussians(0, 0);
    CHECK(empty.size() == 0);
    CHECK(empty.dim() == 2);

    const PointCloud a = gen_eight_gaussians(4096, 7);
    const PointCloud b = gen_eight_gaussians(4096, 7);
    REQUIRE(a.size() == 4096);
    CHECK(a.points == b.points);
    CHECK(a.all_finite());
    CHECK(gen_eight_gaussians(64, 8).points != a.points.topRows(64));
}

TEST_CASE("eight gaussians sample mean stays near origin") {
    // CLT: component means cancel by symmetry; the mean of n=16384 samples
    // has standard error well below the 0.15 band (Monte-Carlo oracle at
    // 10x size gives ~0.03 typical norms).
    const PointCloud cloud = gen_eight_gaussians(16384, 0);
    const Eigen::Vector2d mean = cloud.points.colwise().mean();
    CHECK(mean.norm() < 0.15);
}

TEST_CASE("eight gaussians component symmetry") {
    const PointCloud cloud = gen_eight_gaussians(80000, 3);
    Eigen::Matrix<double, 8, 2> means;
    for (int c = 0; c < 8; ++c) {
        const double angle = 2.0 * std::numbers::pi * c / 8.0;
        means.row(c) << 3.0 * std::cos(angle), 3.0 * std::sin(angle);
    }
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(8);
    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
        Eigen::Index best = 0;
        (means.rowwise() - cloud.points.row(i)).rowwise().squaredNorm().minCoeff(&best);
        ++counts(best);
    }
    for (int c = 0; c < 8; ++c) {
        CHECK(counts(c) >= 9000);
        CHECK(counts(c) <= 11000);
    }
}

TEST_CASE("moons stay within the expected radius") {
    const PointCloud empty = gen_moons(0, 0);
    CHECK(empty.size() == 0);

    const PointCloud cloud = gen_moons(2048, 1);
    REQUIRE(cloud.size() == 2048);
    // Arc geometry spans at most ~1.7 from the analytic center; 6 sigma of
    // noise adds 0.3 before the x3 scaling, so 6 bounds the norm.
    CHECK(cloud.points.rowwise().norm().maxCoeff() < 6.0);
    CHECK(gen_moons(2048, 1).points == cloud.points);
}

TEST_CASE("gaussian generator moments and empty case") {
    const PointCloud one = gen_gaussian(1, 0, 2);
    REQUIRE(one.size() == 1);
    CHECK(one.all_finite());

    const PointCloud empty = gen_gaussian(0, 3, 5);
    CHECK(empty.size() == 0);
    CHECK(empty.dim() == 5);

    // Chi-square concentration: per-coordinate variance of n=16384 standard
    // normals lands within [0.95, 1.05] with overwhelming probability.
    const PointCloud cloud = gen_gaussian(16384, 0, 2);
    for (Eigen::Index j = 0; j < 2; ++j) {
        const double mean = cloud.points.col(j).mean();
        const double var =
            (cloud.points.col(j).array() - mean).square().sum() / (cloud.size() - 1.0);
        CHECK(var > 0.95);
        CHECK(var < 1.05);
    }
}

TEST_CASE("csv round trip is exact") {
    Eigen::MatrixXd pts(3, 2);
    pts << 0.1, -2.5, 1.0 / 3.0, 1e-300, std::numbers::pi, -7.25;
    const std::string path = temp_path("qdsb_roundtrip.csv");
    save_csv(PointCloud{pts}, path);
    const PointCloud loaded = load_csv(path);
    CHECK(loaded.points == pts);
    std::filesystem::remove(path);
}

TEST_CASE("csv loader rejects malformed input") {
    const std::string ragged = temp_path("qdsb_ragged.csv");
    {
        std::ofstream out(ragged);
        out << "1,2\n3\n";
    }
    CHECK_THROWS_WITH(load_csv(ragged), Catch::Matchers::ContainsSubstring("ragged"));
    std::filesystem::remove(ragged);

    const std::string bad = temp_path("qdsb_token.csv");
    {
        std::ofstream out(bad);
        out << "1,zzz\n";
    }
    CHECK_THROWS_WITH(load_csv(bad), Catch::Matchers::ContainsSubstring("non-numeric"));
    std::filesystem::remove(bad);

    const std::string empty = temp_path("qdsb_empty.csv");
    { std::ofstream out(empty); }
    CHECK_THROWS_WITH(load_csv(empty), Catch::Matchers::ContainsSubstring("dimension"));
    std::filesystem::remove(empty);

    CHECK_THROWS_WITH(load_csv(temp_path("qdsb_does_not_exist.csv")),
                      Catch::Matchers::ContainsSubstring("cannot open"));
}

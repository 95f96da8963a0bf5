#include "qdsb/bridge.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace qdsb;

namespace {

Eigen::VectorXd vec1(double v) {
    Eigen::VectorXd x(1);
    x << v;
    return x;
}

}  // namespace

TEST_CASE("bridge point sampling") {
    const Eigen::VectorXd x0 = vec1(0.0), x1 = vec1(2.0);
    CHECK(sample_bridge_point(x0, x1, 0.5, 0.0, 42)(0) == 1.0);
    CHECK(sample_bridge_point(x0, x1, 0.25, 0.0, 42)(0) == Catch::Approx(0.5));
    CHECK_THROWS_AS(sample_bridge_point(x0, x1, 0.0, 1.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(sample_bridge_point(x0, x1, 1.0, 1.0, 0), std::invalid_argument);

    // Monte-Carlo variance check at t = 0.5, sigma = 1: var = 0.25.
    std::mt19937_64 rng(0);
    const int draws = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double v = sample_bridge_point(vec1(0.0), vec1(0.0), 0.5, 1.0, rng)(0);
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / draws;
    const double var = sum_sq / draws - mean * mean;
    CHECK(var == Catch::Approx(0.25).epsilon(0.03));
}

TEST_CASE("drift target closed form") {
    const Eigen::VectorXd x0 = vec1(0.0), x1 = vec1(3.0);
    // at the bridge mean the first term vanishes
    const Eigen::VectorXd mean = 0.25 * x1 + 0.75 * x0;
    CHECK(drift_target(mean, x0, x1, 0.25)(0) == Catch::Approx(3.0));
    // at t = 1/2 the coefficient is zero regardless of x
    CHECK(drift_target(vec1(77.0), x0, x1, 0.5)(0) == Catch::Approx(3.0));
    // direct formula evaluation
    CHECK(drift_target(vec1(1.0), vec1(0.0), vec1(0.0), 0.25)(0) == Catch::Approx(8.0 / 3.0));
    CHECK_THROWS_AS(drift_target(mean, x0, x1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(drift_target(mean, x0, x1, 1.0), std::invalid_argument);
}

TEST_CASE("score target closed form and finite differences") {
    const Eigen::VectorXd x0 = vec1(0.0), x1 = vec1(0.0);
    CHECK(score_target(vec1(0.0), x0, x1, 0.3, 1.0)(0) == 0.0);
    CHECK(score_target(vec1(0.5), x0, x1, 0.5, 1.0)(0) == Catch::Approx(-2.0));
    CHECK_THROWS_AS(score_target(vec1(0.0), x0, x1, 0.5, 0.0), std::invalid_argument);

    // central finite difference of log N(x; mean, sigma^2 t (1-t))
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.05, 0.95);
    for (int trial = 0; trial < 50; ++trial) {
        const double t = unit(rng);
        const double sigma = 0.2 + std::abs(gauss(rng));
        Eigen::VectorXd a(2), b(2), x(2);
        for (int i = 0; i < 2; ++i) {
            a(i) = gauss(rng);
            b(i) = gauss(rng);
            x(i) = gauss(rng);
        }
        const Eigen::VectorXd mean = t * b + (1.0 - t) * a;
        const double var = sigma * sigma * t * (1.0 - t);
        const auto log_density = [&](const Eigen::VectorXd& p) {
            return -(p - mean).squaredNorm() / (2.0 * var);
        };
        const double h = 1e-5;
        const Eigen::VectorXd s = score_target(x, a, b, t, sigma);
        for (int i = 0; i < 2; ++i) {
            Eigen::VectorXd hi = x, lo = x;
            hi(i) += h;
            lo(i) -= h;
            const double fd = (log_density(hi) - log_density(lo)) / (2.0 * h);
            CHECK(std::abs(fd - s(i)) < 1e-5 + 1e-4 * std::abs(s(i)));
        }
    }
}

TEST_CASE("lambda weight") {
    CHECK(lambda_weight(0.5, 0.25) == Catch::Approx(0.125));
    CHECK(lambda_weight(kTimeMin, 1.0) == Catch::Approx(0.0316069).epsilon(1e-4));
    CHECK_THROWS_AS(lambda_weight(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("bridge sample recomputability and lambda identity") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(kTimeMin, 1.0 - kTimeMin);
    double mean_acc = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::VectorXd x0(3), x1(3);
        for (int i = 0; i < 3; ++i) {
            x0(i) = gauss(rng);
            x1(i) = gauss(rng);
        }
        const double t = unit(rng);
        const double sigma = 0.1 + std::abs(gauss(rng));
        const BridgeSample s = make_bridge_sample(x0, x1, t, sigma, rng);

        // stored targets match recomputation bit for bit
        CHECK(s.u_target == drift_target(s.x, x0, x1, t));
        CHECK(s.s_target == score_target(s.x, x0, x1, t, sigma));
        CHECK(s.lam == lambda_weight(t, sigma));

        // lambda(t) * s_target = -xi, up to the floating-point round trip
        // through x = mean + sd * xi
        CHECK((s.lam * s.s_target + s.xi).norm() < 1e-9 * std::max(1.0, s.xi.norm()));
        CHECK(s.lam * s.lam * s.s_target.squaredNorm() ==
              Catch::Approx(s.xi.squaredNorm()).epsilon(1e-9));
        mean_acc += (s.x - (t * x1 + (1.0 - t) * x0)).norm() / (sigma * std::sqrt(t * (1 - t)));
    }
    // sanity: draws are unit scale on average
    CHECK(mean_acc / 200.0 > 0.5);
}

TEST_CASE("loss terms") {
    std::mt19937_64 rng(2);
    const BridgeSample s = make_bridge_sample(vec1(0.0), vec1(1.0), 0.3, 0.5, rng);
    const LossTerms perfect = loss_terms(s.u_target, s.s_target, s);
    CHECK(perfect.drift_loss == 0.0);
    CHECK(perfect.score_loss == 0.0);
    CHECK(perfect.total == 0.0);

    const LossTerms drift_off = loss_terms(s.u_target + vec1(1.0), s.s_target, s);
    CHECK(drift_off.drift_loss == Catch::Approx(1.0));
    CHECK(drift_off.total == Catch::Approx(1.0));

    const LossTerms score_off = loss_terms(s.u_target, s.s_target + vec1(1.0 / s.lam), s);
    CHECK(score_off.score_loss == Catch::Approx(1.0));

    Eigen::VectorXd wrong(2);
    wrong << 0.0, 0.0;
    CHECK_THROWS_AS(loss_terms(wrong, s.s_target, s), std::invalid_argument);
}

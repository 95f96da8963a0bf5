#include "qdsb/simulate.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace qdsb;

namespace {

ModelBundle zero_bundle(Eigen::Index d) {
    ModelBundle b = make_bundle(d, 0.25, 0, 8);
    for (auto* net : {&b.drift_net, &b.score_net}) {
        for (auto& w : net->W) w.setZero();
        for (auto& v : net->b) v.setZero();
    }
    return b;
}

}  // namespace

TEST_CASE("zero fields with zero noise are the identity") {
    const ModelBundle bundle = zero_bundle(2);
    Eigen::MatrixXd x0(3, 2);
    x0 << 1.0, -1.0, 0.5, 2.0, 0.0, 0.0;
    SimConfig cfg;
    cfg.sigma = 0.0;
    CHECK(simulate(bundle, x0, cfg) == x0);
    cfg.mode = SimMode::ode;
    CHECK(simulate(bundle, x0, cfg) == x0);
}

TEST_CASE("constant drift integrates exactly") {
    ModelBundle bundle = zero_bundle(2);
    bundle.drift_net.b[2] << 2.0, -3.0;  // v == c through the zeroed layers
    Eigen::MatrixXd x0(2, 2);
    x0 << 0.0, 0.0, 1.0, 1.0;
    SimConfig cfg;
    cfg.sigma = 0.0;
    cfg.mode = SimMode::ode;
    const Eigen::MatrixXd out = simulate(bundle, x0, cfg);
    CHECK(std::abs(out(0, 0) - 2.0) < 1e-12);
    CHECK(std::abs(out(0, 1) + 3.0) < 1e-12);
    CHECK(std::abs(out(1, 0) - 3.0) < 1e-12);
}

TEST_CASE("pure diffusion variance matches sigma^2") {
    const auto zero_field = [](double, const Eigen::MatrixXd& x) {
        return Eigen::MatrixXd::Zero(x.rows(), x.cols()).eval();
    };
    SimConfig cfg;
    cfg.sigma = 0.25;
    cfg.seed = 3;
    const Eigen::Index m = 100000;
    const Eigen::MatrixXd x0 = Eigen::MatrixXd::Zero(m, 1);
    const Eigen::MatrixXd out = simulate_fields(zero_field, zero_field, x0, cfg);
    const double mean = out.col(0).mean();
    const double var = (out.col(0).array() - mean).square().sum() / (m - 1.0);
    CHECK(var == Catch::Approx(0.0625).epsilon(0.05));
}

TEST_CASE("ode error shrinks with more steps") {
    // quadratic field: dx/dt = x^2, x(0) = 0.5 -> x(1) = 1
    const auto field = [](double, const Eigen::MatrixXd& x) {
        return (x.array() * x.array()).matrix().eval();
    };
    const Eigen::MatrixXd x0 = Eigen::MatrixXd::Constant(1, 1, 0.5);
    SimConfig coarse;
    coarse.mode = SimMode::ode;
    coarse.sigma = 0.0;
    coarse.steps = 100;
    SimConfig fine = coarse;
    fine.steps = 200;
    const double exact = 1.0;
    const double err_coarse =
        std::abs(simulate_fields(field, field, x0, coarse)(0, 0) - exact);
    const double err_fine = std::abs(simulate_fields(field, field, x0, fine)(0, 0) - exact);
    CHECK(err_fine / err_coarse < 1.0);
}

TEST_CASE("sde determinism per seed") {
    const ModelBundle bundle = zero_bundle(2);
    Eigen::MatrixXd x0(4, 2);
    x0.setOnes();
    SimConfig cfg;
    cfg.seed = 11;
    const Eigen::MatrixXd a = simulate(bundle, x0, cfg);
    const Eigen::MatrixXd b = simulate(bundle, x0, cfg);
    CHECK(a == b);
    cfg.seed = 12;
    CHECK(simulate(bundle, x0, cfg) != a);

    // per-trajectory streams: a partitioned batch reproduces the full batch
    SimConfig head = cfg;
    const Eigen::MatrixXd full = simulate(bundle, x0, cfg);
    const Eigen::MatrixXd top = simulate(bundle, x0.topRows(2), head);
    CHECK(full.topRows(2) == top);

    // same property in odd dimension, where a shared normal sampler would
    // leak its cached second draw across trajectory streams
    const ModelBundle one_d = zero_bundle(1);
    const Eigen::MatrixXd y0 = Eigen::MatrixXd::Ones(5, 1);
    const Eigen::MatrixXd full1 = simulate(one_d, y0, cfg);
    const Eigen::MatrixXd top1 = simulate(one_d, y0.topRows(2), cfg);
    CHECK(full1.topRows(2) == top1);
}

TEST_CASE("non-finite states abort with the step index") {
    const auto blowup = [](double, const Eigen::MatrixXd& x) {
        return (x.array() * 1e300).matrix().eval();
    };
    const Eigen::MatrixXd x0 = Eigen::MatrixXd::Constant(1, 1, 1e300);
    SimConfig cfg;
    cfg.sigma = 0.0;
    cfg.mode = SimMode::ode;
    CHECK_THROWS_WITH(simulate_fields(blowup, blowup, x0, cfg),
                      Catch::Matchers::ContainsSubstring("step"));
    CHECK_THROWS_AS(simulate_fields(blowup, blowup, Eigen::MatrixXd::Constant(1, 1, 1e309), cfg),
                    std::invalid_argument);
}

TEST_CASE("config validation") {
    const ModelBundle bundle = zero_bundle(1);
    const Eigen::MatrixXd x0 = Eigen::MatrixXd::Zero(1, 1);
    SimConfig cfg;
    cfg.steps = 0;
    CHECK_THROWS_AS(simulate(bundle, x0, cfg), std::invalid_argument);
    cfg.steps = 10;
    cfg.sigma = -0.1;
    CHECK_THROWS_AS(simulate(bundle, x0, cfg), std::invalid_argument);
}

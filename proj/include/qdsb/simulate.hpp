#pragma once

#include "qdsb/model.hpp"
#include "qdsb/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace qdsb {

enum class SimMode { sde, ode };

struct SimConfig {
    int steps = 100;  // per unit time
    double sigma = 0.25;
    SimMode mode = SimMode::sde;
    std::uint64_t seed = 0;
};

/// Integrates dX = [v(t,X) + (sigma^2/2) s(t,X)] dt + sigma dB (sde mode)
/// or dX = v(t,X) dt (ode mode) over [0,1] with explicit left-endpoint
/// Euler steps. Noise streams derive from (seed, trajectory index), so the
/// result does not depend on how a batch is partitioned. Throws if the
/// state leaves the finite range, reporting the step index.
template <typename DriftFn, typename ScoreFn>
Eigen::MatrixXd simulate_fields(DriftFn&& drift, ScoreFn&& score, const Eigen::MatrixXd& x0_batch,
                                const SimConfig& cfg) {
    if (cfg.steps < 1) throw std::invalid_argument("simulate: steps must be >= 1");
    if (cfg.sigma < 0.0) throw std::invalid_argument("simulate: sigma must be >= 0");
    if (!x0_batch.allFinite()) throw std::invalid_argument("simulate: non-finite initial state");

    const Eigen::Index m = x0_batch.rows();
    const Eigen::Index d = x0_batch.cols();
    const double dt = 1.0 / static_cast<double>(cfg.steps);
    const double noise_scale = cfg.sigma * std::sqrt(dt);

    Eigen::MatrixXd x = x0_batch;
    Eigen::MatrixXd noise(m, d);
    std::vector<std::mt19937_64> streams;
    const bool with_noise = cfg.mode == SimMode::sde && cfg.sigma > 0.0;
    if (with_noise) {
        streams.reserve(static_cast<std::size_t>(m));
        for (Eigen::Index i = 0; i < m; ++i) {
            streams.emplace_back(mix_seed(cfg.seed, 0x7472616aULL, static_cast<std::uint64_t>(i)));
        }
    }

    for (int step = 0; step < cfg.steps; ++step) {
        const double t = static_cast<double>(step) * dt;
        Eigen::MatrixXd field = drift(t, x);
        if (cfg.mode == SimMode::sde) {
            field.noalias() += (cfg.sigma * cfg.sigma / 2.0) * score(t, x);
        }
        x.noalias() += dt * field;
        if (with_noise) {
            for (Eigen::Index i = 0; i < m; ++i) {
                // fresh distribution per trajectory: the cached Box-Muller
                // spare must never cross stream boundaries
                std::normal_distribution<double> gauss(0.0, 1.0);
                auto& rng = streams[static_cast<std::size_t>(i)];
                for (Eigen::Index j = 0; j < d; ++j) noise(i, j) = gauss(rng);
            }
            x.noalias() += noise_scale * noise;
        }
        if (!x.allFinite()) {
            throw std::runtime_error("simulate: non-finite state after step " +
                                     std::to_string(step));
        }
    }
    return x;
}

/// Pushes source samples through the learned dynamics.
inline Eigen::MatrixXd simulate(const ModelBundle& bundle, const Eigen::MatrixXd& x0_batch,
                                const SimConfig& cfg) {
    const auto drift = [&](double t, const Eigen::MatrixXd& x) {
        return mlp_forward_batch(bundle.drift_net, Eigen::VectorXd::Constant(x.rows(), t), x);
    };
    const auto score = [&](double t, const Eigen::MatrixXd& x) {
        return mlp_forward_batch(bundle.score_net, Eigen::VectorXd::Constant(x.rows(), t), x);
    };
    return simulate_fields(drift, score, x0_batch, cfg);
}

}  // namespace qdsb

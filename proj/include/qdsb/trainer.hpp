#pragma once

#include "qdsb/anchors.hpp"
#include "qdsb/bridge.hpp"
#include "qdsb/coupling.hpp"
#include "qdsb/evaluate.hpp"
#include "qdsb/model.hpp"
#include "qdsb/point_cloud.hpp"
#include "qdsb/rng.hpp"
#include "qdsb/simulate.hpp"
#include "qdsb/transport.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdsb {

enum class CouplingMode { qdsb, minibatch_ot, independent };

inline const char* to_string(CouplingMode mode) {
    switch (mode) {
        case CouplingMode::qdsb: return "qdsb";
        case CouplingMode::minibatch_ot: return "minibatch_ot";
        default: return "independent";
    }
}

enum class OtMode { entropic, exact };

inline const char* to_string(OtMode mode) { return mode == OtMode::entropic ? "entropic" : "exact"; }

struct TrainConfig {
    double sigma = 0.25;
    double tau = 0.125;  // 2 sigma^2
    Eigen::Index anchors_k = 256;
    int refresh_epochs = 100;
    int epochs = 500;
    Eigen::Index batch_size = 256;
    double lr = 1e-4;
    double weight_decay = 1e-2;
    CouplingMode coupling_mode = CouplingMode::qdsb;
    OtMode ot_mode = OtMode::entropic;
    CostKind cost_kind = CostKind::sqeuclidean;
    std::uint64_t seed = 0;
    int eval_every = 50;
    Eigen::Index eval_points = 4096;
    int em_steps = 100;
    Eigen::Index rollout_batch = 2048;
};

inline void validate(const TrainConfig& c, Eigen::Index n_source, Eigen::Index n_target) {
    if (!(c.sigma > 0.0)) throw std::invalid_argument("train config: sigma must be positive");
    if (!(c.tau > 0.0)) throw std::invalid_argument("train config: tau must be positive");
    if (c.anchors_k < 1) throw std::invalid_argument("train config: anchors_k must be >= 1");
    if (c.coupling_mode == CouplingMode::qdsb &&
        (c.anchors_k > n_source || c.anchors_k > n_target)) {
        throw std::invalid_argument("train config: anchors_k exceeds the sample count");
    }
    if (c.refresh_epochs < 1) throw std::invalid_argument("train config: refresh_epochs must be >= 1");
    if (c.epochs < 0) throw std::invalid_argument("train config: epochs must be >= 0");
    if (c.batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (!(c.lr > 0.0)) throw std::invalid_argument("train config: lr must be positive");
    if (c.weight_decay < 0.0) throw std::invalid_argument("train config: weight_decay must be >= 0");
    if (c.eval_every < 1) throw std::invalid_argument("train config: eval_every must be >= 1");
    if (c.eval_points < 1) throw std::invalid_argument("train config: eval_points must be >= 1");
    if (c.em_steps < 1) throw std::invalid_argument("train config: em_steps must be >= 1");
    if (c.rollout_batch < 1) throw std::invalid_argument("train config: rollout_batch must be >= 1");
}

struct MetricsRow {
    int epoch = 0;
    double train_seconds = 0.0;
    double mmd = 0.0;
    double loss = 0.0;
};

struct MetricsLog {
    std::vector<MetricsRow> rows;
    std::vector<double> epoch_loss;  // mean step loss, one entry per epoch
};

inline void save_metrics_csv(const MetricsLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_metrics_csv: cannot open " + path);
    out << "epoch,train_seconds,mmd,loss\n";
    char buf[160];
    for (const auto& row : log.rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.17g,%.17g\n", row.epoch, row.train_seconds,
                      row.mmd, row.loss);
        out << buf;
    }
}

struct TrainResult {
    ModelBundle bundle;
    MetricsLog log;
    std::vector<double> coverage_radii;  // source/target radius per anchor build
    double bandwidth = 0.0;
};

/// Test instrumentation; during_eval runs inside the (clock-paused)
/// evaluation region.
struct TrainHooks {
    std::function<void(int epoch)> during_eval;
};

namespace detail {

// Seed-stream tags for the independent RNG consumers of one run.
inline constexpr std::uint64_t kTagModel = 0x6d6f64ULL;
inline constexpr std::uint64_t kTagLoop = 0x6c6f6fULL;
inline constexpr std::uint64_t kTagRefresh = 0x726566ULL;
inline constexpr std::uint64_t kTagEval = 0x65766cULL;
inline constexpr std::uint64_t kTagChunk = 0x63686bULL;

}  // namespace detail

struct TrainState {
    TrainConfig config;
    PointCloud source;
    PointCloud target;
    PointCloud eval_source;
    PointCloud eval_target;
    ModelBundle bundle;
    CouplingSampler sampler;  // populated in qdsb mode
    double bandwidth = 0.0;
    std::mt19937_64 loop_rng;
    int refresh_count = 0;
    std::vector<double> coverage_radii;
};

/// Rebuilds anchors and the anchor-level plan from a fresh seeded initial
/// point. Model parameters are untouched.
inline void refresh_anchors(TrainState& st, std::uint64_t refresh_seed) {
    const TrainConfig& c = st.config;
    const auto idx0 = farthest_first(st.source, c.anchors_k, mix_seed(refresh_seed, 0));
    const auto idx1 = farthest_first(st.target, c.anchors_k, mix_seed(refresh_seed, 1));
    AnchorQuantization q0 = assign_cells(st.source, idx0);
    AnchorQuantization q1 = assign_cells(st.target, idx1);
    st.coverage_radii.push_back(q0.coverage_radius);
    st.coverage_radii.push_back(q1.coverage_radius);

    TransportPlan plan;
    if (c.ot_mode == OtMode::entropic) {
        // Anchor plans at tau = 2 sigma^2 can mix slowly; over-relaxation
        // plus a work-based iteration budget (small plans iterate in
        // microseconds and near-degenerate ones may need millions) keeps
        // refreshes reliable.
        SinkhornOptions opt;
        opt.omega = 1.8;
        const long long cells = static_cast<long long>(c.anchors_k) * c.anchors_k;
        opt.max_iter = static_cast<int>(
            std::clamp(3'000'000'000LL / std::max(1LL, cells), 200'000LL, 300'000'000LL));
        plan = sinkhorn(cost_matrix(q0.anchors, q1.anchors, c.cost_kind), q0.masses, q1.masses,
                        c.tau, opt);
        if (!plan.converged) {
            throw std::runtime_error("refresh_anchors: anchor plan did not converge after " +
                                     std::to_string(plan.iterations) + " Sinkhorn iterations");
        }
    } else {
        // The assignment solver needs uniform equal-size marginals; general
        // cell masses would require a weighted exact solver.
        const bool uniform0 = (q0.masses.array() - q0.masses(0)).abs().maxCoeff() == 0.0;
        const bool uniform1 = (q1.masses.array() - q1.masses(0)).abs().maxCoeff() == 0.0;
        if (q0.num_anchors() != q1.num_anchors() || !uniform0 || !uniform1) {
            throw std::runtime_error(
                "refresh_anchors: exact anchor-plan solving requires equal anchor counts with "
                "uniform cell masses; use ot_mode=entropic");
        }
        plan = exact_assignment_ot(q0.anchors, q1.anchors, c.cost_kind);
    }
    st.sampler = build_anchor_coupling(st.source, std::move(q0), st.target, std::move(q1),
                                       std::move(plan));
    ++st.refresh_count;
}

inline TrainState init_train_state(const TrainConfig& config, PointCloud source,
                                   PointCloud target, PointCloud eval_source,
                                   PointCloud eval_target) {
    if (source.size() == 0 || target.size() == 0) {
        throw std::invalid_argument("train: endpoint clouds must be nonempty");
    }
    if (source.dim() != target.dim()) {
        throw std::invalid_argument("train: endpoint clouds must share a dimension");
    }
    validate(config, source.size(), target.size());
    TrainState st;
    st.config = config;
    st.source = std::move(source);
    st.target = std::move(target);
    st.eval_source = eval_source.size() > 0 ? std::move(eval_source) : st.source;
    st.eval_target = eval_target.size() > 0 ? std::move(eval_target) : st.target;
    st.bundle = make_bundle(st.source.dim(), config.sigma,
                            mix_seed(config.seed, detail::kTagModel));
    st.bandwidth = median_bandwidth(st.eval_target, 4096);
    st.loop_rng = make_engine(mix_seed(config.seed, detail::kTagLoop));
    return st;
}

namespace detail {

inline PairBatch draw_pairs(TrainState& st) {
    const TrainConfig& c = st.config;
    if (c.coupling_mode == CouplingMode::qdsb) {
        return sample_pairs(st.sampler, c.batch_size, st.loop_rng);
    }
    if (c.coupling_mode == CouplingMode::independent) {
        return independent_pairs(st.source.points, st.target.points, c.batch_size, st.loop_rng);
    }
    std::uniform_int_distribution<Eigen::Index> pick0(0, st.source.size() - 1);
    std::uniform_int_distribution<Eigen::Index> pick1(0, st.target.size() - 1);
    Eigen::MatrixXd b0(c.batch_size, st.source.dim());
    Eigen::MatrixXd b1(c.batch_size, st.target.dim());
    for (Eigen::Index i = 0; i < c.batch_size; ++i) b0.row(i) = st.source.points.row(pick0(st.loop_rng));
    for (Eigen::Index i = 0; i < c.batch_size; ++i) b1.row(i) = st.target.points.row(pick1(st.loop_rng));
    const MinibatchMode mode =
        c.ot_mode == OtMode::exact ? MinibatchMode::exact : MinibatchMode::entropic;
    return minibatch_ot_pairs(b0, b1, mode, c.tau, c.cost_kind, st.loop_rng);
}

/// One gradient step on both networks from a fresh batch of supervision
/// tuples; returns the batch-mean loss.
inline double train_step(TrainState& st) {
    const TrainConfig& c = st.config;
    const Eigen::Index B = c.batch_size;
    const Eigen::Index d = st.source.dim();
    const PairBatch pairs = draw_pairs(st);

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXd ts(B);
    for (Eigen::Index i = 0; i < B; ++i) {
        ts(i) = std::clamp(unit(st.loop_rng), kTimeMin, 1.0 - kTimeMin);
    }
    Eigen::MatrixXd xi(B, d);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index i = 0; i < B; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) xi(i, j) = gauss(st.loop_rng);
    }

    Eigen::MatrixXd mean(B, d), x(B, d), u_target(B, d), s_target(B, d);
    Eigen::VectorXd lam_sq(B);
    for (Eigen::Index i = 0; i < B; ++i) {
        const double t = ts(i);
        const double var = t * (1.0 - t);
        mean.row(i) = t * pairs.x1.row(i) + (1.0 - t) * pairs.x0.row(i);
        x.row(i) = mean.row(i) + c.sigma * std::sqrt(var) * xi.row(i);
        u_target.row(i) = ((1.0 - 2.0 * t) / var) * (x.row(i) - mean.row(i)) +
                          (pairs.x1.row(i) - pairs.x0.row(i));
        s_target.row(i) = (mean.row(i) - x.row(i)) / (c.sigma * c.sigma * var);
        lam_sq(i) = c.sigma * c.sigma * var;
    }

    const MlpCache v_cache = mlp_forward_cached(st.bundle.drift_net, ts, x);
    const MlpCache s_cache = mlp_forward_cached(st.bundle.score_net, ts, x);

    const Eigen::MatrixXd v_diff = v_cache.out - u_target;
    const Eigen::MatrixXd s_diff = s_cache.out - s_target;
    const double loss =
        (v_diff.rowwise().squaredNorm().array() + lam_sq.array() * s_diff.rowwise().squaredNorm().array())
            .mean();

    const Eigen::MatrixXd v_upstream = 2.0 * v_diff;
    const Eigen::MatrixXd s_upstream = 2.0 * (s_diff.array().colwise() * lam_sq.array()).matrix();

    const MlpParams v_grads = mlp_backward(st.bundle.drift_net, v_cache, v_upstream);
    const MlpParams s_grads = mlp_backward(st.bundle.score_net, s_cache, s_upstream);

    AdamConfig adam;
    adam.lr = c.lr;
    adam.weight_decay = c.weight_decay;
    adamw_step(st.bundle.drift_net, v_grads, st.bundle.drift_opt, adam);
    adamw_step(st.bundle.score_net, s_grads, st.bundle.score_opt, adam);
    return loss;
}

}  // namespace detail

/// MMD of the current model against the groundtruth target evaluation
/// samples, using the run's fixed bandwidth. Rollouts go in chunks of
/// rollout_batch source points with per-chunk noise streams keyed on
/// (seed, epoch, chunk).
inline double evaluate_model(const ModelBundle& bundle, const PointCloud& eval_source,
                             const PointCloud& eval_target, double bandwidth,
                             const TrainConfig& config, int epoch) {
    const Eigen::Index m_pred = std::min(config.eval_points, eval_source.size());
    const Eigen::Index m_ref = std::min(config.eval_points, eval_target.size());
    const std::uint64_t eval_seed =
        mix_seed(config.seed, detail::kTagEval, static_cast<std::uint64_t>(epoch));
    Eigen::MatrixXd pred(m_pred, eval_source.dim());
    Eigen::Index done = 0;
    int chunk = 0;
    while (done < m_pred) {
        const Eigen::Index rows = std::min(config.rollout_batch, m_pred - done);
        SimConfig sim;
        sim.steps = config.em_steps;
        sim.sigma = config.sigma;
        sim.mode = SimMode::sde;
        sim.seed = mix_seed(eval_seed, detail::kTagChunk, static_cast<std::uint64_t>(chunk));
        pred.middleRows(done, rows) =
            simulate(bundle, eval_source.points.middleRows(done, rows), sim);
        done += rows;
        ++chunk;
    }
    return mmd(PointCloud{std::move(pred)}, PointCloud{eval_target.points.topRows(m_ref)},
               bandwidth);
}

/// Runs the full training loop: anchor construction and plan solving,
/// periodic refresh, pair sampling, bridge supervision, one AdamW step per
/// network per iteration, and periodic evaluation with the clock paused.
inline TrainResult train(const TrainConfig& config, PointCloud source, PointCloud target,
                         PointCloud eval_source = {}, PointCloud eval_target = {},
                         const TrainHooks& hooks = {}) {
    using clock = std::chrono::steady_clock;
    TrainState st = init_train_state(config, std::move(source), std::move(target),
                                     std::move(eval_source), std::move(eval_target));
    const int steps_per_epoch = static_cast<int>(
        (st.source.size() + config.batch_size - 1) / config.batch_size);

    TrainResult result;
    result.bandwidth = st.bandwidth;
    double train_seconds = 0.0;
    auto segment_start = clock::now();

    // Anchor and plan construction count as training work.
    if (config.coupling_mode == CouplingMode::qdsb && config.epochs > 0) {
        refresh_anchors(st, mix_seed(config.seed, detail::kTagRefresh, 0));
    }

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        if (config.coupling_mode == CouplingMode::qdsb && epoch > 1 &&
            (epoch - 1) % config.refresh_epochs == 0) {
            refresh_anchors(st, mix_seed(config.seed, detail::kTagRefresh,
                                         static_cast<std::uint64_t>(st.refresh_count)));
        }
        double loss_sum = 0.0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            loss_sum += detail::train_step(st);
        }
        const double epoch_loss = loss_sum / steps_per_epoch;
        result.log.epoch_loss.push_back(epoch_loss);

        if (epoch % config.eval_every == 0 || epoch == config.epochs) {
            train_seconds +=
                std::chrono::duration<double>(clock::now() - segment_start).count();
            if (hooks.during_eval) hooks.during_eval(epoch);
            const double value = evaluate_model(st.bundle, st.eval_source, st.eval_target,
                                                st.bandwidth, config, epoch);
            result.log.rows.push_back(MetricsRow{epoch, train_seconds, value, epoch_loss});
            segment_start = clock::now();
        }
    }

    result.bundle = std::move(st.bundle);
    result.coverage_radii = std::move(st.coverage_radii);
    return result;
}

}  // namespace qdsb

#pragma once

#include "qdsb/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdsb {

enum class Activation { silu, identity };

/// Time-conditioned MLP on input [x ; t] with layers (d+1) -> hidden ->
/// hidden -> d and a smooth sigmoid-weighted linear unit after the two
/// hidden layers.
struct MlpParams {
    std::vector<Eigen::MatrixXd> W;  // fan_out x fan_in
    std::vector<Eigen::VectorXd> b;

    Eigen::Index input_dim() const { return W.front().cols(); }
    Eigen::Index output_dim() const { return W.back().rows(); }
    Eigen::Index hidden_dim() const { return W.front().rows(); }

    bool all_finite() const {
        for (const auto& w : W)
            if (!w.allFinite()) return false;
        for (const auto& v : b)
            if (!v.allFinite()) return false;
        return true;
    }
};

/// Uniform init scaled by 1/sqrt(fan_in), zero biases.
inline MlpParams mlp_init(Eigen::Index d, std::uint64_t seed, Eigen::Index hidden = 64) {
    if (d < 1) throw std::invalid_argument("mlp_init: d must be >= 1");
    if (hidden < 1) throw std::invalid_argument("mlp_init: hidden width must be >= 1");
    MlpParams p;
    std::mt19937_64 rng(seed);
    const Eigen::Index sizes[4] = {d + 1, hidden, hidden, d};
    for (int layer = 0; layer < 3; ++layer) {
        const Eigen::Index fan_in = sizes[layer];
        const Eigen::Index fan_out = sizes[layer + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> uniform(-bound, bound);
        Eigen::MatrixXd w(fan_out, fan_in);
        for (Eigen::Index i = 0; i < fan_out; ++i) {
            for (Eigen::Index j = 0; j < fan_in; ++j) w(i, j) = uniform(rng);
        }
        p.W.push_back(std::move(w));
        p.b.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return p;
}

namespace detail {

inline double silu(double v) { return v / (1.0 + std::exp(-v)); }

inline double silu_grad(double v) {
    const double s = 1.0 / (1.0 + std::exp(-v));
    return s * (1.0 + v * (1.0 - s));
}

inline void apply_activation(Eigen::MatrixXd& m, Activation act) {
    if (act == Activation::identity) return;
    m = m.unaryExpr([](double v) { return silu(v); });
}

inline Eigen::MatrixXd activation_grad(const Eigen::MatrixXd& pre, Activation act) {
    if (act == Activation::identity) return Eigen::MatrixXd::Ones(pre.rows(), pre.cols());
    return pre.unaryExpr([](double v) { return silu_grad(v); });
}

}  // namespace detail

/// Intermediate activations of a batched forward pass, kept for backprop.
/// Rows are samples.
struct MlpCache {
    Eigen::MatrixXd z0;   // m x (d+1), inputs [x ; t]
    Eigen::MatrixXd a1;   // pre-activation, layer 1
    Eigen::MatrixXd h1;
    Eigen::MatrixXd a2;   // pre-activation, layer 2
    Eigen::MatrixXd h2;
    Eigen::MatrixXd out;  // m x d
};

/// Batched forward pass; ts(i) conditions row i of xs. Products go through
/// lazyProduct so each output coefficient is an order-fixed dot product,
/// which keeps results identical across batch sizes.
inline MlpCache mlp_forward_cached(const MlpParams& p, const Eigen::VectorXd& ts,
                                   const Eigen::MatrixXd& xs,
                                   Activation act = Activation::silu) {
    if (ts.size() != xs.rows()) {
        throw std::invalid_argument("mlp_forward: time and sample counts differ");
    }
    if (xs.cols() + 1 != p.input_dim()) {
        throw std::invalid_argument("mlp_forward: input dimension mismatch");
    }
    MlpCache c;
    const Eigen::Index m = xs.rows();
    c.z0.resize(m, xs.cols() + 1);
    c.z0.leftCols(xs.cols()) = xs;
    c.z0.col(xs.cols()) = ts;
    c.a1 = c.z0.lazyProduct(p.W[0].transpose());
    c.a1.rowwise() += p.b[0].transpose();
    c.h1 = c.a1;
    detail::apply_activation(c.h1, act);
    c.a2 = c.h1.lazyProduct(p.W[1].transpose());
    c.a2.rowwise() += p.b[1].transpose();
    c.h2 = c.a2;
    detail::apply_activation(c.h2, act);
    c.out = c.h2.lazyProduct(p.W[2].transpose());
    c.out.rowwise() += p.b[2].transpose();
    return c;
}

inline Eigen::MatrixXd mlp_forward_batch(const MlpParams& p, const Eigen::VectorXd& ts,
                                         const Eigen::MatrixXd& xs,
                                         Activation act = Activation::silu) {
    return mlp_forward_cached(p, ts, xs, act).out;
}

inline Eigen::VectorXd mlp_forward(const MlpParams& p, double t, const Eigen::VectorXd& x,
                                   Activation act = Activation::silu) {
    Eigen::VectorXd ts(1);
    ts(0) = t;
    return mlp_forward_batch(p, ts, x.transpose(), act).row(0).transpose();
}

/// Analytic gradients of the batch-mean loss with respect to every
/// parameter; upstream(i, :) is dLoss_i/dout_i for sample i.
inline MlpParams mlp_backward(const MlpParams& p, const MlpCache& cache,
                              const Eigen::MatrixXd& upstream,
                              Activation act = Activation::silu) {
    if (upstream.rows() != cache.out.rows() || upstream.cols() != cache.out.cols()) {
        throw std::invalid_argument("mlp_backward: upstream gradient shape mismatch");
    }
    const double inv_m = 1.0 / static_cast<double>(cache.out.rows());
    MlpParams g;
    g.W.resize(3);
    g.b.resize(3);
    const Eigen::MatrixXd d3 = upstream;
    g.W[2] = inv_m * d3.transpose() * cache.h2;
    g.b[2] = inv_m * d3.colwise().sum().transpose();
    const Eigen::MatrixXd d2 =
        (d3 * p.W[2]).cwiseProduct(detail::activation_grad(cache.a2, act));
    g.W[1] = inv_m * d2.transpose() * cache.h1;
    g.b[1] = inv_m * d2.colwise().sum().transpose();
    const Eigen::MatrixXd d1 =
        (d2 * p.W[1]).cwiseProduct(detail::activation_grad(cache.a1, act));
    g.W[0] = inv_m * d1.transpose() * cache.z0;
    g.b[0] = inv_m * d1.colwise().sum().transpose();
    return g;
}

/// First/second moment accumulators plus the shared step counter.
struct AdamState {
    std::vector<Eigen::MatrixXd> mW, vW;
    std::vector<Eigen::VectorXd> mb, vb;
    long step = 0;
};

inline AdamState make_adam_state(const MlpParams& p) {
    AdamState s;
    for (const auto& w : p.W) {
        s.mW.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
        s.vW.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    }
    for (const auto& v : p.b) {
        s.mb.push_back(Eigen::VectorXd::Zero(v.size()));
        s.vb.push_back(Eigen::VectorXd::Zero(v.size()));
    }
    return s;
}

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-2;
};

/// Bias-corrected Adam update with decoupled weight decay:
///   theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta).
inline void adamw_step(MlpParams& p, const MlpParams& grads, AdamState& state,
                       const AdamConfig& cfg) {
    if (!(cfg.lr > 0.0)) throw std::invalid_argument("adamw_step: lr must be positive");
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    const auto update = [&](auto& theta, const auto& g, auto& m, auto& v) {
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        const auto m_hat = m / bc1;
        const auto v_hat = v / bc2;
        theta -= cfg.lr * (m_hat.array() / (v_hat.array().sqrt() + cfg.eps) +
                           cfg.weight_decay * theta.array())
                     .matrix();
    };
    for (std::size_t l = 0; l < p.W.size(); ++l) update(p.W[l], grads.W[l], state.mW[l], state.vW[l]);
    for (std::size_t l = 0; l < p.b.size(); ++l) update(p.b[l], grads.b[l], state.mb[l], state.vb[l]);
}

/// Drift and score networks plus their optimizer states.
struct ModelBundle {
    MlpParams drift_net;
    MlpParams score_net;
    AdamState drift_opt;
    AdamState score_opt;
    double sigma = 0.25;

    Eigen::Index data_dim() const { return drift_net.output_dim(); }
};

inline ModelBundle make_bundle(Eigen::Index d, double sigma, std::uint64_t seed,
                               Eigen::Index hidden = 64) {
    ModelBundle b;
    b.drift_net = mlp_init(d, mix_seed(seed, 0x6472ULL), hidden);
    b.score_net = mlp_init(d, mix_seed(seed, 0x7363ULL), hidden);
    b.drift_opt = make_adam_state(b.drift_net);
    b.score_opt = make_adam_state(b.score_net);
    b.sigma = sigma;
    return b;
}

inline constexpr const char* kCheckpointMagic = "qdsb-checkpoint-v1";

namespace detail {

inline void write_params(std::ostream& out, const MlpParams& p) {
    char buf[64];
    for (std::size_t l = 0; l < p.W.size(); ++l) {
        for (Eigen::Index i = 0; i < p.W[l].rows(); ++i) {
            for (Eigen::Index j = 0; j < p.W[l].cols(); ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", p.W[l](i, j));
                out << buf << '\n';
            }
        }
        for (Eigen::Index i = 0; i < p.b[l].size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", p.b[l](i));
            out << buf << '\n';
        }
    }
}

inline void read_params(std::istream& in, MlpParams& p) {
    std::string line;
    const auto next = [&]() {
        if (!std::getline(in, line)) {
            throw std::runtime_error("checkpoint: truncated parameter block");
        }
        return std::strtod(line.c_str(), nullptr);
    };
    for (std::size_t l = 0; l < p.W.size(); ++l) {
        for (Eigen::Index i = 0; i < p.W[l].rows(); ++i) {
            for (Eigen::Index j = 0; j < p.W[l].cols(); ++j) p.W[l](i, j) = next();
        }
        for (Eigen::Index i = 0; i < p.b[l].size(); ++i) p.b[l](i) = next();
    }
}

}  // namespace detail

/// Textual checkpoint: magic line, then "d hidden sigma", then the raw
/// parameters of the drift and score networks at 17 significant digits.
/// Optimizer state is not persisted.
inline void save_checkpoint(const ModelBundle& bundle, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", bundle.sigma);
    out << kCheckpointMagic << '\n'
        << bundle.data_dim() << ' ' << bundle.drift_net.hidden_dim() << ' ' << buf << '\n';
    detail::write_params(out, bundle.drift_net);
    detail::write_params(out, bundle.score_net);
    if (!out) throw std::runtime_error("save_checkpoint: write failed: " + path);
}

inline ModelBundle load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::string magic;
    if (!std::getline(in, magic) || magic != kCheckpointMagic) {
        throw std::runtime_error("load_checkpoint: unrecognized header in " + path);
    }
    Eigen::Index d = 0, hidden = 0;
    double sigma = 0.0;
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("load_checkpoint: missing header");
    std::istringstream hs(header);
    if (!(hs >> d >> hidden >> sigma) || d < 1 || hidden < 1) {
        throw std::runtime_error("load_checkpoint: malformed header in " + path);
    }
    ModelBundle b = make_bundle(d, sigma, 0, hidden);
    detail::read_params(in, b.drift_net);
    detail::read_params(in, b.score_net);
    b.drift_opt = make_adam_state(b.drift_net);
    b.score_opt = make_adam_state(b.score_net);
    return b;
}

}  // namespace qdsb

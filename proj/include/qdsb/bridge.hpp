#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <stdexcept>

namespace qdsb {

/// Times are clamped to [kTimeMin, 1 - kTimeMin] to stay away from the
/// 1/(t(1-t)) singularities of the drift and score targets.
inline constexpr double kTimeMin = 1e-3;

inline void require_interior_time(double t, const char* where) {
    if (!(t > 0.0 && t < 1.0)) {
        throw std::invalid_argument(std::string(where) + ": t must lie in (0,1)");
    }
}

/// Draws x from the bridge at time t: mean t*x1 + (1-t)*x0, standard
/// deviation sigma*sqrt(t(1-t)) per coordinate. sigma = 0 returns the mean.
inline Eigen::VectorXd sample_bridge_point(const Eigen::VectorXd& x0, const Eigen::VectorXd& x1,
                                           double t, double sigma, std::mt19937_64& rng) {
    require_interior_time(t, "sample_bridge_point");
    if (sigma < 0.0) throw std::invalid_argument("sample_bridge_point: sigma must be >= 0");
    Eigen::VectorXd mean = t * x1 + (1.0 - t) * x0;
    if (sigma == 0.0) return mean;
    const double sd = sigma * std::sqrt(t * (1.0 - t));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index i = 0; i < mean.size(); ++i) mean(i) += sd * gauss(rng);
    return mean;
}

inline Eigen::VectorXd sample_bridge_point(const Eigen::VectorXd& x0, const Eigen::VectorXd& x1,
                                           double t, double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sample_bridge_point(x0, x1, t, sigma, rng);
}

/// Closed-form drift regression target
///   u(x | x0, x1) = (1-2t)/(t(1-t)) * (x - (t*x1 + (1-t)*x0)) + (x1 - x0).
inline Eigen::VectorXd drift_target(const Eigen::VectorXd& x, const Eigen::VectorXd& x0,
                                    const Eigen::VectorXd& x1, double t) {
    require_interior_time(t, "drift_target");
    const double coeff = (1.0 - 2.0 * t) / (t * (1.0 - t));
    return coeff * (x - (t * x1 + (1.0 - t) * x0)) + (x1 - x0);
}

/// Closed-form score regression target
///   s(x | x0, x1) = (t*x1 + (1-t)*x0 - x) / (sigma^2 t (1-t)).
inline Eigen::VectorXd score_target(const Eigen::VectorXd& x, const Eigen::VectorXd& x0,
                                    const Eigen::VectorXd& x1, double t, double sigma) {
    require_interior_time(t, "score_target");
    if (!(sigma > 0.0)) throw std::invalid_argument("score_target: sigma must be positive");
    return (t * x1 + (1.0 - t) * x0 - x) / (sigma * sigma * t * (1.0 - t));
}

/// Score-loss weight lambda(t) = sigma * sqrt(t(1-t)); with this choice
/// lambda(t) * score_target equals minus the standard normal draw used by
/// the bridge sampler, so the weighted score loss is unit scale in t.
inline double lambda_weight(double t, double sigma) {
    require_interior_time(t, "lambda_weight");
    return sigma * std::sqrt(t * (1.0 - t));
}

/// One supervision tuple for the simulation-free loss.
struct BridgeSample {
    double t = 0.5;
    Eigen::VectorXd x0;
    Eigen::VectorXd x1;
    Eigen::VectorXd x;
    Eigen::VectorXd u_target;
    Eigen::VectorXd s_target;
    Eigen::VectorXd xi;  // the standard normal draw behind x
    double lam = 0.0;
    double sigma = 0.0;
};

inline BridgeSample make_bridge_sample(const Eigen::VectorXd& x0, const Eigen::VectorXd& x1,
                                       double t, double sigma, std::mt19937_64& rng) {
    require_interior_time(t, "make_bridge_sample");
    if (!(sigma > 0.0)) throw std::invalid_argument("make_bridge_sample: sigma must be positive");
    BridgeSample s;
    s.t = t;
    s.x0 = x0;
    s.x1 = x1;
    s.sigma = sigma;
    s.xi.resize(x0.size());
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index i = 0; i < s.xi.size(); ++i) s.xi(i) = gauss(rng);
    const double sd = sigma * std::sqrt(t * (1.0 - t));
    s.x = t * x1 + (1.0 - t) * x0 + sd * s.xi;
    s.u_target = drift_target(s.x, x0, x1, t);
    s.s_target = score_target(s.x, x0, x1, t, sigma);
    s.lam = lambda_weight(t, sigma);
    return s;
}

struct LossTerms {
    double drift_loss = 0.0;
    double score_loss = 0.0;
    double total = 0.0;
};

/// Per-sample loss: ||v - u||^2 + lambda(t)^2 ||s - score||^2.
inline LossTerms loss_terms(const Eigen::VectorXd& v_pred, const Eigen::VectorXd& s_pred,
                            const BridgeSample& sample) {
    if (v_pred.size() != sample.u_target.size() || s_pred.size() != sample.s_target.size()) {
        throw std::invalid_argument("loss_terms: dimension mismatch");
    }
    LossTerms out;
    out.drift_loss = (v_pred - sample.u_target).squaredNorm();
    out.score_loss = sample.lam * sample.lam * (s_pred - sample.s_target).squaredNorm();
    out.total = out.drift_loss + out.score_loss;
    return out;
}

}  // namespace qdsb

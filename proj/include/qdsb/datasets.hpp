#pragma once

#include "qdsb/point_cloud.hpp"
#include "qdsb/rng.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace qdsb {

/// 8 Gaussian blobs, means equally spaced on a circle of radius 3
/// starting at angle 0, isotropic noise std 0.3.
inline PointCloud gen_eight_gaussians(Eigen::Index n, std::uint64_t seed) {
    if (n < 0) throw std::invalid_argument("gen_eight_gaussians: n must be >= 0");
    constexpr double radius = 3.0;
    constexpr double noise_std = 0.3;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, 7);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd pts(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int c = pick(rng);
        const double angle = 2.0 * std::numbers::pi * c / 8.0;
        pts(i, 0) = radius * std::cos(angle) + noise_std * gauss(rng);
        pts(i, 1) = radius * std::sin(angle) + noise_std * gauss(rng);
    }
    return PointCloud{std::move(pts)};
}

/// Two interleaved half-circle arcs with noise std 0.05, shifted to zero
/// mean (analytic center (0.5, 0.25)) and scaled by 3.
inline PointCloud gen_moons(Eigen::Index n, std::uint64_t seed) {
    if (n < 0) throw std::invalid_argument("gen_moons: n must be >= 0");
    constexpr double noise_std = 0.05;
    constexpr double scale = 3.0;
    constexpr double center_x = 0.5;
    constexpr double center_y = 0.25;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> arc(0, 1);
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd pts(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int a = arc(rng);
        const double theta = angle(rng);
        double x, y;
        if (a == 0) {
            x = std::cos(theta);
            y = std::sin(theta);
        } else {
            x = 1.0 - std::cos(theta);
            y = 0.5 - std::sin(theta);
        }
        x += noise_std * gauss(rng);
        y += noise_std * gauss(rng);
        pts(i, 0) = scale * (x - center_x);
        pts(i, 1) = scale * (y - center_y);
    }
    return PointCloud{std::move(pts)};
}

/// n i.i.d. standard normal samples in d dimensions.
inline PointCloud gen_gaussian(Eigen::Index n, std::uint64_t seed, Eigen::Index d) {
    if (n < 0) throw std::invalid_argument("gen_gaussian: n must be >= 0");
    if (d < 1) throw std::invalid_argument("gen_gaussian: d must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd pts(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            pts(i, j) = gauss(rng);
        }
    }
    return PointCloud{std::move(pts)};
}

}  // namespace qdsb

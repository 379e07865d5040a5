#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hybridsde/model.hpp"
#include "hybridsde/model_io.hpp"

namespace testing {

inline std::filesystem::path config_path(const std::string& name) {
    return std::filesystem::path(HSDE_CONFIG_DIR) / name;
}

inline hsde::HybridModel shipped_model(const std::string& name) {
    return hsde::model_from_json(hsde::load_json_file(config_path(name)).at("model"));
}

inline hsde::HybridModel example_5_1() { return shipped_model("example_5_1.json"); }
inline hsde::HybridModel example_5_2() { return shipped_model("example_5_2.json"); }

/// One-state Brownian motion with drift on [0, a] started at u.
inline hsde::HybridModel brownian(double mu, double sigma, double u = 0.5, double a = 1.0, double q = 0.0) {
    hsde::ModelParams p;
    p.mu = {hsde::PolyExpr{mu}};
    p.sigma = {hsde::PolyExpr{sigma}};
    p.lambda = {{hsde::PolyExpr{0.0}}};
    p.band_high = a;
    p.start_level = u;
    p.kill_rate = q;
    return hsde::HybridModel(std::move(p));
}

/// Exit probability at a for Brownian motion with drift, from the scale function.
inline double scale_exit_high(double mu, double sigma, double u, double a) {
    if (mu == 0.0) return u / a;
    const double k = 2.0 * mu / (sigma * sigma);
    return -std::expm1(-k * u) / -std::expm1(-k * a);
}

/// Composite Simpson rule with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, int n = 2000) {
    const double h = (hi - lo) / n;
    double s = f(lo) + f(hi);
    for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f(lo + k * h);
    return s * h / 3.0;
}

/// Expected time spent in (0, b] before leaving (0, a), from the Green's
/// function of Brownian motion with drift mu and unit-free sigma.
inline double green_occupation(double mu, double sigma, double u, double a, double b) {
    const double k = 2.0 * mu / (sigma * sigma);
    auto s = [&](double x) { return k == 0.0 ? x : -std::expm1(-k * x) / k; };
    auto density = [&](double y) {
        const double lo = std::min(u, y);
        const double hi = std::max(u, y);
        return 2.0 * s(lo) * (s(a) - s(hi)) / s(a) * std::exp(k * y) / (sigma * sigma);
    };
    if (b <= u) return simpson(density, 0.0, b);
    return simpson(density, 0.0, u) + simpson(density, u, b);
}

/// Dense stationary vector of a small generator by Gaussian elimination with
/// partial pivoting on G^T, last equation replaced by the normalization.
inline std::vector<double> dense_stationary(const std::vector<std::vector<double>>& g) {
    const std::size_t n = g.size();
    std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) a[r][c] = g[c][r];
    }
    for (std::size_t c = 0; c < n; ++c) a[n - 1][c] = 1.0;
    a[n - 1][n] = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        }
        std::swap(a[col], a[piv]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c <= n; ++c) a[r][c] -= f * a[col][c];
        }
    }
    std::vector<double> pi(n);
    for (std::size_t r = 0; r < n; ++r) pi[r] = a[r][n] / a[r][r];
    return pi;
}

/// Random valid model: p states, polynomial drift of degree <= 2, positive
/// constant-plus-linear diffusion, off-diagonal intensities c0 + c1 x with
/// c0, c0 + c1 a >= 0 (so they stay nonnegative on [0, a]).
inline hsde::HybridModel random_model(std::mt19937_64& gen, std::size_t p, double a = 1.0) {
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    std::uniform_real_distribution<double> pos(0.0, 3.0);
    std::uniform_real_distribution<double> level(0.1, 0.9);
    hsde::ModelParams params;
    params.band_high = a;
    params.start_level = level(gen) * a;
    params.start_state = gen() % p;
    params.lambda.assign(p, std::vector<hsde::PolyExpr>(p));
    for (std::size_t i = 0; i < p; ++i) {
        params.mu.push_back(hsde::PolyExpr{coef(gen), coef(gen), coef(gen)});
        params.sigma.push_back(hsde::PolyExpr{0.5 + pos(gen) / 3.0, 0.2 * coef(gen)});
        double c0_sum = 0.0;
        double c1_sum = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            if (j == i) continue;
            const double at0 = pos(gen);
            const double ata = pos(gen);
            const double c1 = (ata - at0) / a;
            params.lambda[i][j] = hsde::PolyExpr{at0, c1};
            c0_sum += at0;
            c1_sum += c1;
        }
        params.lambda[i][i] = hsde::PolyExpr{-c0_sum, -c1_sum};
    }
    return hsde::HybridModel(std::move(params));
}

}  // namespace testing

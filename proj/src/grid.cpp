#include "hybridsde/grid.hpp"

#include <algorithm>
#include <cmath>

#include "hybridsde/csv.hpp"
#include "hybridsde/errors.hpp"

namespace hsde {

SpaceGrid::SpaceGrid(double u, double a, int M) : M_(M) {
    if (M < 1) throw ModelError("grid needs M >= 1");
    if (!(u > 0.0 && u < a)) throw ModelError("grid start level u must lie strictly inside (0, a)");
    levels_.resize(static_cast<std::size_t>(2 * M + 1));
    for (int k = 0; k <= M; ++k) levels_[static_cast<std::size_t>(k)] = u * k / M;
    for (int k = 1; k <= M; ++k) levels_[static_cast<std::size_t>(M + k)] = u + (a - u) * k / M;
    levels_.front() = 0.0;
    levels_[static_cast<std::size_t>(M)] = u;
    levels_.back() = a;
}

std::size_t SpaceGrid::band_of(double x) const noexcept {
    auto it = std::upper_bound(levels_.begin(), levels_.end(), x);
    if (it == levels_.begin()) return 0;
    const auto b = static_cast<std::size_t>(it - levels_.begin()) - 1;
    return std::min(b, bands() - 1);
}

SpaceGrid build_grid(double u, double a, int M) { return SpaceGrid(u, a, M); }

std::string_view to_string(SamplingRule rule) noexcept {
    switch (rule) {
        case SamplingRule::left_endpoint: return "left_endpoint";
        case SamplingRule::midpoint: return "midpoint";
        case SamplingRule::min_abs: return "min_abs";
    }
    return "left_endpoint";
}

SamplingRule sampling_rule_from_string(std::string_view name) {
    if (name == "left_endpoint") return SamplingRule::left_endpoint;
    if (name == "midpoint") return SamplingRule::midpoint;
    if (name == "min_abs") return SamplingRule::min_abs;
    throw ModelError("unknown sampling rule '" + std::string(name) + "'");
}

namespace {

// Smallest |f| over [lo, hi] carrying the sign of f(lo); zero when f changes
// sign inside the band.
double min_abs_value(const PolyExpr& f, double lo, double hi) {
    const double left = f(lo);
    double best = std::abs(left);
    bool sign_change = false;
    for (double x : f.extremum_candidates(lo, hi)) {
        const double v = f(x);
        best = std::min(best, std::abs(v));
        if (v != 0.0 && left != 0.0 && std::signbit(v) != std::signbit(left)) sign_change = true;
    }
    if (sign_change || !f.roots_in(lo, hi, 64).empty()) return 0.0;
    return std::copysign(best, left);
}

double sample_band(const PolyExpr& f, double lo, double hi, SamplingRule rule) {
    switch (rule) {
        case SamplingRule::left_endpoint: return f(lo);
        case SamplingRule::midpoint: return f(0.5 * (lo + hi));
        case SamplingRule::min_abs: return min_abs_value(f, lo, hi);
    }
    return f(lo);
}

}  // namespace

GridApproximation build_approximation(const HybridModel& model, const SpaceGrid& grid,
                                      SamplingRule rule) {
    if (std::abs(grid.band_high() - model.band_high()) > 0.0) {
        throw ModelError("grid upper level does not match the model band");
    }
    GridApproximation approx{grid};
    approx.rule = rule;
    approx.uniformization_rate = model.uniformization_rate();
    approx.start_state = model.start_state();
    approx.kill_rate = model.kill_rate();

    const std::size_t p = model.states();
    const std::size_t nb = grid.bands();
    approx.mu_hat.assign(p, std::vector<double>(nb));
    approx.sigma_hat.assign(p, std::vector<double>(nb));
    approx.lambda_hat.reserve(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        const double lo = grid.band_left(b);
        const double hi = grid.band_right(b);
        for (std::size_t i = 0; i < p; ++i) {
            approx.mu_hat[i][b] = sample_band(model.mu(i), lo, hi, rule);
            approx.sigma_hat[i][b] = sample_band(model.sigma(i), lo, hi, rule);
        }
        const double x_gen = rule == SamplingRule::midpoint ? 0.5 * (lo + hi) : lo;
        approx.lambda_hat.push_back(eval_generator(model, x_gen));
    }
    return approx;
}

double coefficient_rate_bound(double n, double beta, double gamma_rate) {
    return std::pow(std::log(n), beta) * std::pow(n, -gamma_rate);
}

double row_sum_norm(const Eigen::MatrixXd& m) {
    return m.rows() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
}

ApproximationReport approximation_report(const HybridModel& model, const GridApproximation& approx,
                                         double n, const RateBoundParams& bounds,
                                         int samples_per_band) {
    if (!(n >= 2.0)) throw ModelError("approximation index n must be >= 2");
    const std::size_t p = model.states();
    const SpaceGrid& grid = approx.grid;
    ApproximationReport r;
    r.mu_sup_error.assign(p, 0.0);
    r.sigma_sup_error.assign(p, 0.0);
    r.mu_magnitude_excess = -INFINITY;
    r.sigma_magnitude_excess = -INFINITY;

    Eigen::MatrixXd exact(p, p);
    std::vector<double> row(p);
    for (std::size_t b = 0; b < grid.bands(); ++b) {
        const double lo = grid.band_left(b);
        const double w = grid.band_width(b);
        // k == samples_per_band is the left limit at the band's right end.
        for (int k = 0; k <= samples_per_band; ++k) {
            const double x = lo + w * k / samples_per_band;
            for (std::size_t i = 0; i < p; ++i) {
                const double mu = model.drift(i, x);
                const double sg = model.diffusion(i, x);
                const double mh = approx.mu_hat[i][b];
                const double sh = approx.sigma_hat[i][b];
                r.mu_sup_error[i] = std::max(r.mu_sup_error[i], std::abs(mu - mh));
                r.sigma_sup_error[i] = std::max(r.sigma_sup_error[i], std::abs(sg - sh));
                r.mu_magnitude_excess = std::max(r.mu_magnitude_excess, std::abs(mh) - std::abs(mu));
                r.sigma_magnitude_excess = std::max(r.sigma_magnitude_excess, std::abs(sh) - std::abs(sg));
                model.generator_row(i, x, row);
                for (std::size_t j = 0; j < p; ++j) {
                    exact(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
                }
            }
            r.lambda_sup = std::max(r.lambda_sup, row_sum_norm(approx.lambda_hat[b] - exact));
        }
    }
    for (std::size_t i = 0; i < p; ++i) {
        r.mu_sup = std::max(r.mu_sup, r.mu_sup_error[i]);
        r.sigma_sup = std::max(r.sigma_sup, r.sigma_sup_error[i]);
    }
    r.coefficient_bound = coefficient_rate_bound(n, bounds.beta, bounds.gamma_rate);
    r.intensity_bound = bounds.G / std::log(n);
    r.coefficient_bound_holds = r.mu_sup <= r.coefficient_bound && r.sigma_sup <= r.coefficient_bound;
    r.intensity_bound_holds = r.lambda_sup <= r.intensity_bound;
    return r;
}

std::string approximation_csv(const GridApproximation& approx) {
    CsvWriter csv({"band_index", "zeta_left", "zeta_right", "state", "mu_hat", "sigma_hat"});
    for (std::size_t b = 0; b < approx.grid.bands(); ++b) {
        for (std::size_t i = 0; i < approx.states(); ++i) {
            csv.field(b + 1).field(approx.grid.band_left(b)).field(approx.grid.band_right(b));
            csv.field(i + 1).field(approx.mu_hat[i][b]).field(approx.sigma_hat[i][b]);
            csv.end_row();
        }
    }
    return csv.str();
}

std::string lambda_hat_csv(const GridApproximation& approx) {
    CsvWriter csv({"band_index", "zeta_left", "zeta_right", "from", "to", "rate"});
    const auto p = static_cast<Eigen::Index>(approx.states());
    for (std::size_t b = 0; b < approx.grid.bands(); ++b) {
        for (Eigen::Index i = 0; i < p; ++i) {
            for (Eigen::Index j = 0; j < p; ++j) {
                csv.field(b + 1).field(approx.grid.band_left(b)).field(approx.grid.band_right(b));
                csv.field(static_cast<long long>(i + 1)).field(static_cast<long long>(j + 1));
                csv.field(approx.lambda_hat[b](i, j));
                csv.end_row();
            }
        }
    }
    return csv.str();
}

}  // namespace hsde

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hybridsde/model.hpp"

namespace hsde {

/// Levels zeta_{-M} = 0 < ... < zeta_0 = u < ... < zeta_M = a, built from two
/// uniform half-grids. Bands are indexed 0..2M-1 internally; band b spans
/// [zeta_{b-M}, zeta_{b-M+1}) and corresponds to band m = b - M + 1.
class SpaceGrid {
public:
    SpaceGrid(double u, double a, int M);

    int M() const noexcept { return M_; }
    std::span<const double> levels() const noexcept { return levels_; }
    /// zeta_m for m in [-M, M].
    double level(int m) const { return levels_.at(static_cast<std::size_t>(m + M_)); }
    std::size_t bands() const noexcept { return levels_.size() - 1; }
    double band_left(std::size_t b) const { return levels_.at(b); }
    double band_right(std::size_t b) const { return levels_.at(b + 1); }
    double band_width(std::size_t b) const { return band_right(b) - band_left(b); }
    double start_level() const noexcept { return levels_[static_cast<std::size_t>(M_)]; }
    double band_high() const noexcept { return levels_.back(); }

    /// Band containing x under right-continuity; levels outside [0, a] map to
    /// the first or last band.
    std::size_t band_of(double x) const noexcept;

private:
    int M_;
    std::vector<double> levels_;
};

SpaceGrid build_grid(double u, double a, int M);

enum class SamplingRule { left_endpoint, midpoint, min_abs };

std::string_view to_string(SamplingRule rule) noexcept;
SamplingRule sampling_rule_from_string(std::string_view name);

/// Piecewise-constant drift, diffusion and generator over the bands of a grid.
struct GridApproximation {
    SpaceGrid grid;
    SamplingRule rule = SamplingRule::left_endpoint;
    std::vector<std::vector<double>> mu_hat{};     // [state][band]
    std::vector<std::vector<double>> sigma_hat{};  // [state][band]
    std::vector<Eigen::MatrixXd> lambda_hat{};     // [band], p x p
    double uniformization_rate = 0.0;            // shared with the source model
    std::size_t start_state = 0;
    double kill_rate = 0.0;

    std::size_t states() const noexcept { return mu_hat.size(); }
    double band_high() const noexcept { return grid.band_high(); }
    double start_level() const noexcept { return grid.start_level(); }

    double drift(std::size_t i, double x) const noexcept { return mu_hat[i][grid.band_of(x)]; }
    double diffusion(std::size_t i, double x) const noexcept { return sigma_hat[i][grid.band_of(x)]; }
    const Eigen::MatrixXd& generator_at(double x) const noexcept { return lambda_hat[grid.band_of(x)]; }
};

/// Samples the model on each band. Drift and diffusion follow `rule`; the
/// generator is sampled at the left endpoint (midpoint under `midpoint`).
/// Throws ModelError if the model's generator is invalid at a sample point.
GridApproximation build_approximation(const HybridModel& model, const SpaceGrid& grid,
                                      SamplingRule rule = SamplingRule::left_endpoint);

/// Exponents and constant for the rate bounds (log n)^beta n^-gamma_rate and
/// G / log n. The paper-level theory only asserts they exist, so they are inputs.
struct RateBoundParams {
    double beta = 0.0;
    double gamma_rate = 0.5;
    double G = 1.0;
};

struct ApproximationReport {
    std::vector<double> mu_sup_error;     // per state, sup_x |mu - mu_hat|
    std::vector<double> sigma_sup_error;  // per state
    double mu_sup = 0.0;
    double sigma_sup = 0.0;
    double lambda_sup = 0.0;              // sup_z max_i sum_j |Lambda_hat - Lambda|_ij
    double coefficient_bound = 0.0;       // (log n)^beta n^-gamma_rate
    double intensity_bound = 0.0;         // G / log n
    bool coefficient_bound_holds = false;
    bool intensity_bound_holds = false;
    // Largest sampled excess |mu_hat| - |mu| (resp. sigma); <= 0 means the
    // magnitude bound |mu_hat| <= |mu| holds on every sample.
    double mu_magnitude_excess = 0.0;
    double sigma_magnitude_excess = 0.0;
};

/// Dense-sampled approximation errors and the rate-bound checks.
ApproximationReport approximation_report(const HybridModel& model, const GridApproximation& approx,
                                         double n, const RateBoundParams& bounds = {},
                                         int samples_per_band = 64);

/// (log n)^beta * n^-gamma_rate.
double coefficient_rate_bound(double n, double beta, double gamma_rate);

/// Max row sum of absolute values.
double row_sum_norm(const Eigen::MatrixXd& m);

/// CSV: band_index,zeta_left,zeta_right,state,mu_hat,sigma_hat (1-based band and state).
std::string approximation_csv(const GridApproximation& approx);
/// CSV: band_index,zeta_left,zeta_right,from,to,rate.
std::string lambda_hat_csv(const GridApproximation& approx);

}  // namespace hsde

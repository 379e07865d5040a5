#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hybridsde/dynamics.hpp"
#include "hybridsde/rng.hpp"

namespace hsde {

struct TrajectoryPoint {
    double t = 0.0;
    double x = 0.0;
    std::size_t state = 0;
};

enum class ExitKind { crossed_low, crossed_high, killed, horizon };

std::string_view to_string(ExitKind kind) noexcept;

struct SimOptions {
    double dt = 1e-3;
    std::optional<double> horizon;          // default_horizon() when empty
    std::optional<double> kill_rate;        // the dynamics' q when empty
    bool record_path = false;
    // Test each Euler step for an unobserved crossing of 0 or a with the
    // Brownian-bridge probability exp(-2 d0 d1 / (sigma^2 h)).
    bool bridge_correction = false;
    // Levels b for which time spent with J = j and 0 < X <= b is accumulated
    // (trapezoidal rule over each Euler step).
    std::vector<double> occupation_levels;
};

/// One path of (J, X) built by the uniformization construction.
struct PathSample {
    std::vector<double> epochs;             // theta_0 = 0 and every later arrival
    std::vector<std::size_t> states;        // J on [theta_l, theta_{l+1})
    std::vector<double> epoch_levels;       // X(theta_l)
    std::vector<TrajectoryPoint> trajectory;  // only when record_path
    std::size_t jumps = 0;                  // epochs at which J actually changed
    ExitKind exit = ExitKind::horizon;
    double exit_time = 0.0;
    double exit_level = 0.0;
    std::size_t exit_state = 0;
    std::vector<std::vector<double>> occupation;  // [level][state]
};

/// Horizon used when none is given: 10 a^2 / (smallest positive sigma^2);
/// 10 a / (smallest positive |mu|) when sigma vanishes; 10 a otherwise.
double default_horizon(const Dynamics& dyn);

/// Euler-Maruyama in a frozen state i over [0, duration]: full steps of dt
/// followed by one partial step. Piecewise-constant coefficients are re-read
/// at the current level on every step. Returns the grid points including t=0.
std::vector<TrajectoryPoint> euler_segment(const Dynamics& dyn, std::size_t i, double x0,
                                           double duration, double dt, std::mt19937_64& gen);

/// Index k with U in [C(k), C(k) + D(k)) for D = e_i + row / gamma.
std::size_t select_jump(std::size_t i, std::span<const double> row, double gamma, double u) noexcept;

/// Simulates (J, X) from (start_state, start_level) until the first of: an
/// Euler grid point strictly below 0 or above a, the exponential kill time
/// e_q, or the horizon.
PathSample simulate_hybrid(const Dynamics& dyn, const RngStream& rng, const SimOptions& options = {});

struct CoupledPoint {
    double t = 0.0;
    double x = 0.0;
    double x_hat = 0.0;
    std::size_t state = 0;
    std::size_t state_hat = 0;
    int tracker = 0;
};

/// Joint path of (J, X) and (J_hat, X_hat) under one Poisson clock, one
/// U_l sequence and one Brownian path.
struct CoupledSample {
    std::vector<double> epochs;
    std::vector<std::size_t> states;
    std::vector<std::size_t> states_hat;
    std::vector<int> tracker;                 // H_hat_l in {0, 1, 2}
    std::optional<std::size_t> decouple_epoch;  // first l with H_hat_l = 1
    double sup_distance = 0.0;                // sup over the Euler grid of |X - X_hat|
    std::vector<CoupledPoint> trajectory;     // only when record_path
};

struct CoupledOptions {
    double dt = 1e-3;
    bool record_path = false;
};

/// Runs the coupled construction up to `horizon` (no band stopping). The two
/// dynamics must share the uniformization rate. Throws NumericalError if a
/// decoupling is declared with an empty residual vector.
CoupledSample simulate_coupled(const HybridModel& model, const GridApproximation& approx,
                               const RngStream& rng, double horizon, const CoupledOptions& options = {});

/// CSV t,J,X (1-based J) of a recorded path.
std::string path_csv(const PathSample& path);
/// CSV t,J,X,J_hat,X_hat,H of a recorded coupled path.
std::string coupled_path_csv(const CoupledSample& path);

}  // namespace hsde

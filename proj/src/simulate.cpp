#include "hybridsde/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hybridsde/csv.hpp"
#include "hybridsde/errors.hpp"

namespace hsde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Step end times for an Euler walk over [t0, t1]: t0 + k dt, then t1. A
// trailing sliver shorter than 1e-9 dt is folded into the last full step.
struct StepPlan {
    double t0;
    double t1;
    double dt;
    long steps;

    StepPlan(double start, double stop, double step) : t0(start), t1(stop), dt(step) {
        const double span = stop - start;
        if (!(span > 0.0)) {
            steps = 0;
            return;
        }
        const auto full = static_cast<long>(std::floor(span / dt));
        const double rem = span - static_cast<double>(full) * dt;
        steps = full + (rem > 1e-9 * dt ? 1 : 0);
        if (steps == 0) steps = 1;
    }

    double end_of(long k) const noexcept { return k == steps ? t1 : t0 + static_cast<double>(k) * dt; }
};

void check_dt(double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ModelError("time step dt must be positive");
}

}  // namespace

void Dynamics::generator_row(std::size_t i, double x, std::span<double> out) const noexcept {
    const double xc = std::clamp(x, 0.0, band_high());
    if (auto* m = std::get_if<0>(&source_)) {
        (*m)->generator_row(i, xc, out);
        return;
    }
    const Eigen::MatrixXd& g = std::get<1>(source_)->generator_at(xc);
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
}

double Dynamics::min_positive_variance() const {
    double best = kInf;
    if (auto* m = std::get_if<0>(&source_)) {
        const HybridModel& model = **m;
        for (std::size_t i = 0; i < model.states(); ++i) {
            for (int k = 0; k <= 1000; ++k) {
                const double s = model.diffusion(i, model.band_high() * k / 1000);
                if (s * s > 0.0) best = std::min(best, s * s);
            }
        }
    } else {
        for (const auto& row : std::get<1>(source_)->sigma_hat) {
            for (double s : row) {
                if (s * s > 0.0) best = std::min(best, s * s);
            }
        }
    }
    return std::isfinite(best) ? best : 0.0;
}

double Dynamics::min_positive_abs_drift() const {
    double best = kInf;
    if (auto* m = std::get_if<0>(&source_)) {
        const HybridModel& model = **m;
        for (std::size_t i = 0; i < model.states(); ++i) {
            for (int k = 0; k <= 1000; ++k) {
                const double v = std::abs(model.drift(i, model.band_high() * k / 1000));
                if (v > 0.0) best = std::min(best, v);
            }
        }
    } else {
        for (const auto& row : std::get<1>(source_)->mu_hat) {
            for (double v : row) {
                if (std::abs(v) > 0.0) best = std::min(best, std::abs(v));
            }
        }
    }
    return std::isfinite(best) ? best : 0.0;
}

std::string_view to_string(ExitKind kind) noexcept {
    switch (kind) {
        case ExitKind::crossed_low: return "crossed_0";
        case ExitKind::crossed_high: return "crossed_a";
        case ExitKind::killed: return "killed";
        case ExitKind::horizon: return "horizon_reached";
    }
    return "horizon_reached";
}

double default_horizon(const Dynamics& dyn) {
    const double a = dyn.band_high();
    if (const double v = dyn.min_positive_variance(); v > 0.0) return 10.0 * a * a / v;
    if (const double d = dyn.min_positive_abs_drift(); d > 0.0) return 10.0 * a / d;
    return 10.0 * a;
}

std::vector<TrajectoryPoint> euler_segment(const Dynamics& dyn, std::size_t i, double x0,
                                           double duration, double dt, std::mt19937_64& gen) {
    check_dt(dt);
    if (!(duration >= 0.0)) throw ModelError("segment duration must be nonnegative");
    std::normal_distribution<double> normal;
    std::vector<TrajectoryPoint> out{{0.0, x0, i}};
    const StepPlan plan(0.0, duration, dt);
    double x = x0;
    double t = 0.0;
    for (long k = 1; k <= plan.steps; ++k) {
        const double t_new = plan.end_of(k);
        const double h = t_new - t;
        const double z = normal(gen);
        x += dyn.drift(i, x) * h + dyn.diffusion(i, x) * std::sqrt(h) * z;
        t = t_new;
        out.push_back({t, x, i});
    }
    return out;
}

std::size_t select_jump(std::size_t i, std::span<const double> row, double gamma, double u) noexcept {
    double cum = 0.0;
    std::size_t last_positive = i;
    for (std::size_t k = 0; k < row.size(); ++k) {
        const double d = (k == i ? 1.0 : 0.0) + row[k] / gamma;
        if (d > 0.0) {
            if (u >= cum && u < cum + d) return k;
            last_positive = k;
        }
        cum += d;
    }
    // u beyond the accumulated mass only through rounding of the row sum.
    return last_positive;
}

PathSample simulate_hybrid(const Dynamics& dyn, const RngStream& rng, const SimOptions& options) {
    check_dt(options.dt);
    const double gamma = dyn.uniformization_rate();
    const double a = dyn.band_high();
    const double q = options.kill_rate.value_or(dyn.kill_rate());
    const double horizon = options.horizon.value_or(default_horizon(dyn));
    const std::size_t p = dyn.states();

    auto clock = rng.engine(Channel::clock);
    auto jump = rng.engine(Channel::jump);
    auto brownian = rng.engine(Channel::brownian);
    auto bridge = rng.engine(Channel::bridge);
    std::exponential_distribution<double> inter_arrival(gamma);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal;

    double kill_time = kInf;
    if (q > 0.0) {
        auto kill = rng.engine(Channel::kill);
        kill_time = std::exponential_distribution<double>(q)(kill);
    }

    PathSample path;
    path.occupation.assign(options.occupation_levels.size(), std::vector<double>(p, 0.0));
    std::size_t state = dyn.start_state();
    double x = dyn.start_level();
    double t = 0.0;
    path.epochs.push_back(0.0);
    path.states.push_back(state);
    path.epoch_levels.push_back(x);
    if (options.record_path) path.trajectory.push_back({t, x, state});

    auto finish = [&](ExitKind kind, double when, double level) {
        path.exit = kind;
        path.exit_time = when;
        path.exit_level = level;
        path.exit_state = state;
        return path;
    };

    std::vector<double> row(p);
    double next_epoch = inter_arrival(clock);
    for (;;) {
        const double stop = std::min({next_epoch, kill_time, horizon});
        const StepPlan plan(t, stop, options.dt);
        for (long k = 1; k <= plan.steps; ++k) {
            const double t_new = plan.end_of(k);
            const double h = t_new - t;
            const double mu = dyn.drift(state, x);
            const double sg = dyn.diffusion(state, x);
            const double x_new = x + mu * h + sg * std::sqrt(h) * normal(brownian);
            std::optional<ExitKind> exit;
            double exit_level = x_new;
            if (x_new < 0.0) {
                exit = ExitKind::crossed_low;
            } else if (x_new > a) {
                exit = ExitKind::crossed_high;
            } else if (options.bridge_correction && sg != 0.0) {
                const double var = sg * sg * h;
                const double p_low = std::exp(-2.0 * x * x_new / var);
                const double p_high = std::exp(-2.0 * (a - x) * (a - x_new) / var);
                const double v = unif(bridge);
                if (v < p_low) {
                    exit = ExitKind::crossed_low;
                    exit_level = 0.0;
                } else if (v < p_low + p_high) {
                    exit = ExitKind::crossed_high;
                    exit_level = a;
                }
            }
            // Trapezoidal rule for the time spent in (0, b]; on an exit step
            // the right end counts as outside.
            for (std::size_t l = 0; l < options.occupation_levels.size(); ++l) {
                const double b = options.occupation_levels[l];
                const bool left_in = x > 0.0 && x <= b;
                const bool right_in = !exit && x_new > 0.0 && x_new <= b;
                path.occupation[l][state] += 0.5 * h * ((left_in ? 1.0 : 0.0) + (right_in ? 1.0 : 0.0));
            }
            if (options.record_path) path.trajectory.push_back({t_new, x_new, state});
            if (exit) return finish(*exit, t_new, exit_level);
            x = x_new;
            t = t_new;
        }
        t = stop;
        if (stop == kill_time) return finish(ExitKind::killed, t, x);
        if (stop == horizon) return finish(ExitKind::horizon, t, x);

        dyn.generator_row(state, x, row);
        const std::size_t next = select_jump(state, row, gamma, unif(jump));
        if (next != state) ++path.jumps;
        state = next;
        path.epochs.push_back(t);
        path.states.push_back(state);
        path.epoch_levels.push_back(x);
        if (options.record_path) path.trajectory.push_back({t, x, state});
        next_epoch += inter_arrival(clock);
    }
}

CoupledSample simulate_coupled(const HybridModel& model, const GridApproximation& approx,
                               const RngStream& rng, double horizon, const CoupledOptions& options) {
    check_dt(options.dt);
    if (model.states() != approx.states()) throw ModelError("model and approximation state counts differ");
    if (model.uniformization_rate() != approx.uniformization_rate) {
        throw ModelError("model and approximation must share the uniformization rate");
    }
    if (!(horizon >= 0.0)) throw ModelError("horizon must be nonnegative");
    const Dynamics exact(model);
    const Dynamics coarse(approx);
    const double gamma = model.uniformization_rate();
    const std::size_t p = model.states();

    auto clock = rng.engine(Channel::clock);
    auto jump = rng.engine(Channel::jump);
    auto brownian = rng.engine(Channel::brownian);
    auto residual_gen = rng.engine(Channel::coupling);
    std::exponential_distribution<double> inter_arrival(gamma);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal;

    CoupledSample out;
    std::size_t j = model.start_state();
    std::size_t j_hat = j;
    double x = model.start_level();
    double x_hat = approx.start_level();
    int tracker = 0;
    double t = 0.0;
    out.epochs.push_back(0.0);
    out.states.push_back(j);
    out.states_hat.push_back(j_hat);
    out.tracker.push_back(0);
    out.sup_distance = std::abs(x - x_hat);
    if (options.record_path) out.trajectory.push_back({t, x, x_hat, j, j_hat, tracker});

    std::vector<double> row(p);
    std::vector<double> row_hat(p);
    std::vector<double> d(p);
    std::vector<double> d_hat(p);
    std::vector<double> weights(p);

    auto sample_from = [&](std::span<const double> w) -> std::size_t {
        double total = 0.0;
        for (double v : w) total += std::max(v, 0.0);
        if (!(total > 0.0)) {
            throw NumericalError("coupled construction: empty residual vector at a declared decoupling");
        }
        const double target = unif(residual_gen) * total;
        double cum = 0.0;
        std::size_t last = 0;
        for (std::size_t k = 0; k < w.size(); ++k) {
            if (w[k] <= 0.0) continue;
            last = k;
            cum += w[k];
            if (target < cum) return k;
        }
        return last;
    };

    double next_epoch = inter_arrival(clock);
    while (t < horizon) {
        const double stop = std::min(next_epoch, horizon);
        const StepPlan plan(t, stop, options.dt);
        for (long k = 1; k <= plan.steps; ++k) {
            const double t_new = plan.end_of(k);
            const double h = t_new - t;
            const double dw = std::sqrt(h) * normal(brownian);
            x += exact.drift(j, x) * h + exact.diffusion(j, x) * dw;
            x_hat += coarse.drift(j_hat, x_hat) * h + coarse.diffusion(j_hat, x_hat) * dw;
            t = t_new;
            out.sup_distance = std::max(out.sup_distance, std::abs(x - x_hat));
            if (options.record_path) out.trajectory.push_back({t, x, x_hat, j, j_hat, tracker});
        }
        t = stop;
        if (stop >= horizon) break;

        exact.generator_row(j, x, row);
        coarse.generator_row(j_hat, x_hat, row_hat);
        for (std::size_t k = 0; k < p; ++k) {
            d[k] = (k == j ? 1.0 : 0.0) + row[k] / gamma;
            d_hat[k] = (k == j_hat ? 1.0 : 0.0) + row_hat[k] / gamma;
        }
        const double u = unif(jump);
        const std::size_t j_next = select_jump(j, row, gamma, u);
        std::size_t j_hat_next = j_hat;
        if (tracker == 0) {
            // Overlap rule: J_hat follows J while U falls in [C(k), C(k) + min(D, D_hat)).
            bool matched = false;
            double cum = 0.0;
            for (std::size_t k = 0; k < p; ++k) {
                const double overlap = std::min(d[k], d_hat[k]);
                if (overlap > 0.0 && u >= cum && u < cum + overlap) {
                    j_hat_next = k;
                    matched = true;
                    break;
                }
                cum += d[k];
            }
            if (!matched) {
                for (std::size_t k = 0; k < p; ++k) weights[k] = d_hat[k] - std::min(d[k], d_hat[k]);
                j_hat_next = sample_from(weights);
                tracker = 1;
                out.decouple_epoch = out.epochs.size();
            }
        } else {
            j_hat_next = sample_from(d_hat);
            tracker = 2;
        }
        j = j_next;
        j_hat = j_hat_next;
        out.epochs.push_back(t);
        out.states.push_back(j);
        out.states_hat.push_back(j_hat);
        out.tracker.push_back(tracker);
        if (options.record_path) out.trajectory.push_back({t, x, x_hat, j, j_hat, tracker});
        next_epoch += inter_arrival(clock);
    }
    return out;
}

std::string path_csv(const PathSample& path) {
    CsvWriter csv({"t", "J", "X"});
    for (const auto& pt : path.trajectory) {
        csv.field(pt.t).field(pt.state + 1).field(pt.x);
        csv.end_row();
    }
    return csv.str();
}

std::string coupled_path_csv(const CoupledSample& path) {
    CsvWriter csv({"t", "J", "X", "J_hat", "X_hat", "H"});
    for (const auto& pt : path.trajectory) {
        csv.field(pt.t).field(pt.state + 1).field(pt.x).field(pt.state_hat + 1).field(pt.x_hat).field(pt.tracker);
        csv.end_row();
    }
    return csv.str();
}

}  // namespace hsde

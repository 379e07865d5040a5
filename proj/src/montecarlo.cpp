#include "hybridsde/montecarlo.hpp"

#include <algorithm>
#include <cmath>

#include "hybridsde/csv.hpp"
#include "hybridsde/errors.hpp"
#include "hybridsde/parallel.hpp"
#include "hybridsde/simulate.hpp"

namespace hsde {

namespace {

McEstimate proportion(std::size_t hits, std::size_t n, std::uint64_t hash) {
    McEstimate e;
    e.n_paths = n;
    e.config_hash = hash;
    e.value = static_cast<double>(hits) / static_cast<double>(n);
    e.std_error = std::sqrt(e.value * (1.0 - e.value) / static_cast<double>(n));
    return e;
}

// Welford accumulator; fed in path order so the result is reproducible.
struct Moments {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) noexcept {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    McEstimate estimate(std::uint64_t hash) const noexcept {
        McEstimate e;
        e.n_paths = n;
        e.config_hash = hash;
        e.value = mean;
        e.std_error = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
        return e;
    }
};

struct PathOutcome {
    ExitKind exit = ExitKind::horizon;
    std::size_t state = 0;
    double stop_time = 0.0;
    std::vector<double> occupation;  // [level * p + state]
};

void check_paths(std::size_t n, unsigned workers) {
    if (n == 0) throw ModelError("n_paths must be at least 1");
    if (workers == 0) throw ModelError("workers must be at least 1");
}

}  // namespace

std::uint64_t config_hash(std::string_view text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

PassageEstimates mc_passage(const Dynamics& dyn, const McOptions& options) {
    check_paths(options.n_paths, options.workers);
    const std::size_t p = dyn.states();
    const std::size_t levels = options.occupation_levels.size();

    SimOptions sim;
    sim.dt = options.dt;
    sim.horizon = options.horizon ? options.horizon : std::optional<double>(default_horizon(dyn));
    sim.kill_rate = options.kill_rate;
    sim.bridge_correction = options.bridge_correction;
    sim.occupation_levels = options.occupation_levels;

    std::vector<PathOutcome> outcomes(options.n_paths);
    parallel_for(options.n_paths, options.workers, [&](std::size_t k) {
        const PathSample path = simulate_hybrid(dyn, RngStream(options.seed, k), sim);
        PathOutcome& out = outcomes[k];
        out.exit = path.exit;
        out.state = path.exit_state;
        out.stop_time = path.exit_time;
        out.occupation.resize(levels * p);
        for (std::size_t l = 0; l < levels; ++l) {
            for (std::size_t j = 0; j < p; ++j) out.occupation[l * p + j] = path.occupation[l][j];
        }
    });

    std::vector<std::size_t> low(p, 0);
    std::vector<std::size_t> high(p, 0);
    std::size_t killed = 0;
    std::size_t censored = 0;
    std::vector<Moments> occ(levels * p);
    Moments stop;
    for (const PathOutcome& out : outcomes) {
        switch (out.exit) {
            case ExitKind::crossed_low: ++low[out.state]; break;
            case ExitKind::crossed_high: ++high[out.state]; break;
            case ExitKind::killed: ++killed; break;
            case ExitKind::horizon: ++censored; break;
        }
        for (std::size_t k = 0; k < occ.size(); ++k) occ[k].add(out.occupation[k]);
        stop.add(out.stop_time);
    }

    const std::size_t n = options.n_paths;
    const std::uint64_t hash = options.config_hash;
    PassageEstimates est;
    est.n_paths = n;
    est.seed = options.seed;
    for (std::size_t j = 0; j < p; ++j) {
        est.m_minus.push_back(proportion(low[j], n, hash));
        est.m_plus.push_back(proportion(high[j], n, hash));
    }
    est.killed = proportion(killed, n, hash);
    est.censored = proportion(censored, n, hash);
    est.occupation_levels = options.occupation_levels;
    est.occupation.assign(levels, {});
    for (std::size_t l = 0; l < levels; ++l) {
        for (std::size_t j = 0; j < p; ++j) est.occupation[l].push_back(occ[l * p + j].estimate(hash));
    }
    est.mean_stop_time = stop.estimate(hash);
    return est;
}

std::vector<McEstimate> mc_occupation(const Dynamics& dyn, double b, const McOptions& options) {
    McOptions opt = options;
    opt.occupation_levels = {b};
    return mc_passage(dyn, opt).occupation.front();
}

std::string estimates_csv(const PassageEstimates& est) {
    CsvWriter csv({"quantity", "state", "value", "std_error", "n_paths", "seed"});
    // The seed is unsigned 64-bit; written as text to keep every bit.
    auto emit = [&](std::string_view quantity, std::optional<std::size_t> state, const McEstimate& e) {
        csv.field(quantity);
        if (state) {
            csv.field(*state + 1);
        } else {
            csv.field(std::string_view());
        }
        csv.field(e.value).field(e.std_error).field(e.n_paths).field(std::string_view(std::to_string(est.seed)));
        csv.end_row();
    };
    for (std::size_t j = 0; j < est.m_minus.size(); ++j) emit("m_minus", j, est.m_minus[j]);
    for (std::size_t j = 0; j < est.m_plus.size(); ++j) emit("m_plus", j, est.m_plus[j]);
    emit("killed", std::nullopt, est.killed);
    emit("censored", std::nullopt, est.censored);
    for (std::size_t l = 0; l < est.occupation.size(); ++l) {
        const std::string label = "O(" + format_double(est.occupation_levels[l]) + ")";
        for (std::size_t j = 0; j < est.occupation[l].size(); ++j) emit(label, j, est.occupation[l][j]);
    }
    emit("mean_stop_time", std::nullopt, est.mean_stop_time);
    return csv.str();
}

double kolmogorov_tail(double lambda) noexcept {
    if (lambda <= 0.0) return 1.0;
    // The alternating series converges slowly for small lambda; use the
    // theta-function form there.
    if (lambda < 1.18) {
        const double pi = 3.14159265358979323846;
        const double y = std::exp(-pi * pi / (8.0 * lambda * lambda));
        double sum = 0.0;
        for (int k = 1; k < 50; k += 2) {
            const double term = std::pow(y, k * k);
            sum += term;
            if (term < 1e-17) break;
        }
        return std::clamp(1.0 - std::sqrt(2.0 * pi) / lambda * sum, 0.0, 1.0);
    }
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-17) break;
    }
    return std::clamp(sum, 0.0, 1.0);
}

KsResult ks_test_exponential(std::vector<double> sample, double rate) {
    if (sample.empty()) throw ModelError("KS test needs a nonempty sample");
    if (!(rate > 0.0)) throw ModelError("exponential rate must be positive");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t k = 0; k < sample.size(); ++k) {
        const double cdf = -std::expm1(-rate * sample[k]);
        d = std::max({d, static_cast<double>(k + 1) / n - cdf, cdf - static_cast<double>(k) / n});
    }
    const double root = std::sqrt(n);
    KsResult r;
    r.statistic = d;
    r.n = sample.size();
    r.p_value = kolmogorov_tail((root + 0.12 + 0.11 / root) * d);
    return r;
}

HybridModel frozen_model(const HybridModel& model, std::size_t i, double x_frozen, std::optional<double> gamma) {
    const Eigen::MatrixXd lam = eval_generator(model, x_frozen);
    const std::size_t p = model.states();
    if (i >= p) throw ModelError("state out of range");
    ModelParams params;
    params.mu.assign(p, PolyExpr{0.0});
    params.sigma.assign(p, PolyExpr{0.0});
    params.lambda.assign(p, std::vector<PolyExpr>(p));
    for (std::size_t r = 0; r < p; ++r) {
        for (std::size_t c = 0; c < p; ++c) {
            params.lambda[r][c] = PolyExpr{lam(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))};
        }
    }
    params.band_high = model.band_high();
    params.start_level = x_frozen;
    params.start_state = i;
    params.uniformization_rate = gamma.value_or(model.uniformization_rate());
    return HybridModel(std::move(params));
}

SojournTest sojourn_law_test(const HybridModel& model, std::size_t i, double x_frozen, std::size_t n_sojourns,
                             std::uint64_t seed, std::optional<double> gamma) {
    if (n_sojourns == 0) throw ModelError("n_sojourns must be at least 1");
    const HybridModel frozen = frozen_model(model, i, x_frozen, gamma);
    const Dynamics dyn(frozen);
    std::vector<double> row(frozen.states());
    frozen.generator_row(i, x_frozen, row);

    SojournTest out;
    out.rate = -row[i];
    out.uniformization_rate = frozen.uniformization_rate();
    out.n = n_sojourns;
    const double horizon = out.rate > 0.0 ? 60.0 / out.rate : 100.0 / out.uniformization_rate;

    SimOptions sim;
    sim.dt = horizon;  // X is frozen, so one Euler step per inter-epoch gap suffices
    sim.horizon = horizon;
    sim.kill_rate = 0.0;

    std::vector<double> sojourns;
    for (std::size_t k = 0; k < n_sojourns; ++k) {
        const PathSample path = simulate_hybrid(dyn, RngStream(seed, k), sim);
        for (std::size_t l = 1; l < path.states.size(); ++l) {
            if (path.states[l] != i) {
                sojourns.push_back(path.epochs[l]);
                break;
            }
        }
    }
    out.jumps_observed = sojourns.size();
    if (out.rate > 0.0 && !sojourns.empty()) out.ks = ks_test_exponential(std::move(sojourns), out.rate);
    return out;
}

std::vector<KernelEntry> jump_kernel_test(const HybridModel& model, std::size_t i, double x_frozen,
                                          std::size_t n, std::uint64_t seed, std::optional<double> gamma) {
    if (n == 0) throw ModelError("n must be at least 1");
    const HybridModel frozen = frozen_model(model, i, x_frozen, gamma);
    const Dynamics dyn(frozen);
    const double g = frozen.uniformization_rate();
    const std::size_t p = frozen.states();
    std::vector<double> row(p);
    frozen.generator_row(i, x_frozen, row);

    SimOptions sim;
    sim.horizon = 60.0 / g;
    sim.dt = *sim.horizon;
    sim.kill_rate = 0.0;

    std::vector<std::size_t> counts(p, 0);
    for (std::size_t k = 0; k < n; ++k) {
        const PathSample path = simulate_hybrid(dyn, RngStream(seed, k), sim);
        if (path.states.size() < 2) throw NumericalError("no uniformization epoch within the test horizon");
        ++counts[path.states[1]];
    }
    std::vector<KernelEntry> out;
    for (std::size_t c = 0; c < p; ++c) {
        KernelEntry e;
        e.to = c;
        e.expected = (c == i ? 1.0 : 0.0) + row[c] / g;
        e.observed = static_cast<double>(counts[c]) / static_cast<double>(n);
        e.std_error = std::sqrt(std::max(e.expected * (1.0 - e.expected), 0.0) / static_cast<double>(n));
        e.pass = e.std_error > 0.0 ? std::abs(e.observed - e.expected) <= 3.0 * e.std_error
                                   : std::abs(e.observed - e.expected) <= 1e-12;
        out.push_back(e);
    }
    return out;
}

double sample_quantile(std::vector<double> values, double prob) {
    if (values.empty()) throw ModelError("quantile of an empty sample");
    if (!(prob >= 0.0 && prob <= 1.0)) throw ModelError("quantile probability must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = prob * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return values[lo] + w * (values[hi] - values[lo]);
}

std::vector<DecouplingRow> mc_decoupling(const HybridModel& model, const std::vector<GridApproximation>& approxs,
                                         const std::vector<std::string>& labels, const DecouplingOptions& options) {
    check_paths(options.n_paths, options.workers);
    if (approxs.size() != labels.size()) throw ModelError("one label per approximation is required");
    std::vector<DecouplingRow> rows;
    for (std::size_t a = 0; a < approxs.size(); ++a) {
        if (approxs[a].uniformization_rate != model.uniformization_rate()) {
            throw ModelError("approximation '" + labels[a] + "' does not share the model's uniformization rate");
        }
        std::vector<char> decoupled(options.n_paths, 0);
        std::vector<double> distance(options.n_paths, 0.0);
        const CoupledOptions copt{options.dt, false};
        parallel_for(options.n_paths, options.workers, [&](std::size_t k) {
            const CoupledSample s = simulate_coupled(model, approxs[a], RngStream(options.seed, k), options.horizon, copt);
            decoupled[k] = s.decouple_epoch.has_value() ? 1 : 0;
            distance[k] = s.sup_distance;
        });
        const auto hits = static_cast<std::size_t>(std::count(decoupled.begin(), decoupled.end(), 1));
        DecouplingRow row;
        row.label = labels[a];
        row.frequency = proportion(hits, options.n_paths, 0);
        row.sup_distance_q50 = sample_quantile(distance, 0.5);
        row.sup_distance_q90 = sample_quantile(distance, 0.9);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace hsde

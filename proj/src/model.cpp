#include "hybridsde/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hybridsde/errors.hpp"

namespace hsde {

namespace {

constexpr std::size_t kMaxRecordedViolations = 16;

double sup_abs_diagonal(const ModelParams& p, int samples) {
    const double a = p.band_high;
    double sup = 0.0;
    for (std::size_t i = 0; i < p.mu.size(); ++i) {
        const PolyExpr& d = p.lambda[i][i];
        for (int k = 0; k <= samples; ++k) {
            sup = std::max(sup, std::abs(d(a * k / samples)));
        }
        for (double x : d.extremum_candidates(0.0, a)) sup = std::max(sup, std::abs(d(x)));
    }
    return sup;
}

double rate_from_sup(double sup) {
    return std::max(sup * (1.0 + 1e-9), kMinUniformizationRate);
}

}  // namespace

HybridModel::HybridModel(ModelParams params) : params_(std::move(params)) {
    const std::size_t p = params_.mu.size();
    if (p == 0) throw ModelError("model needs at least one state");
    if (params_.sigma.size() != p) throw ModelError("sigma must have one entry per state");
    if (params_.lambda.size() != p) throw ModelError("lambda must have one row per state");
    for (const auto& row : params_.lambda) {
        if (row.size() != p) throw ModelError("lambda must be square (p x p)");
    }
    if (!(params_.band_high > 0.0) || !std::isfinite(params_.band_high)) {
        throw ModelError("band upper level a must be positive and finite");
    }
    if (!(params_.start_level > 0.0 && params_.start_level < params_.band_high)) {
        throw ModelError("start level u must lie strictly inside (0, a)");
    }
    if (params_.start_state >= p) throw ModelError("start state out of range");
    if (!(params_.kill_rate >= 0.0) || !std::isfinite(params_.kill_rate)) {
        throw ModelError("killing rate q must be nonnegative and finite");
    }
    if (params_.uniformization_rate) {
        const double g = *params_.uniformization_rate;
        if (!(g > 0.0) || !std::isfinite(g)) throw ModelError("uniformization rate must be positive");
        gamma_ = g;
    } else {
        gamma_ = rate_from_sup(sup_abs_diagonal(params_, kDefaultSamples));
    }
    if (params_.lipschitz_K && !(*params_.lipschitz_K > 0.0)) {
        throw ModelError("Lipschitz constant must be positive when given");
    }
}

void HybridModel::generator_row(std::size_t i, double x, std::span<double> out) const noexcept {
    const auto& row = params_.lambda[i];
    for (std::size_t j = 0; j < row.size(); ++j) out[j] = row[j](x);
}

HybridModel HybridModel::with_start(std::size_t state, double level) const {
    ModelParams p = params_;
    p.start_state = state;
    p.start_level = level;
    if (!p.uniformization_rate) p.uniformization_rate = gamma_;
    return HybridModel(std::move(p));
}

HybridModel HybridModel::with_kill_rate(double q) const {
    ModelParams p = params_;
    p.kill_rate = q;
    if (!p.uniformization_rate) p.uniformization_rate = gamma_;
    return HybridModel(std::move(p));
}

HybridModel HybridModel::with_uniformization_rate(double gamma) const {
    ModelParams p = params_;
    p.uniformization_rate = gamma;
    return HybridModel(std::move(p));
}

std::pair<double, double> eval_coefficients(const HybridModel& model, std::size_t i, double x) {
    if (i >= model.states()) {
        std::ostringstream msg;
        msg << "state index " << i << " out of range (p = " << model.states() << ")";
        throw ModelError(msg.str());
    }
    return {model.drift(i, x), model.diffusion(i, x)};
}

Eigen::MatrixXd eval_generator(const HybridModel& model, double x) {
    if (!(x >= 0.0 && x <= model.band_high())) {
        std::ostringstream msg;
        msg << "level " << x << " outside the band [0, " << model.band_high() << "]";
        throw ModelError(msg.str());
    }
    const std::size_t p = model.states();
    Eigen::MatrixXd g(p, p);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            g(i, j) = model.lambda(i, j)(x);
            if (i != j && g(i, j) < -kGeneratorTol) {
                std::ostringstream msg;
                msg << "generator violation at x = " << x << ": lambda(" << i + 1 << "," << j + 1
                    << ") = " << g(i, j);
                throw ModelError(msg.str());
            }
        }
        if (std::abs(g.row(static_cast<Eigen::Index>(i)).sum()) > kGeneratorTol) {
            std::ostringstream msg;
            msg << "generator violation at x = " << x << ": row " << i + 1 << " sums to "
                << g.row(static_cast<Eigen::Index>(i)).sum();
            throw ModelError(msg.str());
        }
    }
    return g;
}

double compute_uniformization_rate(const HybridModel& model, int samples) {
    return rate_from_sup(sup_abs_diagonal(model.params(), samples));
}

double sampled_lipschitz(const PolyExpr& f, double lo, double hi, int samples) {
    if (f.is_constant()) return 0.0;
    const double step = (hi - lo) / samples;
    double best = 0.0;
    double prev = f(lo);
    for (int k = 1; k <= samples; ++k) {
        const double cur = f(lo + k * step);
        best = std::max(best, std::abs(cur - prev) / step);
        prev = cur;
    }
    return best;
}

ModelReport validate_model(const HybridModel& model, int samples) {
    ModelReport report;
    const std::size_t p = model.states();
    const double a = model.band_high();
    std::vector<double> row(p);

    auto record = [&](GeneratorViolation v) {
        ++report.generator_violation_count;
        if (report.generator_violations.size() < kMaxRecordedViolations) {
            report.generator_violations.push_back(v);
        }
    };

    for (int k = 0; k <= samples; ++k) {
        const double x = a * k / samples;
        for (std::size_t i = 0; i < p; ++i) {
            model.generator_row(i, x, row);
            double sum = 0.0;
            for (std::size_t j = 0; j < p; ++j) {
                sum += row[j];
                if (j != i && row[j] < -kGeneratorTol) record({x, i, j, row[j], false});
            }
            if (std::abs(sum) > kGeneratorTol) record({x, i, i, sum, true});
        }
    }

    report.sampled_sup_diagonal = sup_abs_diagonal(model.params(), samples);
    report.uniformization_rate = model.uniformization_rate();
    report.uniformization_rate_ok = model.uniformization_rate() >= report.sampled_sup_diagonal;

    for (std::size_t i = 0; i < p; ++i) {
        report.lipschitz.push_back({"mu", i, sampled_lipschitz(model.mu(i), 0.0, a, samples)});
        report.lipschitz.push_back({"sigma", i, sampled_lipschitz(model.sigma(i), 0.0, a, samples)});
    }
    for (const auto& l : report.lipschitz) report.lipschitz_max = std::max(report.lipschitz_max, l.estimate);
    return report;
}

}  // namespace hsde

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hybridsde/poly.hpp"

namespace hsde {

/// Tolerance used for generator sign and row-sum checks.
inline constexpr double kGeneratorTol = 1e-12;
/// Floor applied to the uniformization rate so the Poisson clock always ticks.
inline constexpr double kMinUniformizationRate = 1e-9;
/// Number of sub-intervals of [0, a] used by the sampled checks.
inline constexpr int kDefaultSamples = 10000;

/// Raw ingredients of a hybrid SDE on the band [0, a]. States are 0-based
/// here; files and CSV output use 1-based state labels.
struct ModelParams {
    std::vector<PolyExpr> mu;                    // drift per state
    std::vector<PolyExpr> sigma;                 // diffusion per state
    std::vector<std::vector<PolyExpr>> lambda;   // p x p intensity field
    double band_high = 1.0;                      // a
    double start_level = 0.5;                    // u, strictly inside (0, a)
    std::size_t start_state = 0;                 // i0
    std::optional<double> uniformization_rate;   // gamma; computed when absent
    double kill_rate = 0.0;                      // q
    std::optional<double> lipschitz_K;
};

/// Immutable, structurally checked hybrid SDE model.
///
/// Construction verifies dimensions and ranges and fills in the
/// uniformization rate when the caller did not supply one. Generator sign
/// conditions are *not* enforced here; `validate_model` reports them and
/// `eval_generator` refuses to return an invalid matrix.
class HybridModel {
public:
    explicit HybridModel(ModelParams params);

    std::size_t states() const noexcept { return params_.mu.size(); }
    double band_low() const noexcept { return 0.0; }
    double band_high() const noexcept { return params_.band_high; }
    double start_level() const noexcept { return params_.start_level; }
    std::size_t start_state() const noexcept { return params_.start_state; }
    double kill_rate() const noexcept { return params_.kill_rate; }
    double uniformization_rate() const noexcept { return gamma_; }
    bool uniformization_rate_user_supplied() const noexcept {
        return params_.uniformization_rate.has_value();
    }
    std::optional<double> lipschitz_K() const noexcept { return params_.lipschitz_K; }
    const ModelParams& params() const noexcept { return params_; }

    const PolyExpr& mu(std::size_t i) const { return params_.mu.at(i); }
    const PolyExpr& sigma(std::size_t i) const { return params_.sigma.at(i); }
    const PolyExpr& lambda(std::size_t i, std::size_t j) const { return params_.lambda.at(i).at(j); }

    // Unchecked hot-path accessors used by the simulators.
    double drift(std::size_t i, double x) const noexcept { return params_.mu[i](x); }
    double diffusion(std::size_t i, double x) const noexcept { return params_.sigma[i](x); }
    void generator_row(std::size_t i, double x, std::span<double> out) const noexcept;

    HybridModel with_start(std::size_t state, double level) const;
    HybridModel with_kill_rate(double q) const;
    HybridModel with_uniformization_rate(double gamma) const;

private:
    ModelParams params_;
    double gamma_ = 0.0;
};

/// (mu_i(x), sigma_i(x)). Throws ModelError for an out-of-range state.
std::pair<double, double> eval_coefficients(const HybridModel& model, std::size_t i, double x);

/// Lambda(x) for x in [0, a]. Throws ModelError when x is outside the band or
/// an off-diagonal entry is below -1e-12.
Eigen::MatrixXd eval_generator(const HybridModel& model, double x);

/// Sampled sup over [0, a] of max_i |Lambda_ii(x)| (dense grid plus the
/// critical points of each diagonal polynomial), inflated by 1 + 1e-9 and
/// floored at 1e-9.
double compute_uniformization_rate(const HybridModel& model, int samples = kDefaultSamples);

struct GeneratorViolation {
    double x = 0.0;
    std::size_t row = 0;
    std::size_t col = 0;      // equals row for row-sum violations
    double value = 0.0;       // offending entry or row sum
    bool row_sum = false;
};

struct LipschitzEstimate {
    std::string coefficient;  // "mu" or "sigma"
    std::size_t state = 0;
    double estimate = 0.0;
};

struct ModelReport {
    std::vector<GeneratorViolation> generator_violations;  // first few only
    std::size_t generator_violation_count = 0;
    double sampled_sup_diagonal = 0.0;
    double uniformization_rate = 0.0;
    bool uniformization_rate_ok = true;
    std::vector<LipschitzEstimate> lipschitz;
    double lipschitz_max = 0.0;

    bool valid() const noexcept { return generator_violation_count == 0 && uniformization_rate_ok; }
};

/// Sampled diagnostics: generator validity, gamma bound, Lipschitz slopes.
ModelReport validate_model(const HybridModel& model, int samples = kDefaultSamples);

/// Largest adjacent-sample slope |f(x)-f(y)|/|x-y| of f on [lo, hi].
double sampled_lipschitz(const PolyExpr& f, double lo, double hi, int samples = kDefaultSamples);

}  // namespace hsde

#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <variant>

#include "hybridsde/grid.hpp"
#include "hybridsde/model.hpp"

namespace hsde {

/// Non-owning view over either the exact polynomial model or its
/// piecewise-constant grid approximation, so simulators and Monte Carlo
/// estimators accept both. The referenced object must outlive the view.
class Dynamics {
public:
    Dynamics(const HybridModel& model) noexcept : source_(&model) {}          // NOLINT(implicit)
    Dynamics(const GridApproximation& approx) noexcept : source_(&approx) {}  // NOLINT(implicit)

    bool is_approximation() const noexcept { return source_.index() == 1; }

    std::size_t states() const noexcept {
        return std::visit([](auto* s) { return s->states(); }, source_);
    }
    double band_high() const noexcept {
        return std::visit([](auto* s) { return s->band_high(); }, source_);
    }
    double start_level() const noexcept {
        return std::visit([](auto* s) { return s->start_level(); }, source_);
    }
    std::size_t start_state() const noexcept {
        if (auto* m = std::get_if<0>(&source_)) return (*m)->start_state();
        return std::get<1>(source_)->start_state;
    }
    double kill_rate() const noexcept {
        if (auto* m = std::get_if<0>(&source_)) return (*m)->kill_rate();
        return std::get<1>(source_)->kill_rate;
    }
    double uniformization_rate() const noexcept {
        if (auto* m = std::get_if<0>(&source_)) return (*m)->uniformization_rate();
        return std::get<1>(source_)->uniformization_rate;
    }

    /// Coefficients extend as constants outside [0, a] (the level is clamped),
    /// which keeps them Lipschitz when a path runs past the band.
    double drift(std::size_t i, double x) const noexcept {
        const double xc = std::clamp(x, 0.0, band_high());
        if (auto* m = std::get_if<0>(&source_)) return (*m)->drift(i, xc);
        return std::get<1>(source_)->drift(i, xc);
    }
    double diffusion(std::size_t i, double x) const noexcept {
        const double xc = std::clamp(x, 0.0, band_high());
        if (auto* m = std::get_if<0>(&source_)) return (*m)->diffusion(i, xc);
        return std::get<1>(source_)->diffusion(i, xc);
    }

    /// Row i of the generator at x, with the same clamping of the level.
    void generator_row(std::size_t i, double x, std::span<double> out) const noexcept;

    /// Smallest positive sigma^2 seen on the band (dense sample for the model,
    /// band values for the approximation); 0 when sigma vanishes everywhere.
    double min_positive_variance() const;
    /// Same for |mu|.
    double min_positive_abs_drift() const;

private:
    std::variant<const HybridModel*, const GridApproximation*> source_;
};

}  // namespace hsde

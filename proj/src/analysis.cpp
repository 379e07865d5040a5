#include "hybridsde/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hybridsde/csv.hpp"
#include "hybridsde/errors.hpp"
#include "hybridsde/parallel.hpp"

namespace hsde {

void BoundConfig::validate() const {
    for (double v : {K, C_star, beta, gamma_rate, G, epsilon_1}) {
        if (!std::isfinite(v) || v < 0.0) throw ModelError("bound constants must be finite and nonnegative");
    }
    if (!(C_star > 0.0)) throw ModelError("C_star must be positive");
    if (epsilon_1 > 0.0 && !(gamma_rate > epsilon_1)) throw ModelError("gamma_rate must exceed epsilon_1");
}

double error_bound_C(double t, const BoundConfig& cfg) {
    if (!(t >= 0.0)) throw ModelError("t must be nonnegative");
    return std::max(6.0 * t, 3.0) * std::exp(6.0 * cfg.K * cfg.K * (t + cfg.C_star) * t);
}

Threshold corollary_threshold(double n, double t, double alpha, const BoundConfig& cfg) {
    if (!(n >= 2.0)) throw ModelError("n must be at least 2");
    const double log_n = std::log(n);
    return {std::sqrt(3.0 * error_bound_C(t, cfg) * log_n) * alpha, 1.0 / log_n};
}

std::string plot_csv(const std::vector<PlotPoint>& points) {
    CsvWriter csv({"x_value", "series_label", "y_value"});
    for (const auto& pt : points) {
        csv.field(pt.x).field(pt.series).field(pt.y);
        csv.end_row();
    }
    return csv.str();
}

nlohmann::json plot_manifest(const std::vector<PlotManifest>& plots) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& p : plots) {
        list.push_back({{"file", p.file}, {"title", p.title}, {"x_label", p.x_label}, {"y_label", p.y_label}});
    }
    return {{"plots", list}};
}

std::vector<GridStudyRow> study_grid_convergence(const HybridModel& model, const std::vector<int>& M_list,
                                                 const StudyOptions& options) {
    if (M_list.empty()) throw ModelError("grid study needs at least one M");
    std::vector<PassageResult> results(M_list.size());
    parallel_for(M_list.size(), options.workers, [&](std::size_t k) {
        const SpaceGrid grid = build_grid(model.start_level(), model.band_high(), M_list[k]);
        results[k] = solve_passage(build_approximation(model, grid, options.rule), options.solve).passage;
    }, 1);
    std::vector<GridStudyRow> rows;
    for (std::size_t k = 0; k < M_list.size(); ++k) {
        for (std::size_t j = 0; j < model.states(); ++j) {
            rows.push_back({M_list[k], j, results[k].m_minus[j], results[k].m_plus[j]});
        }
    }
    return rows;
}

double grid_study_gap(const std::vector<GridStudyRow>& rows, int M_a, int M_b) {
    std::map<std::size_t, double> at_a;
    std::map<std::size_t, double> at_b;
    for (const auto& r : rows) {
        if (r.M == M_a) at_a[r.state] = r.m_minus;
        if (r.M == M_b) at_b[r.state] = r.m_minus;
    }
    if (at_a.empty() || at_b.empty() || at_a.size() != at_b.size()) {
        throw ModelError("grid study lacks rows for the requested M values");
    }
    double gap = 0.0;
    for (const auto& [j, v] : at_a) gap = std::max(gap, std::abs(at_b.at(j) - v));
    return gap;
}

ProfileStudy study_profiles(const HybridModel& model, int M, const std::vector<double>& u_list,
                            const std::vector<double>& b_list, const StudyOptions& options) {
    if (u_list.empty() && b_list.empty()) throw ModelError("profile study needs a u list or a b list");
    const double a = model.band_high();
    for (double u : u_list) {
        if (!(u > 0.0 && u < a)) throw ModelError("profile levels u must lie strictly inside (0, a)");
    }
    for (double b : b_list) {
        if (!(b >= 0.0 && b <= a)) throw ModelError("occupation levels b must lie in [0, a]");
    }

    std::vector<PassageResult> by_u(u_list.size());
    parallel_for(u_list.size(), options.workers, [&](std::size_t k) {
        const HybridModel shifted = model.with_start(model.start_state(), u_list[k]);
        const SpaceGrid grid = build_grid(u_list[k], a, M);
        by_u[k] = solve_passage(build_approximation(shifted, grid, options.rule), options.solve).passage;
    }, 1);

    ProfileStudy out;
    for (std::size_t k = 0; k < u_list.size(); ++k) {
        for (std::size_t j = 0; j < model.states(); ++j) {
            out.exit_low.push_back({u_list[k], j, by_u[k].m_minus[j]});
            out.exit_high.push_back({u_list[k], j, by_u[k].m_plus[j]});
        }
    }
    if (!b_list.empty()) {
        const SpaceGrid grid = build_grid(model.start_level(), a, M);
        const PassageResult base = solve_passage(build_approximation(model, grid, options.rule), options.solve).passage;
        for (double b : b_list) {
            for (std::size_t j = 0; j < model.states(); ++j) out.occupation.push_back({b, j, base.occupation(j, b)});
        }
    }
    return out;
}

std::vector<DecouplingRow> study_coupling(const HybridModel& model, const std::vector<int>& M_list,
                                          SamplingRule rule, const DecouplingOptions& options) {
    if (M_list.empty()) throw ModelError("coupling study needs at least one M");
    std::vector<GridApproximation> approxs;
    std::vector<std::string> labels;
    for (int M : M_list) {
        approxs.push_back(build_approximation(model, build_grid(model.start_level(), model.band_high(), M), rule));
        labels.push_back("M=" + std::to_string(M));
    }
    return mc_decoupling(model, approxs, labels, options);
}

std::string grid_study_csv(const std::vector<GridStudyRow>& rows) {
    CsvWriter csv({"M", "j", "m_minus", "m_plus"});
    for (const auto& r : rows) {
        csv.field(r.M).field(r.state + 1).field(r.m_minus).field(r.m_plus);
        csv.end_row();
    }
    return csv.str();
}

std::string coupling_study_csv(const std::vector<DecouplingRow>& rows) {
    CsvWriter csv({"label", "decoupling_frequency", "std_error", "n_paths", "sup_distance_q50", "sup_distance_q90"});
    for (const auto& r : rows) {
        csv.field(r.label).field(r.frequency.value).field(r.frequency.std_error).field(r.frequency.n_paths);
        csv.field(r.sup_distance_q50).field(r.sup_distance_q90);
        csv.end_row();
    }
    return csv.str();
}

}  // namespace hsde

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

#include "hybridsde/grid.hpp"
#include "hybridsde/model.hpp"
#include "hybridsde/montecarlo.hpp"
#include "hybridsde/mrmbm.hpp"

namespace hsde {

/// Constants entering the error bounds. `gamma_rate` is the rate exponent of
/// the coefficient assumption, unrelated to the uniformization rate.
struct BoundConfig {
    double K = 1.0;          // Lipschitz constant of mu and sigma
    double C_star = 4.0;     // maximal-inequality constant
    double beta = 0.0;
    double gamma_rate = 0.5;
    double G = 1.0;          // log-Hoelder constant of Lambda
    double epsilon_1 = 0.0;

    /// 1 + 12 K^2; reported only.
    double beta_star() const noexcept { return 1.0 + 12.0 * K * K; }
    /// Throws ModelError on negative or non-finite fields, C_star <= 0, or
    /// epsilon_1 >= gamma_rate when epsilon_1 > 0.
    void validate() const;
};

/// C(t) = max(6t, 3) exp(6 K^2 (t + C_star) t). Throws ModelError for t < 0.
double error_bound_C(double t, const BoundConfig& cfg);

struct Threshold {
    double delta = 0.0;              // sqrt(3 C(t) log n) alpha
    double probability_bound = 0.0;  // 1 / log n
};

/// Throws ModelError for n < 2 or t < 0.
Threshold corollary_threshold(double n, double t, double alpha, const BoundConfig& cfg);

/// One point of a plot: x, series label, y.
struct PlotPoint {
    double x = 0.0;
    std::string series;
    double y = 0.0;
};

/// CSV x_value,series_label,y_value.
std::string plot_csv(const std::vector<PlotPoint>& points);

struct PlotManifest {
    std::string file;
    std::string title;
    std::string x_label;
    std::string y_label;
};

/// {"plots": [{"file", "title", "x_label", "y_label"}, ...]}
nlohmann::json plot_manifest(const std::vector<PlotManifest>& plots);

struct GridStudyRow {
    int M = 0;
    std::size_t state = 0;
    double m_minus = 0.0;
    double m_plus = 0.0;
};

struct StudyOptions {
    SolveOptions solve;
    SamplingRule rule = SamplingRule::left_endpoint;
    unsigned workers = 1;
};

/// m-(i0, j) and m+(i0, j) for each M in `M_list`, rows ordered by M then j.
/// Throws ModelError for an empty list.
std::vector<GridStudyRow> study_grid_convergence(const HybridModel& model, const std::vector<int>& M_list,
                                                 const StudyOptions& options = {});

/// max_j |m-(j) at M_b - m-(j) at M_a| over a grid study table.
double grid_study_gap(const std::vector<GridStudyRow>& rows, int M_a, int M_b);

struct ProfileRow {
    double x = 0.0;          // u for exit profiles, b for occupation profiles
    std::size_t state = 0;
    double value = 0.0;
};

struct ProfileStudy {
    std::vector<ProfileRow> exit_low;    // m-(i0, j) as a function of u
    std::vector<ProfileRow> exit_high;   // m+(i0, j) as a function of u
    std::vector<ProfileRow> occupation;  // O(i0, j)(b) at the model's own u
};

/// Exit profiles in u (a fresh grid with zeta_0 = u for every u) and the
/// occupation profile in b. Levels must lie strictly inside (0, a) for u and
/// in [0, a] for b. Throws ModelError when both lists are empty.
ProfileStudy study_profiles(const HybridModel& model, int M, const std::vector<double>& u_list,
                            const std::vector<double>& b_list, const StudyOptions& options = {});

/// Paired-seed decoupling study on grid approximations with M in `M_list`.
std::vector<DecouplingRow> study_coupling(const HybridModel& model, const std::vector<int>& M_list,
                                          SamplingRule rule, const DecouplingOptions& options);

/// CSV M,j,m_minus,m_plus.
std::string grid_study_csv(const std::vector<GridStudyRow>& rows);
/// CSV label,decoupling_frequency,std_error,n_paths,sup_distance_q50,sup_distance_q90.
std::string coupling_study_csv(const std::vector<DecouplingRow>& rows);

}  // namespace hsde

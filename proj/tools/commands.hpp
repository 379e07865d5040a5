#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hybridsde/grid.hpp"
#include "hybridsde/model.hpp"

namespace hsde::cli {

enum ExitCode : int { ok = 0, io_error = 1, validation_error = 2, numerical_error = 3 };

/// File-driven run configuration. Every section except `model` is optional.
///
///   { "model": {...} | "path/to/model.json",   // path relative to this file
///     "grid":   {"M": 50, "cells_per_band": 10, "sampling_rule": "left_endpoint"},
///     "solver": {"tol": 1e-10},
///     "mc":     {"n_paths": 100000, "dt": 0.001, "seed": 1, "horizon": 10.0,
///                "bridge_correction": true, "target": "approximation" | "model"},
///     "occupation_levels": [0.5, 1.0],
///     "report": {"n": 100, "beta": 0, "gamma_rate": 0.5, "G": 1},
///     "bounds": {"K": 1.0, "C_star": 4, "t": 1.0, "epsilon_1": 0},
///     "study":  {"grid": {"M_list": [...]},
///                "profiles": {"u_list": [...], "b_list": [...]},
///                "coupling": {"M_list": [...], "horizon": 2, "n_paths": 10000, "dt": 0.001}} }
struct RunConfig {
    explicit RunConfig(HybridModel m) : model(std::move(m)) {}

    std::filesystem::path source;
    nlohmann::json resolved;  // config with the model inlined; hashed for provenance

    HybridModel model;
    int M = 50;
    int cells_per_band = 10;
    SamplingRule rule = SamplingRule::left_endpoint;
    double tol = 1e-10;

    std::size_t n_paths = 100000;
    double dt = 1e-3;
    std::uint64_t seed = 1;
    std::optional<double> horizon;
    bool bridge_correction = true;
    bool mc_on_model = false;

    std::vector<double> occupation_levels;

    double report_n = 0.0;  // 0 means 2M
    RateBoundParams report_bounds;

    std::optional<double> K;
    double C_star = 4.0;
    double bound_t = 1.0;
    double epsilon_1 = 0.0;

    std::vector<int> study_M_list;
    std::vector<double> study_u_list;
    std::vector<double> study_b_list;
    std::vector<int> coupling_M_list;
    double coupling_horizon = 2.0;
    std::size_t coupling_n_paths = 10000;
    double coupling_dt = 1e-3;
};

/// Loads and range-checks a run configuration. Syntax and schema problems
/// raise ParseError; out-of-range values raise ModelError.
RunConfig load_run_config(const std::filesystem::path& path);

/// Entry point shared by the executable and the tests. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hsde::cli

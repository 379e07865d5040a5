#include "commands.hpp"

#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "hybridsde/analysis.hpp"
#include "hybridsde/csv.hpp"
#include "hybridsde/errors.hpp"
#include "hybridsde/model_io.hpp"
#include "hybridsde/montecarlo.hpp"
#include "hybridsde/mrmbm.hpp"
#include "hybridsde/simulate.hpp"

namespace hsde::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---- config field helpers -------------------------------------------------

[[noreturn]] void bad_field(const std::string& field, const std::string& what) {
    throw ParseError("config." + field + ": " + what);
}

const json* section(const json& root, const std::string& key) {
    if (!root.contains(key)) return nullptr;
    const json& s = root.at(key);
    if (!s.is_object()) bad_field(key, "expected an object");
    return &s;
}

double number_or(const json* s, const std::string& path, const std::string& key, double fallback) {
    if (s == nullptr || !s->contains(key)) return fallback;
    const json& v = s->at(key);
    if (!v.is_number()) bad_field(path + "." + key, "expected a number");
    return v.get<double>();
}

long long integer_or(const json* s, const std::string& path, const std::string& key, long long fallback) {
    if (s == nullptr || !s->contains(key)) return fallback;
    const json& v = s->at(key);
    if (!v.is_number_integer()) bad_field(path + "." + key, "expected an integer");
    return v.get<long long>();
}

template <class T>
std::vector<T> list_or(const json* s, const std::string& path, const std::string& key) {
    if (s == nullptr || !s->contains(key)) return {};
    const json& v = s->at(key);
    if (!v.is_array()) bad_field(path + "." + key, "expected an array");
    std::vector<T> out;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const bool okay = std::is_integral_v<T> ? v[k].is_number_integer() : v[k].is_number();
        if (!okay) bad_field(path + "." + key + "[" + std::to_string(k) + "]", "expected a number");
        out.push_back(v[k].get<T>());
    }
    return out;
}

void require_range(bool ok, const std::string& what) {
    if (!ok) throw ModelError("config: " + what);
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// ---- output ---------------------------------------------------------------

class Output {
public:
    Output(fs::path dir, std::string command, const RunConfig& cfg) : dir_(std::move(dir)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw ParseError(dir_.string() + ": cannot create output directory (" + ec.message() + ")");
        manifest_["command"] = std::move(command);
        manifest_["config"] = cfg.source.filename().string();
        manifest_["config_hash"] = hex64(config_hash(cfg.resolved.dump()));
        manifest_["outputs"] = json::array();
        manifest_["log"] = json::object();
    }

    void write(const std::string& name, const std::string& content) {
        write_file_atomic(dir_ / name, content);
        manifest_["outputs"].push_back(name);
    }
    json& log() { return manifest_["log"]; }
    json& manifest() { return manifest_; }
    void finish() { write_file_atomic(dir_ / "manifest.json", manifest_.dump(2) + "\n"); }

private:
    fs::path dir_;
    json manifest_;
};

json upwind_log(const std::vector<SchemeSwitch>& switches) {
    json list = json::array();
    for (const auto& s : switches) list.push_back({{"state", s.state + 1}, {"band", s.band + 1}});
    return list;
}

json solve_log(const PassageSolution& sol) {
    return {{"residual", sol.residual},
            {"normalization_error", sol.normalization_error},
            {"refinement_steps", sol.refinement_steps},
            {"chain_size", sol.chain_size},
            {"exit_probability", sol.passage.exit_probability()},
            {"upwind_switches", upwind_log(sol.upwind)}};
}

GridApproximation approximation_of(const RunConfig& cfg) {
    return build_approximation(cfg.model, build_grid(cfg.model.start_level(), cfg.model.band_high(), cfg.M), cfg.rule);
}

McOptions mc_options(const RunConfig& cfg, unsigned workers) {
    McOptions o;
    o.n_paths = cfg.n_paths;
    o.dt = cfg.dt;
    o.seed = cfg.seed;
    o.horizon = cfg.horizon;
    o.bridge_correction = cfg.bridge_correction;
    o.workers = workers;
    o.occupation_levels = cfg.occupation_levels;
    o.config_hash = config_hash(cfg.resolved.dump());
    return o;
}

SolveOptions solve_options(const RunConfig& cfg) { return {cfg.cells_per_band, cfg.tol}; }

BoundConfig bound_config(const RunConfig& cfg, const ModelReport& report) {
    BoundConfig b;
    b.K = cfg.K.value_or(cfg.model.lipschitz_K().value_or(report.lipschitz_max));
    b.C_star = cfg.C_star;
    b.beta = cfg.report_bounds.beta;
    b.gamma_rate = cfg.report_bounds.gamma_rate;
    b.G = cfg.report_bounds.G;
    b.epsilon_1 = cfg.epsilon_1;
    b.validate();
    return b;
}

// ---- commands -------------------------------------------------------------

int cmd_validate(const RunConfig& cfg, Output& out, std::ostream& os) {
    const ModelReport report = validate_model(cfg.model);
    CsvWriter mcsv({"check", "state", "value"});
    mcsv.field("uniformization_rate").field("").field(report.uniformization_rate);
    mcsv.end_row();
    mcsv.field("sampled_sup_diagonal").field("").field(report.sampled_sup_diagonal);
    mcsv.end_row();
    mcsv.field("uniformization_rate_ok").field("").field(report.uniformization_rate_ok ? 1 : 0);
    mcsv.end_row();
    mcsv.field("generator_violations").field("").field(report.generator_violation_count);
    mcsv.end_row();
    for (const auto& l : report.lipschitz) {
        mcsv.field("lipschitz_" + l.coefficient).field(l.state + 1).field(l.estimate);
        mcsv.end_row();
    }
    out.write("model_report.csv", mcsv.str());

    os << "model: " << cfg.model.states() << " states on [0, " << format_double(cfg.model.band_high())
       << "], u = " << format_double(cfg.model.start_level()) << ", i0 = " << cfg.model.start_state() + 1 << "\n";
    os << "uniformization rate: " << format_double(report.uniformization_rate)
       << " (sampled sup |Lambda_ii| = " << format_double(report.sampled_sup_diagonal) << ")\n";
    os << "sampled Lipschitz estimate: " << format_double(report.lipschitz_max) << "\n";
    out.log()["model_valid"] = report.valid();
    out.log()["generator_violations"] = report.generator_violation_count;

    if (!report.valid()) {
        for (const auto& v : report.generator_violations) {
            os << "generator violation at x = " << format_double(v.x) << ": "
               << (v.row_sum ? "row " + std::to_string(v.row + 1) + " sums to "
                             : "entry (" + std::to_string(v.row + 1) + ", " + std::to_string(v.col + 1) + ") = ")
               << format_double(v.value) << "\n";
        }
        if (!report.uniformization_rate_ok) os << "uniformization rate below sup |Lambda_ii|\n";
        os << "model INVALID\n";
        out.finish();
        return validation_error;
    }

    const GridApproximation approx = approximation_of(cfg);
    const double n = cfg.report_n > 0.0 ? cfg.report_n : 2.0 * cfg.M;
    const ApproximationReport ar = approximation_report(cfg.model, approx, n, cfg.report_bounds);
    CsvWriter acsv({"quantity", "state", "value"});
    for (std::size_t i = 0; i < ar.mu_sup_error.size(); ++i) {
        acsv.field("mu_sup_error").field(i + 1).field(ar.mu_sup_error[i]);
        acsv.end_row();
    }
    for (std::size_t i = 0; i < ar.sigma_sup_error.size(); ++i) {
        acsv.field("sigma_sup_error").field(i + 1).field(ar.sigma_sup_error[i]);
        acsv.end_row();
    }
    const std::pair<const char*, double> scalars[] = {
        {"lambda_sup_error", ar.lambda_sup},
        {"coefficient_bound", ar.coefficient_bound},
        {"intensity_bound", ar.intensity_bound},
        {"coefficient_bound_holds", ar.coefficient_bound_holds ? 1.0 : 0.0},
        {"intensity_bound_holds", ar.intensity_bound_holds ? 1.0 : 0.0},
        {"mu_magnitude_excess", ar.mu_magnitude_excess},
        {"sigma_magnitude_excess", ar.sigma_magnitude_excess},
    };
    for (const auto& [name, value] : scalars) {
        acsv.field(name).field("").field(value);
        acsv.end_row();
    }
    out.write("approximation_report.csv", acsv.str());
    out.write("approximation.csv", approximation_csv(approx));
    out.write("lambda_hat.csv", lambda_hat_csv(approx));

    const BoundConfig bounds = bound_config(cfg, report);
    out.log()["bounds"] = {{"K", bounds.K},
                           {"C_star", bounds.C_star},
                           {"beta_star", bounds.beta_star()},
                           {"t", cfg.bound_t},
                           {"C_t", error_bound_C(cfg.bound_t, bounds)}};

    os << "grid: M = " << cfg.M << ", rule = " << to_string(cfg.rule) << ", n = " << format_double(n) << "\n";
    os << "sup |mu - mu_hat| = " << format_double(ar.mu_sup) << ", sup |sigma - sigma_hat| = "
       << format_double(ar.sigma_sup) << ", sup ||Lambda_hat - Lambda|| = " << format_double(ar.lambda_sup) << "\n";
    os << "coefficient bound " << format_double(ar.coefficient_bound) << (ar.coefficient_bound_holds ? " holds" : " VIOLATED")
       << "; intensity bound " << format_double(ar.intensity_bound) << (ar.intensity_bound_holds ? " holds" : " VIOLATED")
       << "\n";
    os << "model valid\n";
    out.finish();
    return ok;
}

int cmd_solve(const RunConfig& cfg, Output& out, std::ostream& os, bool dump_chain) {
    const GridApproximation approx = approximation_of(cfg);
    if (dump_chain) {
        const DiscretizedChain chain = discretize(assemble_qrs(approx, approx.kill_rate, approx.start_state), cfg.cells_per_band);
        out.write("chain_nodes.csv", chain_nodes_csv(chain));
        out.write("chain_generator.csv", chain_triplets_csv(chain));
    }
    const PassageSolution sol = solve_passage(approx, solve_options(cfg));
    out.write("passage.csv", passage_csv(sol.passage));
    out.write("occupation.csv", occupation_csv(sol.passage, cfg.occupation_levels));
    out.log()["solver"] = solve_log(sol);

    for (std::size_t j = 0; j < sol.passage.states(); ++j) {
        os << "j = " << j + 1 << ": m_minus = " << format_double(sol.passage.m_minus[j])
           << ", m_plus = " << format_double(sol.passage.m_plus[j]) << "\n";
    }
    os << "exit probability " << format_double(sol.passage.exit_probability()) << ", residual "
       << format_double(sol.residual) << ", upwind switches " << sol.upwind.size() << "\n";
    out.finish();
    return ok;
}

PassageEstimates run_mc(const RunConfig& cfg, const GridApproximation& approx, unsigned workers) {
    const McOptions o = mc_options(cfg, workers);
    return cfg.mc_on_model ? mc_passage(Dynamics(cfg.model), o) : mc_passage(Dynamics(approx), o);
}

json mc_log(const RunConfig& cfg, const PassageEstimates& est) {
    return {{"target", cfg.mc_on_model ? "model" : "approximation"},
            {"n_paths", est.n_paths},
            {"seed", std::to_string(est.seed)},
            {"dt", cfg.dt},
            {"bridge_correction", cfg.bridge_correction},
            {"killed_fraction", est.killed.value},
            {"censored_fraction", est.censored.value}};
}

int cmd_mc(const RunConfig& cfg, Output& out, std::ostream& os, unsigned workers, bool dump_path) {
    const GridApproximation approx = approximation_of(cfg);
    const PassageEstimates est = run_mc(cfg, approx, workers);
    out.write("estimates.csv", estimates_csv(est));
    if (dump_path) {
        SimOptions sim;
        sim.dt = cfg.dt;
        sim.horizon = cfg.horizon;
        sim.bridge_correction = cfg.bridge_correction;
        sim.record_path = true;
        const RngStream rng(cfg.seed, 0);
        const PathSample path = cfg.mc_on_model ? simulate_hybrid(Dynamics(cfg.model), rng, sim)
                                                : simulate_hybrid(Dynamics(approx), rng, sim);
        out.write("path_0.csv", path_csv(path));
    }
    out.log()["mc"] = mc_log(cfg, est);
    for (std::size_t j = 0; j < est.m_minus.size(); ++j) {
        os << "j = " << j + 1 << ": m_minus = " << format_double(est.m_minus[j].value) << " +- "
           << format_double(est.m_minus[j].std_error) << ", m_plus = " << format_double(est.m_plus[j].value)
           << " +- " << format_double(est.m_plus[j].std_error) << "\n";
    }
    os << "killed " << format_double(est.killed.value) << ", censored " << format_double(est.censored.value) << "\n";
    out.finish();
    return ok;
}

int cmd_compare(const RunConfig& cfg, Output& out, std::ostream& os, unsigned workers) {
    const GridApproximation approx = approximation_of(cfg);
    const PassageSolution sol = solve_passage(approx, solve_options(cfg));
    const PassageEstimates est = run_mc(cfg, approx, workers);

    CsvWriter csv({"quantity", "state", "solver", "mc", "std_error", "abs_diff", "pass"});
    std::size_t rows = 0;
    std::size_t passed = 0;
    auto row = [&](const std::string& quantity, std::size_t j, double solver, const McEstimate& mc) {
        const double diff = std::abs(solver - mc.value);
        const bool pass = diff <= 3.0 * mc.std_error;
        csv.field(quantity).field(j + 1).field(solver).field(mc.value).field(mc.std_error).field(diff);
        csv.field(pass ? "true" : "false");
        csv.end_row();
        ++rows;
        passed += pass ? 1 : 0;
    };
    for (std::size_t j = 0; j < sol.passage.states(); ++j) row("m_minus", j, sol.passage.m_minus[j], est.m_minus[j]);
    for (std::size_t j = 0; j < sol.passage.states(); ++j) row("m_plus", j, sol.passage.m_plus[j], est.m_plus[j]);
    for (std::size_t l = 0; l < cfg.occupation_levels.size(); ++l) {
        const double b = cfg.occupation_levels[l];
        for (std::size_t j = 0; j < sol.passage.states(); ++j) {
            row("O(" + format_double(b) + ")", j, sol.passage.occupation(j, b), est.occupation[l][j]);
        }
    }
    out.write("compare.csv", csv.str());
    out.write("passage.csv", passage_csv(sol.passage));
    out.write("estimates.csv", estimates_csv(est));
    out.log()["solver"] = solve_log(sol);
    out.log()["mc"] = mc_log(cfg, est);
    out.log()["rows"] = rows;
    out.log()["rows_passed"] = passed;
    os << passed << " of " << rows << " rows within 3 standard errors\n";
    out.finish();
    return ok;
}

std::vector<PlotPoint> by_state(const std::vector<ProfileRow>& rows) {
    std::vector<PlotPoint> pts;
    for (const auto& r : rows) pts.push_back({r.x, "j=" + std::to_string(r.state + 1), r.value});
    return pts;
}

int cmd_study(const RunConfig& cfg, Output& out, std::ostream& os, const std::string& kind, unsigned workers) {
    StudyOptions so;
    so.solve = solve_options(cfg);
    so.rule = cfg.rule;
    so.workers = workers;
    const std::string i0 = std::to_string(cfg.model.start_state() + 1);
    std::vector<PlotManifest> plots;

    if (kind == "grid") {
        if (cfg.study_M_list.empty()) throw ModelError("study.grid.M_list is empty");
        const auto rows = study_grid_convergence(cfg.model, cfg.study_M_list, so);
        out.write("grid_study.csv", grid_study_csv(rows));
        std::vector<PlotPoint> pts;
        for (const auto& r : rows) pts.push_back({static_cast<double>(r.M), "j=" + std::to_string(r.state + 1), r.m_minus});
        out.write("plot_grid_convergence.csv", plot_csv(pts));
        plots.push_back({"plot_grid_convergence.csv", "m_minus(" + i0 + ", j) against M", "M", "m_minus"});
        if (cfg.study_M_list.size() >= 2) {
            const int a = cfg.study_M_list[cfg.study_M_list.size() - 2];
            const int b = cfg.study_M_list.back();
            const double gap = grid_study_gap(rows, a, b);
            out.log()["last_gap"] = {{"M_a", a}, {"M_b", b}, {"max_abs_diff_m_minus", gap}};
            os << "max_j |m_minus(M=" << b << ") - m_minus(M=" << a << ")| = " << format_double(gap) << "\n";
        }
    } else if (kind == "profiles") {
        if (cfg.study_u_list.empty() && cfg.study_b_list.empty()) {
            throw ModelError("study.profiles needs a nonempty u_list or b_list");
        }
        const ProfileStudy ps = study_profiles(cfg.model, cfg.M, cfg.study_u_list, cfg.study_b_list, so);
        if (!ps.exit_low.empty()) {
            out.write("plot_exit_low.csv", plot_csv(by_state(ps.exit_low)));
            out.write("plot_exit_high.csv", plot_csv(by_state(ps.exit_high)));
            plots.push_back({"plot_exit_low.csv", "m_minus(" + i0 + ", j) against u", "u", "m_minus"});
            plots.push_back({"plot_exit_high.csv", "m_plus(" + i0 + ", j) against u", "u", "m_plus"});
        }
        if (!ps.occupation.empty()) {
            out.write("plot_occupation.csv", plot_csv(by_state(ps.occupation)));
            plots.push_back({"plot_occupation.csv", "O(" + i0 + ", j)(b) at u = " + format_double(cfg.model.start_level()),
                             "b", "expected occupation time"});
        }
        os << "profiles: " << cfg.study_u_list.size() << " restart levels, " << cfg.study_b_list.size()
           << " occupation levels\n";
    } else if (kind == "coupling") {
        if (cfg.coupling_M_list.empty()) throw ModelError("study.coupling.M_list is empty");
        DecouplingOptions d;
        d.horizon = cfg.coupling_horizon;
        d.n_paths = cfg.coupling_n_paths;
        d.dt = cfg.coupling_dt;
        d.seed = cfg.seed;
        d.workers = workers;
        const auto rows = study_coupling(cfg.model, cfg.coupling_M_list, cfg.rule, d);
        out.write("coupling_study.csv", coupling_study_csv(rows));
        std::vector<PlotPoint> freq;
        std::vector<PlotPoint> dist;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const double M = cfg.coupling_M_list[k];
            freq.push_back({M, "decoupling_frequency", rows[k].frequency.value});
            dist.push_back({M, "q50", rows[k].sup_distance_q50});
            dist.push_back({M, "q90", rows[k].sup_distance_q90});
            os << rows[k].label << ": decoupling frequency " << format_double(rows[k].frequency.value)
               << ", median sup|X - X_hat| " << format_double(rows[k].sup_distance_q50) << "\n";
        }
        out.write("plot_decoupling.csv", plot_csv(freq));
        out.write("plot_sup_distance.csv", plot_csv(dist));
        plots.push_back({"plot_decoupling.csv", "Decoupling frequency by the horizon", "M", "frequency"});
        plots.push_back({"plot_sup_distance.csv", "Quantiles of sup |X - X_hat|", "M", "sup distance"});
        out.log()["coupling"] = {{"horizon", d.horizon}, {"n_paths", d.n_paths}, {"dt", d.dt}, {"seed", std::to_string(d.seed)}};
    } else {
        throw ModelError("unknown study kind '" + kind + "' (expected grid, profiles or coupling)");
    }
    out.manifest()["plots"] = plot_manifest(plots).at("plots");
    out.finish();
    return ok;
}

}  // namespace

RunConfig load_run_config(const fs::path& path) {
    const json root = load_json_file(path);
    if (!root.is_object()) throw ParseError(path.string() + ": expected a JSON object");
    if (!root.contains("model")) bad_field("model", "missing required field");

    json resolved = root;
    json model_json = root.at("model");
    if (model_json.is_string()) {
        const fs::path model_path = path.parent_path() / model_json.get<std::string>();
        model_json = load_json_file(model_path);
        if (model_json.contains("model")) model_json = model_json.at("model");
        resolved["model"] = model_json;
    } else if (!model_json.is_object()) {
        bad_field("model", "expected an object or a file path");
    }

    RunConfig cfg(model_from_json(model_json, "model"));
    cfg.source = path;
    cfg.resolved = std::move(resolved);

    const json* grid = section(root, "grid");
    cfg.M = static_cast<int>(integer_or(grid, "grid", "M", 50));
    cfg.cells_per_band = static_cast<int>(integer_or(grid, "grid", "cells_per_band", 10));
    if (grid && grid->contains("sampling_rule")) {
        const json& r = grid->at("sampling_rule");
        if (!r.is_string()) bad_field("grid.sampling_rule", "expected a string");
        cfg.rule = sampling_rule_from_string(r.get<std::string>());
    }
    cfg.tol = number_or(section(root, "solver"), "solver", "tol", 1e-10);

    const json* mc = section(root, "mc");
    const long long n_paths = integer_or(mc, "mc", "n_paths", 100000);
    require_range(n_paths >= 1, "mc.n_paths must be at least 1");
    cfg.n_paths = static_cast<std::size_t>(n_paths);
    cfg.dt = number_or(mc, "mc", "dt", 1e-3);
    if (mc && mc->contains("seed")) {
        const json& s = mc->at("seed");
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
            bad_field("mc.seed", "expected a nonnegative integer");
        }
        cfg.seed = s.get<std::uint64_t>();
    }
    if (mc && mc->contains("horizon")) cfg.horizon = number_or(mc, "mc", "horizon", 0.0);
    if (mc && mc->contains("bridge_correction")) {
        const json& b = mc->at("bridge_correction");
        if (!b.is_boolean()) bad_field("mc.bridge_correction", "expected true or false");
        cfg.bridge_correction = b.get<bool>();
    }
    if (mc && mc->contains("target")) {
        const json& t = mc->at("target");
        if (!t.is_string()) bad_field("mc.target", "expected a string");
        const std::string target = t.get<std::string>();
        require_range(target == "model" || target == "approximation", "mc.target must be 'model' or 'approximation'");
        cfg.mc_on_model = target == "model";
    }

    cfg.occupation_levels = list_or<double>(&root, "", "occupation_levels");
    if (!root.contains("occupation_levels")) {
        cfg.occupation_levels = {cfg.model.start_level(), cfg.model.band_high()};
    }

    const json* report = section(root, "report");
    cfg.report_n = number_or(report, "report", "n", 0.0);
    cfg.report_bounds.beta = number_or(report, "report", "beta", 0.0);
    cfg.report_bounds.gamma_rate = number_or(report, "report", "gamma_rate", 0.5);
    cfg.report_bounds.G = number_or(report, "report", "G", 1.0);

    const json* bounds = section(root, "bounds");
    if (bounds && bounds->contains("K")) cfg.K = number_or(bounds, "bounds", "K", 0.0);
    cfg.C_star = number_or(bounds, "bounds", "C_star", 4.0);
    cfg.bound_t = number_or(bounds, "bounds", "t", 1.0);
    cfg.epsilon_1 = number_or(bounds, "bounds", "epsilon_1", 0.0);

    if (const json* study = section(root, "study")) {
        cfg.study_M_list = list_or<int>(section(*study, "grid"), "study.grid", "M_list");
        const json* profiles = section(*study, "profiles");
        cfg.study_u_list = list_or<double>(profiles, "study.profiles", "u_list");
        cfg.study_b_list = list_or<double>(profiles, "study.profiles", "b_list");
        const json* coupling = section(*study, "coupling");
        cfg.coupling_M_list = list_or<int>(coupling, "study.coupling", "M_list");
        cfg.coupling_horizon = number_or(coupling, "study.coupling", "horizon", 2.0);
        const long long cn = integer_or(coupling, "study.coupling", "n_paths", 10000);
        require_range(cn >= 1, "study.coupling.n_paths must be at least 1");
        cfg.coupling_n_paths = static_cast<std::size_t>(cn);
        cfg.coupling_dt = number_or(coupling, "study.coupling", "dt", cfg.dt);
    }

    const double a = cfg.model.band_high();
    require_range(cfg.M >= 1, "grid.M must be at least 1");
    require_range(cfg.cells_per_band >= 1, "grid.cells_per_band must be at least 1");
    require_range(cfg.tol > 0.0, "solver.tol must be positive");
    require_range(cfg.dt > 0.0 && std::isfinite(cfg.dt), "mc.dt must be positive");
    require_range(!cfg.horizon || *cfg.horizon > 0.0, "mc.horizon must be positive");
    for (double b : cfg.occupation_levels) require_range(b >= 0.0 && b <= a, "occupation levels must lie in [0, a]");
    require_range(cfg.report_n == 0.0 || cfg.report_n >= 2.0, "report.n must be at least 2");
    for (int M : cfg.study_M_list) require_range(M >= 1, "study.grid.M_list entries must be at least 1");
    for (int M : cfg.coupling_M_list) require_range(M >= 1, "study.coupling.M_list entries must be at least 1");
    require_range(cfg.coupling_horizon > 0.0, "study.coupling.horizon must be positive");
    require_range(cfg.coupling_dt > 0.0, "study.coupling.dt must be positive");
    return cfg;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hybrid SDE first-passage solver, simulator and studies", "hybridsde"};
    app.require_subcommand(1);
    std::string config;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    unsigned workers = 1;
    std::string kind;
    bool dump_chain = false;
    bool dump_path = false;

    auto add_common = [&](CLI::App* sub, bool uses_rng) {
        sub->add_option("--config", config, "Run configuration (JSON)")->required();
        sub->add_option("--out", out_dir, "Output directory");
        if (uses_rng) {
            sub->add_option("--seed", seed, "Override mc.seed");
            sub->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
        }
    };
    auto* validate = app.add_subcommand("validate", "Check the model and report approximation errors");
    add_common(validate, false);
    auto* solve = app.add_subcommand("solve", "First-passage quantities of the grid approximation");
    add_common(solve, false);
    solve->add_flag("--dump-chain", dump_chain, "Also write the discretized chain");
    auto* mc = app.add_subcommand("mc", "Monte Carlo estimates");
    add_common(mc, true);
    mc->add_flag("--dump-path", dump_path, "Also write the trajectory of path 0");
    auto* compare = app.add_subcommand("compare", "Solver against Monte Carlo");
    add_common(compare, true);
    auto* study = app.add_subcommand("study", "Convergence and profile studies");
    add_common(study, true);
    study->add_option("--kind", kind, "grid, profiles or coupling")
        ->required()
        ->check(CLI::IsMember({"grid", "profiles", "coupling"}));

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return io_error;
    }

    try {
        RunConfig cfg = load_run_config(config);
        if (seed) {
            cfg.seed = *seed;
            cfg.resolved["mc"]["seed"] = *seed;
        }
        const std::string name = app.get_subcommands().front()->get_name();
        Output output(out_dir, name, cfg);
        if (name == "validate") return cmd_validate(cfg, output, out);
        if (name == "solve") return cmd_solve(cfg, output, out, dump_chain);
        if (name == "mc") return cmd_mc(cfg, output, out, workers, dump_path);
        if (name == "compare") return cmd_compare(cfg, output, out, workers);
        return cmd_study(cfg, output, out, kind, workers);
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return io_error;
    } catch (const ModelError& e) {
        err << "error: " << e.what() << "\n";
        return validation_error;
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << "\n";
        return numerical_error;
    } catch (const json::exception& e) {
        err << "error: " << e.what() << "\n";
        return io_error;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return io_error;
    }
}

}  // namespace hsde::cli

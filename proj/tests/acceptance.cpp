// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "hybridsde/analysis.hpp"
#include "hybridsde/montecarlo.hpp"
#include "hybridsde/mrmbm.hpp"
#include "support.hpp"

using namespace hsde;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

PassageSolution solve_at(const HybridModel& m, int M, int K = 10) {
    const GridApproximation ap = build_approximation(m, build_grid(m.start_level(), m.band_high(), M));
    return solve_passage(ap, {K, 1e-10});
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome conservation() {
    const PassageSolution s = solve_at(testing::example_5_1(), 50, 10);
    double total = 0.0;
    for (std::size_t j = 0; j < 3; ++j) total += s.passage.m_minus[j] + s.passage.m_plus[j];
    const double err = std::abs(total - 1.0);
    return {err <= 1e-8, "|sum - 1| = " + fmt("%.3e", err) + " (chain size " + std::to_string(s.chain_size) + ")"};
}

Outcome scale_oracle() {
    const double target = testing::scale_exit_high(0.5, 1.0, 0.5, 1.0);
    const PassageSolution s = solve_at(testing::brownian(0.5, 1.0), 50, 10);  // 1000 cells
    const double err = std::abs(s.passage.m_plus[0] - target);
    return {err <= 5e-3, "m+ = " + fmt("%.6f", s.passage.m_plus[0]) + ", target " + fmt("%.6f", target) +
                             ", error " + fmt("%.2e", err)};
}

Outcome green_oracle() {
    // The closed form 2 min(u,y)(a - max(u,y)) / a is the driftless Green's
    // function, so the oracle is evaluated on the mu = 0 variant.
    const double target = testing::simpson(
        [](double y) { return 2.0 * std::min(0.5, y) * (1.0 - std::max(0.5, y)); }, 0.0, 0.5);
    const PassageSolution s = solve_at(testing::brownian(0.0, 1.0), 50, 10);
    const double o = s.passage.occupation(0, 0.5);
    const double err = std::abs(o - target);
    const PassageSolution drifted = solve_at(testing::brownian(0.5, 1.0), 50, 10);
    return {err <= 5e-3, "O(0.5) = " + fmt("%.6f", o) + ", target " + fmt("%.6f", target) + ", error " +
                             fmt("%.2e", err) + "; drifted variant " + fmt("%.6f", drifted.passage.occupation(0, 0.5)) +
                             " vs drifted Green " + fmt("%.6f", testing::green_occupation(0.5, 1.0, 0.5, 1.0, 0.5))};
}

Outcome symmetric() {
    const PassageSolution s = solve_at(testing::brownian(0.0, 1.0, 0.3, 1.0), 50, 10);
    const double err = std::abs(s.passage.m_plus[0] - 0.3);
    return {err <= 5e-3, "u = 0.3: m+ = " + fmt("%.6f", s.passage.m_plus[0]) + ", error " + fmt("%.2e", err)};
}

Outcome cross_validation() {
    const cli::RunConfig cfg = cli::load_run_config(testing::config_path("example_5_1.json"));
    const GridApproximation ap = build_approximation(cfg.model, build_grid(0.5, 1.0, cfg.M), cfg.rule);
    const PassageSolution s = solve_passage(ap, {cfg.cells_per_band, cfg.tol});
    McOptions o;
    o.n_paths = 100000;
    o.dt = 1e-3;
    o.seed = cfg.seed;
    o.bridge_correction = cfg.bridge_correction;
    const PassageEstimates est = mc_passage(ap, o);
    bool pass = true;
    double worst = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
        for (int side = 0; side < 2; ++side) {
            const double solver = side == 0 ? s.passage.m_minus[j] : s.passage.m_plus[j];
            const McEstimate& mc = side == 0 ? est.m_minus[j] : est.m_plus[j];
            const double z = std::abs(solver - mc.value) / mc.std_error;
            worst = std::max(worst, z);
            pass = pass && z <= 3.0;
        }
    }
    return {pass, "worst |solver - MC| / SE = " + fmt("%.2f", worst) + " over 6 entries, censored " +
                      fmt("%.1e", est.censored.value)};
}

Outcome plateau() {
    const auto rows = study_grid_convergence(testing::example_5_1(), {5, 10, 20, 30, 40, 50});
    const double gap = grid_study_gap(rows, 40, 50);
    return {gap <= 0.01, "max_j |m-(50) - m-(40)| = " + fmt("%.2e", gap)};
}

Outcome structural_zero() {
    std::vector<double> us;
    for (int k = 1; k <= 9; ++k) us.push_back(k / 10.0);
    const ProfileStudy p = study_profiles(testing::example_5_2(), 50, us, {});
    double worst = 0.0;
    for (const auto& r : p.exit_low) {
        if (r.state == 2) worst = std::max(worst, r.value);
    }
    return {worst <= 1e-3, "max_u m-(2,3)(u) = " + fmt("%.2e", worst)};
}

Outcome jump_law() {
    // Frozen X makes Lambda constant.
    const HybridModel m = testing::example_5_1();
    const SojournTest s = sojourn_law_test(m, 1, 0.5, 10000, 2024);
    const auto kernel = jump_kernel_test(m, 1, 0.5, 10000, 2025);
    bool kernel_ok = true;
    std::string entries;
    for (const auto& e : kernel) {
        kernel_ok = kernel_ok && e.pass;
        entries += " " + fmt("%.4f", e.observed) + "/" + fmt("%.4f", e.expected);
    }
    const bool ks_ok = s.ks.n == 10000 && s.ks.p_value > 0.01;
    return {ks_ok && kernel_ok, "KS D = " + fmt("%.4f", s.ks.statistic) + ", p = " + fmt("%.3f", s.ks.p_value) +
                                    "; kernel observed/expected" + entries};
}

Outcome decoupling() {
    DecouplingOptions o;
    o.horizon = 2.0;
    o.n_paths = 10000;
    o.dt = 1e-3;
    o.seed = 20240501;
    const auto rows = study_coupling(testing::example_5_1(), {5, 20, 50}, SamplingRule::left_endpoint, o);
    bool pass = true;
    std::string detail;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (k > 0) {
            pass = pass && rows[k].frequency.value < rows[k - 1].frequency.value &&
                   rows[k].sup_distance_q50 < rows[k - 1].sup_distance_q50;
        }
        detail += rows[k].label + ": freq " + fmt("%.4f", rows[k].frequency.value) + ", median sup " +
                  fmt("%.2e", rows[k].sup_distance_q50) + (k + 1 < rows.size() ? "; " : "");
    }
    return {pass, detail};
}

Outcome hygiene() {
    bool pass = true;
    double worst = 0.0;
    for (const char* name : {"example_5_1.json", "example_5_2.json", "bm_oracle.json"}) {
        const cli::RunConfig cfg = cli::load_run_config(testing::config_path(name));
        const GridApproximation ap =
            build_approximation(cfg.model, build_grid(cfg.model.start_level(), cfg.model.band_high(), cfg.M), cfg.rule);
        const PassageSolution s = solve_passage(ap, {cfg.cells_per_band, cfg.tol});
        worst = std::max(worst, s.residual);
        pass = pass && s.residual <= 1e-10;
    }

    const fs::path scratch = fs::temp_directory_path() / "hsde_acceptance";
    fs::remove_all(scratch);
    const std::string cfg = testing::config_path("example_5_1.json").string();
    auto invoke = [&](std::vector<std::string> args, const std::string& dir) {
        args.insert(args.end(), {"--config", cfg, "--out", (scratch / dir).string()});
        std::ostringstream out, err;
        return cli::run(args, out, err) == 0;
    };
    bool ran = invoke({"mc", "--workers", "1"}, "mc1") && invoke({"mc", "--workers", "2"}, "mc2") &&
               invoke({"solve"}, "s1") && invoke({"solve"}, "s2") && invoke({"study", "--kind", "profiles"}, "p1") &&
               invoke({"study", "--kind", "profiles"}, "p2");
    bool identical = ran;
    for (const auto& [a, b] : std::vector<std::pair<std::string, std::string>>{{"mc1", "mc2"}, {"s1", "s2"}, {"p1", "p2"}}) {
        for (const auto& entry : fs::directory_iterator(scratch / a)) {
            identical = identical && slurp(entry.path()) == slurp(scratch / b / entry.path().filename());
        }
    }
    fs::remove_all(scratch);
    return {pass && identical, "max residual " + fmt("%.2e", worst) + " over 3 configs; CLI outputs " +
                                   (identical ? "byte-identical" : "DIFFER") + " across reruns and worker counts"};
}

}  // namespace

int main() {
    struct Criterion {
        std::string name;
        std::function<Outcome()> check;
        double time_limit;  // seconds; infinite when the criterion sets none
    };
    const double none = INFINITY;
    const std::vector<Criterion> criteria{
        {"conservation (example 1, M=50, K=10)", conservation, 30.0},
        {"scale-function oracle", scale_oracle, 10.0},
        {"Green's-function oracle", green_oracle, 10.0},
        {"symmetric case m+ = u/a", symmetric, none},
        {"solver vs Monte Carlo (1e5 paths)", cross_validation, 300.0},
        {"grid-convergence plateau", plateau, none},
        {"structural zero (example 2)", structural_zero, none},
        {"jump-law statistical tests", jump_law, none},
        {"decoupling trend", decoupling, none},
        {"numerics hygiene and reproducibility", hygiene, none},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto start = std::chrono::steady_clock::now();
        Outcome r;
        try {
            r = criteria[k].check();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = secs <= criteria[k].time_limit;
        const bool pass = r.pass && in_time;
        failures += !pass;
        std::printf("[%s] criterion %zu: %s: %s (%.2f s%s)\n", pass ? "PASS" : "FAIL", k + 1,
                    criteria[k].name.c_str(), r.detail.c_str(), secs, in_time ? "" : ", over the time limit");
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}

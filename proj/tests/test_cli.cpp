#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "commands.hpp"
#include "hybridsde/errors.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using hsde::cli::run;

namespace {

struct Scratch {
    fs::path dir;
    Scratch() {
        dir = fs::temp_directory_path() / ("hsde_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    fs::path write(const std::string& name, const std::string& text) const {
        std::ofstream(dir / name) << text;
        return dir / name;
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result call(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

const char* kSmall = R"({
  "model": {"states": 2, "mu": [[0.2], [-0.1, 0.3]], "sigma": [[1.0], [0.8]],
            "lambda": [[[-1.0], [1.0]], [[0.0, 2.0], [0.0, -2.0]]],
            "a": 1.0, "u": 0.4, "i0": 1},
  "grid": {"M": 8, "cells_per_band": 4},
  "mc": {"n_paths": 400, "dt": 0.002, "seed": 5},
  "occupation_levels": [0.4, 1.0],
  "study": {"grid": {"M_list": [4, 8]},
            "profiles": {"u_list": [0.2, 0.6], "b_list": [0.5]},
            "coupling": {"M_list": [2, 8], "horizon": 0.5, "n_paths": 50}}
})";

}  // namespace

TEST_CASE("every command succeeds on a small configuration and writes a manifest") {
    Scratch s;
    const fs::path cfg = s.write("small.json", kSmall);
    const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> cases{
        {{"validate"}, {"model_report.csv", "approximation_report.csv", "approximation.csv", "lambda_hat.csv"}},
        {{"solve", "--dump-chain"}, {"passage.csv", "occupation.csv", "chain_nodes.csv", "chain_generator.csv"}},
        {{"mc", "--dump-path"}, {"estimates.csv", "path_0.csv"}},
        {{"compare"}, {"compare.csv", "passage.csv", "estimates.csv"}},
        {{"study", "--kind", "grid"}, {"grid_study.csv", "plot_grid_convergence.csv"}},
        {{"study", "--kind", "profiles"}, {"plot_exit_low.csv", "plot_exit_high.csv", "plot_occupation.csv"}},
        {{"study", "--kind", "coupling"}, {"coupling_study.csv", "plot_decoupling.csv", "plot_sup_distance.csv"}},
    };
    int k = 0;
    for (const auto& [args, files] : cases) {
        const fs::path out = s.dir / ("out" + std::to_string(k++));
        std::vector<std::string> full = args;
        full.insert(full.end(), {"--config", cfg.string(), "--out", out.string()});
        const Result r = call(full);
        INFO(args.front() << ": " << r.err);
        CHECK(r.code == 0);
        for (const auto& f : files) CHECK(fs::exists(out / f));
        const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
        CHECK(manifest["command"] == args.front());
        CHECK(manifest["config"] == "small.json");
        CHECK(manifest["outputs"].size() == files.size());
        CHECK(manifest["config_hash"].get<std::string>().size() == 16);
    }
}

TEST_CASE("exit codes") {
    Scratch s;
    const fs::path out = s.dir / "out";

    SUBCASE("usage errors and missing files exit with 1") {
        CHECK(call({}).code == 1);
        CHECK(call({"solve"}).code == 1);
        CHECK(call({"frobnicate", "--config", "x.json"}).code == 1);
        CHECK(call({"study", "--kind", "bogus", "--config", "x.json"}).code == 1);
        const Result missing = call({"solve", "--config", (s.dir / "absent.json").string(), "--out", out.string()});
        CHECK(missing.code == 1);
        CHECK(missing.err.find("cannot open") != std::string::npos);
    }
    SUBCASE("malformed JSON cites line and column") {
        const fs::path cfg = s.write("broken.json", "{\n  \"model\": {\n    \"states\": 1,,\n  }\n}\n");
        const Result r = call({"validate", "--config", cfg.string(), "--out", out.string()});
        CHECK(r.code == 1);
        CHECK(r.err.find("broken.json:3:") != std::string::npos);
    }
    SUBCASE("schema problems exit with 1 and name the field") {
        std::string text = kSmall;
        text.replace(text.find("\"a\": 1.0"), 8, "\"a\": \"one\"");
        const Result r = call({"solve", "--config", s.write("schema.json", text).string(), "--out", out.string()});
        CHECK(r.code == 1);
        CHECK(r.err.find("model.a") != std::string::npos);
    }
    SUBCASE("an invalid generator exits with 2") {
        const fs::path cfg = s.write("bad.json", R"({"model": {"states": 2, "mu": [[0], [0]], "sigma": [[1], [1]],
            "lambda": [[[0, 1], [0, -1]], [[1], [-1]]], "a": 1, "u": 0.5, "i0": 1}})");
        const Result v = call({"validate", "--config", cfg.string(), "--out", out.string()});
        CHECK(v.code == 2);
        CHECK(fs::exists(out / "model_report.csv"));
        CHECK(call({"solve", "--config", cfg.string(), "--out", out.string()}).code == 2);
    }
    SUBCASE("out-of-range settings exit with 2") {
        std::string zero = kSmall;
        zero.replace(zero.find("\"n_paths\": 400"), 14, "\"n_paths\": 0");
        CHECK(call({"mc", "--config", s.write("zero.json", zero).string(), "--out", out.string()}).code == 2);

        std::string empty = kSmall;
        empty.replace(empty.find("\"M_list\": [4, 8]"), 16, "\"M_list\": []");
        CHECK(call({"study", "--kind", "grid", "--config", s.write("empty.json", empty).string(), "--out",
                    out.string()}).code == 2);
    }
    SUBCASE("a trapped discretization exits with 2") {
        const fs::path cfg = s.write("trap.json", R"({"model": {"states": 1, "mu": [[0]], "sigma": [[0]],
            "lambda": [[[0]]], "a": 1, "u": 0.5, "i0": 1}, "grid": {"M": 4}})");
        const Result r = call({"solve", "--config", cfg.string(), "--out", out.string()});
        CHECK(r.code == 2);
        CHECK(r.err.find("trap") != std::string::npos);
    }
}

TEST_CASE("reruns are byte-identical and the seed override takes effect") {
    Scratch s;
    const fs::path cfg = s.write("small.json", kSmall);
    auto run_mc = [&](const std::string& dir, std::vector<std::string> extra) {
        std::vector<std::string> args{"mc", "--config", cfg.string(), "--out", (s.dir / dir).string()};
        args.insert(args.end(), extra.begin(), extra.end());
        REQUIRE(call(args).code == 0);
        return slurp(s.dir / dir / "estimates.csv") + slurp(s.dir / dir / "manifest.json");
    };
    const std::string first = run_mc("a", {});
    CHECK(run_mc("b", {}) == first);
    CHECK(run_mc("c", {"--workers", "2"}) == first);
    const std::string other = run_mc("d", {"--seed", "6"});
    CHECK(other != first);
    CHECK(slurp(s.dir / "d" / "estimates.csv").find(",400,6\n") != std::string::npos);
    CHECK(run_mc("e", {"--seed", "5"}) == first);

    std::vector<std::string> solve{"solve", "--config", cfg.string(), "--out", (s.dir / "s1").string()};
    REQUIRE(call(solve).code == 0);
    solve.back() = (s.dir / "s2").string();
    REQUIRE(call(solve).code == 0);
    CHECK(slurp(s.dir / "s1" / "passage.csv") == slurp(s.dir / "s2" / "passage.csv"));
    CHECK(slurp(s.dir / "s1" / "occupation.csv") == slurp(s.dir / "s2" / "occupation.csv"));
}

TEST_CASE("run configuration defaults and model references") {
    Scratch s;
    s.write("model.json", R"({"states": 1, "mu": [[0.5]], "sigma": [[1]], "lambda": [[[0]]], "a": 2, "u": 0.5, "i0": 1})");
    const fs::path cfg = s.write("ref.json", R"({"model": "model.json"})");
    const hsde::cli::RunConfig rc = hsde::cli::load_run_config(cfg);
    CHECK(rc.model.band_high() == 2.0);
    CHECK(rc.M == 50);
    CHECK(rc.n_paths == 100000);
    CHECK(rc.bridge_correction);
    CHECK(rc.occupation_levels == std::vector<double>{0.5, 2.0});
    CHECK(rc.resolved["model"]["a"] == 2);

    const hsde::cli::RunConfig shipped = hsde::cli::load_run_config(testing::config_path("example_5_1.json"));
    CHECK(shipped.seed == 20240501);
    CHECK(shipped.study_M_list == std::vector<int>{5, 10, 20, 30, 40, 50});
}

#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "hybridsde/errors.hpp"
#include "hybridsde/grid.hpp"
#include "support.hpp"

using namespace hsde;

namespace {

std::size_t count_lines(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST_CASE("grid levels on the two half-grids") {
    const SpaceGrid g = build_grid(0.3, 1.0, 2);
    REQUIRE(g.levels().size() == 5);
    CHECK(g.level(-2) == 0.0);
    CHECK(g.level(-1) == doctest::Approx(0.15));
    CHECK(g.level(0) == 0.3);
    CHECK(g.level(1) == doctest::Approx(0.65));
    CHECK(g.level(2) == 1.0);
    CHECK(g.bands() == 4);
    CHECK(g.start_level() == 0.3);

    const SpaceGrid u = build_grid(0.5, 1.0, 50);
    CHECK(u.bands() == 100);
    for (std::size_t b = 0; b < u.bands(); ++b) CHECK(u.band_width(b) == doctest::Approx(0.01).epsilon(1e-9));
    for (std::size_t k = 1; k < u.levels().size(); ++k) CHECK(u.levels()[k] > u.levels()[k - 1]);

    CHECK_THROWS_AS(build_grid(0.5, 1.0, 0), ModelError);
    CHECK_THROWS_AS(build_grid(0.0, 1.0, 5), ModelError);
    CHECK_THROWS_AS(build_grid(1.0, 1.0, 5), ModelError);
}

TEST_CASE("band lookup is right-continuous") {
    const SpaceGrid g = build_grid(0.3, 1.0, 2);
    CHECK(g.band_of(0.0) == 0);
    CHECK(g.band_of(0.1) == 0);
    CHECK(g.band_of(0.15) == 1);
    CHECK(g.band_of(0.3) == 2);
    CHECK(g.band_of(0.2999) == 1);
    CHECK(g.band_of(0.65) == 3);
    CHECK(g.band_of(1.0) == 3);
    CHECK(g.band_of(-0.5) == 0);
    CHECK(g.band_of(7.0) == 3);

    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> xs(0.0, 1.0);
    const SpaceGrid h = build_grid(0.37, 1.0, 13);
    for (int k = 0; k < 2000; ++k) {
        const double x = xs(gen);
        const std::size_t b = h.band_of(x);
        CHECK(h.band_left(b) <= x);
        CHECK(x < h.band_right(b));
    }
}

TEST_CASE("sampling rules") {
    CHECK(sampling_rule_from_string("left_endpoint") == SamplingRule::left_endpoint);
    CHECK(sampling_rule_from_string("midpoint") == SamplingRule::midpoint);
    CHECK(sampling_rule_from_string("min_abs") == SamplingRule::min_abs);
    CHECK(to_string(SamplingRule::min_abs) == "min_abs");
    CHECK_THROWS_AS(sampling_rule_from_string("right"), ModelError);
}

TEST_CASE("band values re-evaluate the model at the sampling point") {
    const HybridModel m = testing::example_5_1();
    const SpaceGrid g = build_grid(m.start_level(), m.band_high(), 7);
    const GridApproximation left = build_approximation(m, g, SamplingRule::left_endpoint);
    const GridApproximation mid = build_approximation(m, g, SamplingRule::midpoint);
    for (std::size_t b = 0; b < g.bands(); ++b) {
        const double lo = g.band_left(b);
        const double c = 0.5 * (lo + g.band_right(b));
        for (std::size_t i = 0; i < m.states(); ++i) {
            CHECK(left.mu_hat[i][b] == m.mu(i)(lo));
            CHECK(left.sigma_hat[i][b] == m.sigma(i)(lo));
            CHECK(mid.mu_hat[i][b] == m.mu(i)(c));
        }
        CHECK((left.lambda_hat[b] - eval_generator(m, lo)).cwiseAbs().maxCoeff() == 0.0);
        CHECK((mid.lambda_hat[b] - eval_generator(m, c)).cwiseAbs().maxCoeff() == 0.0);
        CHECK(left.drift(2, lo) == left.mu_hat[2][b]);
    }
    CHECK(left.uniformization_rate == m.uniformization_rate());
    CHECK(left.start_state == m.start_state());
}

TEST_CASE("constant coefficients are reproduced exactly by every rule") {
    const HybridModel bm = testing::brownian(0.7, 1.3, 0.4, 2.0);
    for (auto rule : {SamplingRule::left_endpoint, SamplingRule::midpoint, SamplingRule::min_abs}) {
        const GridApproximation ap = build_approximation(bm, build_grid(0.4, 2.0, 9), rule);
        for (std::size_t b = 0; b < ap.grid.bands(); ++b) {
            CHECK(ap.mu_hat[0][b] == 0.7);
            CHECK(ap.sigma_hat[0][b] == 1.3);
        }
        const ApproximationReport r = approximation_report(bm, ap, 18.0);
        CHECK(r.mu_sup == 0.0);
        CHECK(r.sigma_sup == 0.0);
        CHECK(r.lambda_sup == 0.0);
    }
}

TEST_CASE("min_abs never exceeds the model's magnitude") {
    std::mt19937_64 gen(77);
    for (int trial = 0; trial < 20; ++trial) {
        const HybridModel m = testing::random_model(gen, 1 + trial % 3);
        const SpaceGrid g = build_grid(m.start_level(), m.band_high(), 3 + trial);
        const GridApproximation ap = build_approximation(m, g, SamplingRule::min_abs);
        const ApproximationReport r = approximation_report(m, ap, 2.0 * g.M());
        CHECK(r.mu_magnitude_excess <= 1e-12);
        CHECK(r.sigma_magnitude_excess <= 1e-12);
        // Sign of the band value matches the model wherever the band value is nonzero.
        for (std::size_t b = 0; b < g.bands(); ++b) {
            for (std::size_t i = 0; i < m.states(); ++i) {
                const double mh = ap.mu_hat[i][b];
                if (mh != 0.0) CHECK(mh * m.mu(i)(g.band_left(b)) > 0.0);
            }
        }
    }
}

TEST_CASE("approximation report on the three-state example") {
    const HybridModel m = testing::example_5_1();
    const GridApproximation ap = build_approximation(m, build_grid(0.5, 1.0, 50));
    const ApproximationReport r = approximation_report(m, ap, 100.0);
    // Closed forms for band width h = 0.01 under the left-endpoint rule:
    // mu_1 constant, mu_2 = 0.5 - 0.5 x changes by h / 2 per band,
    // mu_3 = 0.5 (1 - x)^2 changes most on the first band, by h (2 - h) / 2.
    const double h = 0.01;
    CHECK(r.mu_sup_error[0] == doctest::Approx(0.0));
    CHECK(r.mu_sup_error[1] == doctest::Approx(h / 2).epsilon(1e-9));
    CHECK(r.mu_sup_error[2] == doctest::Approx(h * (2 - h) / 2).epsilon(1e-9));
    CHECK(r.mu_sup == doctest::Approx(0.00995).epsilon(1e-9));
    CHECK(r.sigma_sup == 0.0);
    // Each generator row moves by 2 * 10 * h in row-sum norm across a band.
    CHECK(r.lambda_sup == doctest::Approx(20.0 * h).epsilon(1e-9));
    CHECK(r.coefficient_bound == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(r.intensity_bound == doctest::Approx(1.0 / std::log(100.0)).epsilon(1e-12));
    CHECK(r.coefficient_bound_holds);
    CHECK(r.intensity_bound_holds);

    CHECK(coefficient_rate_bound(100.0, 1.0, 1.0) == doctest::Approx(std::log(100.0) / 100.0));
    CHECK_THROWS_AS(approximation_report(m, ap, 1.0), ModelError);
}

TEST_CASE("approximation errors shrink under refinement") {
    const HybridModel m = testing::example_5_1();
    double prev_mu = INFINITY;
    double prev_lambda = INFINITY;
    for (int M : {5, 10, 20, 40, 80}) {
        const GridApproximation ap = build_approximation(m, build_grid(0.5, 1.0, M));
        const ApproximationReport r = approximation_report(m, ap, 2.0 * M);
        CHECK(r.mu_sup < prev_mu);
        CHECK(r.lambda_sup < prev_lambda);
        prev_mu = r.mu_sup;
        prev_lambda = r.lambda_sup;
    }
}

TEST_CASE("row-sum norm") {
    Eigen::MatrixXd a(2, 3);
    a << 1, -2, 0.5, -4, 0, 0;
    CHECK(row_sum_norm(a) == 4.0);
    CHECK(row_sum_norm(Eigen::MatrixXd(0, 0)) == 0.0);
}

TEST_CASE("approximation tables") {
    const HybridModel m = testing::example_5_1();
    const GridApproximation ap = build_approximation(m, build_grid(0.5, 1.0, 2));
    const std::string coeffs = approximation_csv(ap);
    CHECK(first_line(coeffs) == "band_index,zeta_left,zeta_right,state,mu_hat,sigma_hat");
    CHECK(count_lines(coeffs) == 1 + 4 * 3);
    const std::string lam = lambda_hat_csv(ap);
    CHECK(first_line(lam) == "band_index,zeta_left,zeta_right,from,to,rate");
    CHECK(count_lines(lam) == 1 + 4 * 9);
    CHECK(coeffs.find("\n1,0,0.25,3,0.5,1\n") != std::string::npos);
}

TEST_CASE("grid must end at the model's upper level") {
    const HybridModel m = testing::example_5_1();
    CHECK_THROWS_AS(build_approximation(m, build_grid(0.5, 2.0, 5)), ModelError);
}
